//! The expected-ratio function
//! `alpha(k) = sum_{j=0}^{k} 2^-k * C(k, j) * k / max(1, min(j, k - j))`,
//! which bounds GCSOD's max delay relative to CSOD's when `k` agents share
//! the cost under CSOD.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};

use crate::{Error, Result};

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// `alpha(k)` as an exact fraction.
pub fn alpha_exact(k: u64) -> Result<BigRational> {
    if k == 0 {
        return Err(Error::InvalidK);
    }
    // Put every term over lcm(1..=k/2) so the sum stays integral.
    let half = (k / 2).max(1);
    let lcm = (1..=half).fold(BigInt::one(), |acc, m| {
        let g = gcd(
            (&acc % BigInt::from(m)).to_u64().expect("remainder fits in u64"),
            m,
        );
        acc * BigInt::from(m / g)
    });

    let mut numerator = BigInt::from(0u8);
    let mut binom = BigInt::one();
    for j in 0..=k {
        let divisor = j.min(k - j).max(1);
        numerator += &binom * BigInt::from(k) * (&lcm / BigInt::from(divisor));
        binom = binom * BigInt::from(k - j) / BigInt::from(j + 1);
    }
    let denominator = lcm * (BigInt::one() << k);
    Ok(BigRational::new(numerator, denominator))
}

pub fn alpha(k: u64) -> Result<f64> {
    Ok(alpha_exact(k)?
        .to_f64()
        .expect("alpha is a finite rational"))
}

/// `(k, alpha(k))` for `k = 1..=k_max`.
pub fn alpha_table(k_max: u64) -> Vec<(u64, f64)> {
    (1..=k_max)
        .map(|k| (k, alpha(k).expect("k >= 1")))
        .collect()
}

/// True iff `alpha(k) < 4` for every `k` in `1..=k_max`, compared exactly.
pub fn verify_alpha_bound(k_max: u64) -> bool {
    let four = BigRational::from_integer(BigInt::from(4));
    (1..=k_max).all(|k| alpha_exact(k).expect("k >= 1") < four)
}

#[cfg(test)]
mod tests {
    use super::*;

    // Direct float evaluation of the defining sum.
    fn alpha_naive(k: u64) -> f64 {
        let mut binom = 1.0f64;
        let mut total = 0.0;
        for j in 0..=k {
            total += binom * k as f64 / j.min(k - j).max(1) as f64;
            binom = binom * (k - j) as f64 / (j + 1) as f64;
        }
        total / 2f64.powi(k as i32)
    }

    #[test]
    fn small_values_exact() {
        let r = |n: i64, d: i64| BigRational::new(BigInt::from(n), BigInt::from(d));
        assert_eq!(alpha_exact(1).unwrap(), r(1, 1));
        assert_eq!(alpha_exact(2).unwrap(), r(2, 1));
        assert_eq!(alpha_exact(3).unwrap(), r(3, 1));
        assert_eq!(alpha_exact(4).unwrap(), r(13, 4));
    }

    #[test]
    fn matches_naive_sum() {
        for k in 1..=60 {
            let exact = alpha(k).unwrap();
            assert!((exact - alpha_naive(k)).abs() < 1e-12 * exact, "k={k}");
        }
    }

    #[test]
    fn rejects_zero() {
        assert_eq!(alpha_exact(0), Err(Error::InvalidK));
    }

    #[test]
    fn bound_holds() {
        assert!(verify_alpha_bound(1));
        assert!(verify_alpha_bound(50));
        assert!(verify_alpha_bound(200));
    }
}
