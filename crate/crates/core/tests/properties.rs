use bugshare_core::audit::{check_competitive_max, check_competitive_sum, myerson_payment, AllocationRule};
use bugshare_core::mechanisms::{
    cs_allocate, csd_allocate, csod_allocate, gcsod_allocate, gcsod_expected, optimal_deadline,
};
use bugshare_core::{DistributionSpec, Grouping, Mechanism, Outcome, TypeProfile};
use proptest::prelude::*;

fn values(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..=1.2, 1..=max_len)
}

fn unit_values(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.001f64..=1.0, 1..=max_len)
}

fn mechanisms() -> impl Strategy<Value = Mechanism> {
    prop_oneof![
        Just(Mechanism::Cs),
        (0.0f64..=1.0).prop_map(|d| Mechanism::Csd { deadline: d }),
        Just(Mechanism::Csod),
    ]
}

fn assert_well_formed(o: &Outcome, profile: &TypeProfile) {
    assert_eq!(o.times.len(), profile.len());
    for i in 0..profile.len() {
        assert!((0.0..=1.0).contains(&o.times[i]), "{o:?}");
        assert!(o.payments[i] >= 0.0);
        if o.payments[i] > 0.0 {
            assert_eq!(o.times[i], 0.0, "payers are served immediately");
        }
    }
}

/// Sold outcomes split the unit cost evenly among the payers; unsold
/// outcomes charge nobody.
fn assert_cost_shared(o: &Outcome) {
    if o.sold {
        let k = o.payer_count();
        assert!(k >= 1);
        assert!((o.total_payment() - 1.0).abs() < 1e-9);
        for &p in o.payments.iter().filter(|&&p| p > 0.0) {
            assert!((p - 1.0 / k as f64).abs() < 1e-12);
        }
    } else {
        assert!(o.payments.iter().all(|&p| p == 0.0));
    }
}

fn assert_ir(o: &Outcome, profile: &TypeProfile) {
    for i in 0..profile.len() {
        assert!(o.utility(i, profile.value(i)) >= -1e-12, "agent {i} in {o:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn deterministic_outcomes_are_well_formed(v in values(10), m in mechanisms()) {
        let p = TypeProfile::new(v).unwrap();
        let o = m.outcome(&p).unwrap();
        assert_well_formed(&o, &p);
        assert_cost_shared(&o);
        assert_ir(&o, &p);
    }

    #[test]
    fn gcsod_realizations_are_well_formed(v in values(8), mask in any::<u64>()) {
        let p = TypeProfile::new(v).unwrap();
        let g = Grouping::from_mask(p.len(), mask);
        let o = gcsod_allocate(&p, &g).unwrap();
        assert_well_formed(&o, &p);
        assert_cost_shared(&o);
        assert_ir(&o, &p);
        if !o.sold {
            assert!(o.times.iter().all(|&t| t == 1.0));
        }
    }

    #[test]
    fn cs_is_csd_at_one(v in values(10)) {
        let p = TypeProfile::new(v).unwrap();
        prop_assert_eq!(cs_allocate(&p), csd_allocate(&p, 1.0).unwrap());
    }

    #[test]
    fn csd_budget_fails_exactly_when_unsold_early(v in values(8), d in 0.0f64..1.0) {
        let p = TypeProfile::new(v).unwrap();
        let o = csd_allocate(&p, d).unwrap();
        let violated = !check_budget(&o);
        prop_assert_eq!(violated, !o.sold);
    }

    #[test]
    fn later_deadlines_admit_more_payers(v in values(8), a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        let p = TypeProfile::new(v).unwrap();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let k_lo = csd_allocate(&p, lo).unwrap().payer_count();
        let k_hi = csd_allocate(&p, hi).unwrap().payer_count();
        prop_assert!(k_lo <= k_hi);
    }

    #[test]
    fn optimal_deadline_is_earliest_selling_deadline(v in values(8)) {
        let p = TypeProfile::new(v).unwrap();
        let d = optimal_deadline(&p);
        prop_assert!(d.t_star > 0.0 && d.t_star <= 1.0);
        let o = csod_allocate(&p);
        prop_assert_eq!(o.payer_count(), d.k_star);
        if d.k_star > 0 && d.t_star < 1.0 {
            let earlier = csd_allocate(&p, d.t_star * (1.0 - 1e-9)).unwrap();
            prop_assert!(!earlier.sold);
        }
        prop_assert_eq!(o.sold, cs_allocate(&p).sold);
    }

    #[test]
    fn gcsod_expectation_is_the_grouping_average(v in values(6)) {
        let p = TypeProfile::new(v).unwrap();
        let e = gcsod_expected(&p).unwrap();
        let n = p.len();
        let outcomes: Vec<Outcome> = (0..1u64 << n)
            .map(|m| gcsod_allocate(&p, &Grouping::from_mask(n, m)).unwrap())
            .collect();
        let w = 1.0 / outcomes.len() as f64;
        let max: f64 = outcomes.iter().map(|o| o.max_delay() * w).sum();
        let sum: f64 = outcomes.iter().map(|o| o.sum_delay() * w).sum();
        prop_assert!((e.expected_max_delay - max).abs() < 1e-12);
        prop_assert!((e.expected_sum_delay - sum).abs() < 1e-12);
        for i in 0..n {
            let t: f64 = outcomes.iter().map(|o| o.times[i] * w).sum();
            prop_assert!((e.expected_times[i] - t).abs() < 1e-12);
        }
    }

    #[test]
    fn competitive_ratios_hold_under_assumptions(v in unit_values(10)) {
        let p = TypeProfile::new(v).unwrap();
        let max = check_competitive_max(&p).unwrap();
        prop_assert!(max.within_bound, "{max:?}");
        let sum = check_competitive_sum(&p).unwrap();
        prop_assert!(sum.within_bound, "{sum:?}");
    }
}

fn check_budget(o: &Outcome) -> bool {
    if o.sold {
        (o.total_payment() - 1.0).abs() < 1e-9
    } else {
        o.payments.iter().all(|&p| p == 0.0) && o.times.iter().all(|&t| t == 1.0)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    // Payments follow from allocation times alone: the Myerson integral over
    // the agent's own report reproduces what the mechanism charges.
    #[test]
    fn payments_match_myerson(v in unit_values(5), agent in 0usize..5, m in prop_oneof![
        Just(Mechanism::Cs),
        (0.2f64..=1.0).prop_map(|d| Mechanism::Csd { deadline: d }),
        Just(Mechanism::Gcsod),
    ]) {
        let p = TypeProfile::new(v).unwrap();
        let agent = agent % p.len();
        let grid = 2000;
        let paid = m.expected_outcome(&p).unwrap().payments[agent];
        let oracle = myerson_payment(&m, agent, &p, grid).unwrap();
        let tolerance = p.value(agent) / grid as f64 + 1e-9;
        prop_assert!((paid - oracle).abs() <= tolerance, "{m} {p} agent {agent}: {paid} vs {oracle}");
    }

    #[test]
    fn discretized_masses_form_a_distribution(mu in 0.1f64..0.9, sigma in 0.05f64..1.0, h in 1usize..300) {
        let spec = DistributionSpec::truncated_normal(mu, sigma, 0.0, 1.0).unwrap();
        let seg = spec.discretize(h).unwrap();
        prop_assert!(seg.masses.iter().all(|&m| m >= 0.0));
        prop_assert!((seg.masses.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn quantile_inverts_cdf(mu in 0.0f64..1.0, sigma in 0.05f64..1.0, x in 0.0f64..=1.0) {
        let spec = DistributionSpec::truncated_normal(mu, sigma, 0.0, 1.0).unwrap();
        let u = spec.cdf(x).unwrap();
        prop_assert!((0.0..=1.0).contains(&u));
        prop_assert!((spec.quantile(u) - x).abs() < 1e-6);
    }
}
