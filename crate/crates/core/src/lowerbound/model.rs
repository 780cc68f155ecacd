use std::fmt::Write as _;

use microlp::{ComparisonOp, OptimizationDirection, Problem, SolveOutcome};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Feasibility slack accepted on a returned optimum.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-7;
/// Accepted gap between the primal optimum and its dual certificate.
pub const OPTIMALITY_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Constraint {
    fn lhs(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|&(j, a)| a * values[j]).sum()
    }

    /// How far `values` are from satisfying this row; zero when satisfied.
    fn violation(&self, values: &[f64]) -> f64 {
        let gap = self.lhs(values) - self.rhs;
        match self.sense {
            Sense::Le => gap.max(0.0),
            Sense::Ge => (-gap).max(0.0),
            Sense::Eq => gap.abs(),
        }
    }
}

/// A minimization LP over named, bounded variables.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LpModel {
    variables: Vec<Variable>,
    constraints: Vec<Constraint>,
    objective: Vec<(usize, f64)>,
}

impl LpModel {
    pub fn new() -> Self {
        Self::default()
    }

    /// Declares a variable and returns its index.
    pub fn add_variable(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> usize {
        self.variables.push(Variable {
            name: name.into(),
            lower,
            upper,
        });
        self.variables.len() - 1
    }

    fn check_terms(&self, terms: &[(usize, f64)]) -> Result<()> {
        for &(j, a) in terms {
            if j >= self.variables.len() {
                return Err(Error::Lp(format!("term references undeclared variable {j}")));
            }
            if !a.is_finite() {
                return Err(Error::Lp(format!("non-finite coefficient on {}", self.variables[j].name)));
            }
        }
        Ok(())
    }

    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        terms: Vec<(usize, f64)>,
        sense: Sense,
        rhs: f64,
    ) -> Result<()> {
        self.check_terms(&terms)?;
        self.constraints.push(Constraint {
            name: name.into(),
            terms,
            sense,
            rhs,
        });
        Ok(())
    }

    /// Replaces the (minimized) objective.
    pub fn set_objective(&mut self, terms: Vec<(usize, f64)>) -> Result<()> {
        self.check_terms(&terms)?;
        self.objective = terms;
        Ok(())
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn objective(&self) -> &[(usize, f64)] {
        &self.objective
    }

    pub fn variable_index(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective.iter().map(|&(j, c)| c * values[j]).sum()
    }

    /// Largest violation of any row or bound by `values`.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let rows = self.constraints.iter().map(|c| c.violation(values));
        let bounds = self
            .variables
            .iter()
            .zip(values)
            .map(|(v, &x)| (v.lower - x).max(x - v.upper).max(0.0));
        rows.chain(bounds).fold(0.0, f64::max)
    }

    /// CPLEX LP text, readable by most external solvers.
    pub fn to_lp_format(&self) -> String {
        fn linear(out: &mut String, model: &LpModel, terms: &[(usize, f64)]) {
            if terms.is_empty() {
                out.push_str(" 0");
                return;
            }
            for (k, &(j, a)) in terms.iter().enumerate() {
                let sign = if a < 0.0 { '-' } else { '+' };
                if k == 0 && sign == '+' {
                    let _ = write!(out, " {} {}", a, model.variables[j].name);
                } else {
                    let _ = write!(out, " {sign} {} {}", a.abs(), model.variables[j].name);
                }
            }
        }

        let mut out = String::from("Minimize\n obj:");
        linear(&mut out, self, &self.objective);
        out.push_str("\nSubject To\n");
        for c in &self.constraints {
            let _ = write!(out, " {}:", c.name);
            linear(&mut out, self, &c.terms);
            let op = match c.sense {
                Sense::Le => "<=",
                Sense::Ge => ">=",
                Sense::Eq => "=",
            };
            let _ = writeln!(out, " {op} {}", c.rhs);
        }
        out.push_str("Bounds\n");
        for v in &self.variables {
            match (v.lower.is_finite(), v.upper.is_finite()) {
                (false, false) => {
                    let _ = writeln!(out, " {} free", v.name);
                }
                (true, true) => {
                    let _ = writeln!(out, " {} <= {} <= {}", v.lower, v.name, v.upper);
                }
                (true, false) => {
                    let _ = writeln!(out, " {} >= {}", v.name, v.lower);
                }
                (false, true) => {
                    let _ = writeln!(out, " -inf <= {} <= {}", v.name, v.upper);
                }
            }
        }
        out.push_str("End\n");
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    pub objective_value: Option<f64>,
    /// Variable values in declaration order; empty unless optimal.
    pub values: Vec<f64>,
    /// Objective of the verified dual solution, a lower bound on the optimum.
    pub dual_bound: Option<f64>,
}

impl LpSolution {
    fn without_optimum(status: LpStatus) -> Self {
        Self {
            status,
            objective_value: None,
            values: Vec::new(),
            dual_bound: None,
        }
    }

    pub fn value(&self, index: usize) -> Option<f64> {
        self.values.get(index).copied()
    }
}

enum Raw {
    Optimal(f64, Vec<f64>),
    Infeasible,
    Unbounded,
}

fn run(problem: Problem, vars: &[microlp::Variable]) -> Result<Raw> {
    match problem.solve() {
        Ok(SolveOutcome::Solution(s)) => Ok(Raw::Optimal(
            s.objective(),
            vars.iter().map(|&v| s.var_value(v)).collect(),
        )),
        Ok(_) => Err(Error::Lp("solver interrupted".into())),
        Err(microlp::Error::Infeasible) => Ok(Raw::Infeasible),
        Err(microlp::Error::Unbounded) => Ok(Raw::Unbounded),
        Err(e) => Err(Error::Lp(e.to_string())),
    }
}

fn op(sense: Sense) -> ComparisonOp {
    match sense {
        Sense::Le => ComparisonOp::Le,
        Sense::Ge => ComparisonOp::Ge,
        Sense::Eq => ComparisonOp::Eq,
    }
}

/// Rows of the model with finite variable bounds appended as extra rows, so
/// that the dual has only sign-constrained multipliers and free primal
/// columns.
fn rows_with_bounds(model: &LpModel) -> Vec<Constraint> {
    let mut rows = model.constraints.clone();
    for (j, v) in model.variables.iter().enumerate() {
        if v.lower.is_finite() {
            rows.push(Constraint {
                name: format!("{}_lo", v.name),
                terms: vec![(j, 1.0)],
                sense: Sense::Ge,
                rhs: v.lower,
            });
        }
        if v.upper.is_finite() {
            rows.push(Constraint {
                name: format!("{}_hi", v.name),
                terms: vec![(j, 1.0)],
                sense: Sense::Le,
                rhs: v.upper,
            });
        }
    }
    rows
}

/// Solves the dual `max b'y  s.t.  A'y = c`, with `y >= 0` on `>=` rows,
/// `y <= 0` on `<=` rows, and checks the result by hand. Returns `b'y` when
/// the multipliers are dual feasible; by weak duality it bounds the primal
/// optimum from below.
fn dual_bound(model: &LpModel) -> Result<Option<f64>> {
    let rows = rows_with_bounds(model);
    let mut problem = Problem::new(OptimizationDirection::Maximize);
    let ys: Vec<_> = rows
        .iter()
        .map(|r| {
            let range = match r.sense {
                Sense::Ge => (0.0, f64::INFINITY),
                Sense::Le => (f64::NEG_INFINITY, 0.0),
                Sense::Eq => (f64::NEG_INFINITY, f64::INFINITY),
            };
            problem.add_var(r.rhs, range)
        })
        .collect();
    let n = model.variables.len();
    let mut columns: Vec<Vec<(microlp::Variable, f64)>> = vec![Vec::new(); n];
    for (r, row) in rows.iter().enumerate() {
        for &(j, a) in &row.terms {
            columns[j].push((ys[r], a));
        }
    }
    let mut cost = vec![0.0; n];
    for &(j, c) in &model.objective {
        cost[j] += c;
    }
    for (j, column) in columns.iter().enumerate() {
        problem.add_constraint(column.as_slice(), ComparisonOp::Eq, cost[j]);
    }
    let y = match run(problem, &ys)? {
        Raw::Optimal(_, y) => y,
        _ => return Ok(None),
    };

    // Independent check of the multipliers.
    let mut residual = cost;
    let mut bound = 0.0;
    for (row, &yr) in rows.iter().zip(&y) {
        let sign_ok = match row.sense {
            Sense::Ge => yr >= -FEASIBILITY_TOLERANCE,
            Sense::Le => yr <= FEASIBILITY_TOLERANCE,
            Sense::Eq => true,
        };
        if !sign_ok {
            return Ok(None);
        }
        for &(j, a) in &row.terms {
            residual[j] -= a * yr;
        }
        bound += row.rhs * yr;
    }
    let worst = residual.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    Ok((worst <= FEASIBILITY_TOLERANCE).then_some(bound))
}

/// Minimizes the model's objective.
///
/// An `Optimal` result is primal feasible within [`FEASIBILITY_TOLERANCE`]
/// and matched by a dual certificate within [`OPTIMALITY_TOLERANCE`];
/// anything else is reported as an error.
pub fn solve_lp(model: &LpModel) -> Result<LpSolution> {
    let mut solution = solve_lp_primal(model)?;
    if solution.status != LpStatus::Optimal {
        return Ok(solution);
    }
    let objective = solution.objective_value.expect("optimal has a value");
    let bound = dual_bound(model)?
        .ok_or_else(|| Error::Lp("no valid dual certificate".into()))?;
    if (objective - bound).abs() > OPTIMALITY_TOLERANCE {
        return Err(Error::Lp(format!(
            "duality gap {:e} exceeds tolerance",
            (objective - bound).abs()
        )));
    }
    solution.dual_bound = Some(bound);
    Ok(solution)
}

/// Like [`solve_lp`] but without the dual certificate: the values are
/// checked for feasibility, so the objective is a valid upper bound on the
/// optimum, but optimality itself is taken on trust.
pub fn solve_lp_primal(model: &LpModel) -> Result<LpSolution> {
    let mut problem = Problem::new(OptimizationDirection::Minimize);
    let mut cost = vec![0.0; model.variables.len()];
    for &(j, c) in &model.objective {
        cost[j] += c;
    }
    let vars: Vec<_> = model
        .variables
        .iter()
        .zip(&cost)
        .map(|(v, &c)| problem.add_var(c, (v.lower, v.upper)))
        .collect();
    for c in &model.constraints {
        let terms: Vec<_> = c.terms.iter().map(|&(j, a)| (vars[j], a)).collect();
        problem.add_constraint(terms.as_slice(), op(c.sense), c.rhs);
    }

    let (objective, values) = match run(problem, &vars)? {
        Raw::Optimal(obj, values) => (obj, values),
        Raw::Infeasible => return Ok(LpSolution::without_optimum(LpStatus::Infeasible)),
        Raw::Unbounded => return Ok(LpSolution::without_optimum(LpStatus::Unbounded)),
    };

    let violation = model.max_violation(&values);
    if violation > FEASIBILITY_TOLERANCE {
        return Err(Error::Lp(format!("solution violates the model by {violation:e}")));
    }
    let objective = if objective.is_finite() {
        model.objective_value(&values)
    } else {
        objective
    };
    Ok(LpSolution {
        status: LpStatus::Optimal,
        objective_value: Some(objective),
        values,
        dual_bound: None,
    })
}
