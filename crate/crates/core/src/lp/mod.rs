//! Linear programming kernel for the outer-approximation relaxations.

mod factor;
mod simplex;

pub use simplex::Simplex;

use thiserror::Error;

use crate::model::{LinConstraint, Model};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("empty or invalid bounds [{lower}, {upper}] on column {col}")]
    Bounds { col: usize, lower: f64, upper: f64 },
    #[error("unknown column {0}")]
    UnknownColumn(usize),
    #[error("expected {expected} entries, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("non-finite data in {0}")]
    NonFinite(&'static str),
}

/// `lower <= sum(coef * x) <= upper`.
#[derive(Debug, Clone, PartialEq)]
pub struct LpRow {
    pub coefs: Vec<(usize, f64)>,
    pub lower: f64,
    pub upper: f64,
}

impl LpRow {
    pub fn from_constraint(row: &LinConstraint) -> Self {
        let (lower, upper) = row.row_bounds();
        LpRow {
            coefs: row.expr.terms().map(|(v, c)| (v.index(), c)).collect(),
            lower,
            upper,
        }
    }

    pub(crate) fn validate(&self, n: usize) -> Result<(), LpError> {
        for &(j, v) in &self.coefs {
            if j >= n {
                return Err(LpError::UnknownColumn(j));
            }
            if !v.is_finite() {
                return Err(LpError::NonFinite("row coefficients"));
            }
        }
        if self.lower.is_nan() || self.upper.is_nan() || self.lower > self.upper {
            return Err(LpError::NonFinite("row bounds"));
        }
        Ok(())
    }
}

/// Minimize `obj . x + obj_constant` over boxed columns and ranged rows.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LpProblem {
    pub col_lower: Vec<f64>,
    pub col_upper: Vec<f64>,
    pub obj: Vec<f64>,
    pub obj_constant: f64,
    pub rows: Vec<LpRow>,
}

impl LpProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_col(&mut self, cost: f64, lower: f64, upper: f64) -> usize {
        self.obj.push(cost);
        self.col_lower.push(lower);
        self.col_upper.push(upper);
        self.obj.len() - 1
    }

    pub fn add_row(&mut self, coefs: Vec<(usize, f64)>, lower: f64, upper: f64) -> usize {
        self.rows.push(LpRow {
            coefs,
            lower,
            upper,
        });
        self.rows.len() - 1
    }

    /// Continuous relaxation of `model` with every cone dropped.
    pub fn from_model(model: &Model) -> Self {
        let mut lp = LpProblem::new();
        for def in model.vars() {
            lp.add_col(0.0, def.lower, def.upper);
        }
        for (v, c) in model.objective().terms() {
            lp.obj[v.index()] = c;
        }
        lp.obj_constant = model.objective().constant;
        lp.rows = model.constraints().iter().map(LpRow::from_constraint).collect();
        lp
    }

    pub fn num_cols(&self) -> usize {
        self.obj.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub(crate) fn validate(&self) -> Result<(), LpError> {
        let n = self.obj.len();
        if self.col_lower.len() != n || self.col_upper.len() != n {
            return Err(LpError::Dimension {
                expected: n,
                got: self.col_lower.len().min(self.col_upper.len()),
            });
        }
        for j in 0..n {
            let (l, u) = (self.col_lower[j], self.col_upper[j]);
            if l.is_nan() || u.is_nan() || l > u || l == f64::INFINITY || u == f64::NEG_INFINITY {
                return Err(LpError::Bounds {
                    col: j,
                    lower: l,
                    upper: u,
                });
            }
            if !self.obj[j].is_finite() {
                return Err(LpError::NonFinite("objective"));
            }
        }
        for row in &self.rows {
            row.validate(n)?;
        }
        Ok(())
    }

    /// Objective value at `x` (structural columns).
    pub fn objective_at(&self, x: &[f64]) -> f64 {
        self.obj_constant + self.obj.iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
    }

    /// Largest bound or row violation at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for j in 0..self.num_cols() {
            worst = worst
                .max(self.col_lower[j] - x[j])
                .max(x[j] - self.col_upper[j]);
        }
        for row in &self.rows {
            let a: f64 = row.coefs.iter().map(|&(j, v)| v * x[j]).sum();
            worst = worst.max(row.lower - a).max(a - row.upper);
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VarStatus {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic free column held at zero.
    Free,
}

/// Warm-start token: status of every column followed by every row activity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Basis {
    pub(crate) status: Vec<VarStatus>,
}

impl Basis {
    pub fn len(&self) -> usize {
        self.status.len()
    }

    pub fn is_empty(&self) -> bool {
        self.status.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpParams {
    pub primal_tol: f64,
    pub dual_tol: f64,
    pub pivot_tol: f64,
    /// Defaults to `200 * (rows + cols)`.
    pub max_iterations: Option<usize>,
    pub refactor_every: usize,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub stall_limit: usize,
}

impl Default for LpParams {
    fn default() -> Self {
        LpParams {
            primal_tol: 1e-9,
            dual_tol: 1e-9,
            pivot_tol: 1e-7,
            max_iterations: None,
            refactor_every: 100,
            stall_limit: 50,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Structural column values.
    pub primal: Vec<f64>,
    pub row_activity: Vec<f64>,
    /// Row duals `y = B^{-T} c_B`.
    pub dual: Vec<f64>,
    /// Reduced costs for columns then row activities.
    pub reduced_costs: Vec<f64>,
    pub objective: f64,
    pub basis: Basis,
    pub iterations: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
    obj_constant: f64,
    dual_tol: f64,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    /// Lagrangian dual value `min_{l <= x <= u} sum_j d_j x_j`; reduced costs
    /// below the dual tolerance are treated as zero.
    pub fn dual_objective(&self) -> f64 {
        let mut total = self.obj_constant;
        for (j, &dj) in self.reduced_costs.iter().enumerate() {
            if dj.abs() <= self.dual_tol {
                continue;
            }
            let bound = if dj > 0.0 { self.lower[j] } else { self.upper[j] };
            total += dj * bound;
        }
        total
    }
}

/// Solves `problem`, optionally from a previous basis.
pub fn solve_lp(problem: &LpProblem, warm_start: Option<&Basis>) -> Result<LpSolution, LpError> {
    let mut s = Simplex::new(problem)?;
    if let Some(b) = warm_start {
        s.load_basis(b);
    }
    Ok(s.solve())
}

/// Appends `new_rows` to `problem` and re-solves from `solution`'s basis.
pub fn add_rows_resolve(
    problem: &mut LpProblem,
    solution: &LpSolution,
    new_rows: Vec<LpRow>,
) -> Result<LpSolution, LpError> {
    for row in &new_rows {
        row.validate(problem.num_cols())?;
    }
    problem.rows.extend(new_rows);
    solve_lp(problem, Some(&solution.basis))
}

/// Replaces the bounds of column `var` and re-solves from `solution`'s basis.
pub fn change_bounds_resolve(
    problem: &mut LpProblem,
    solution: &LpSolution,
    var: usize,
    lower: f64,
    upper: f64,
) -> Result<LpSolution, LpError> {
    if var >= problem.num_cols() {
        return Err(LpError::UnknownColumn(var));
    }
    if lower.is_nan() || upper.is_nan() || lower > upper {
        return Err(LpError::Bounds {
            col: var,
            lower,
            upper,
        });
    }
    problem.col_lower[var] = lower;
    problem.col_upper[var] = upper;
    solve_lp(problem, Some(&solution.basis))
}
