//! Bounded-variable revised simplex (primal with composite phase 1, and dual).
//!
//! Every row `r` gets an activity variable `s_r = a_r x` with the row bounds,
//! so the system is `[A -I] (x, s) = 0` with all variables boxed (possibly by
//! infinite bounds). Pricing recomputes duals from scratch each iteration.

use super::factor::BasisFactor;
use super::{Basis, LpError, LpParams, LpProblem, LpRow, LpSolution, LpStatus, VarStatus};

const NONE: usize = usize::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Outcome {
    Optimal,
    Infeasible,
    Unbounded,
    IterLimit,
    Restart,
}

/// A reusable LP context. Rows and bound changes can be applied between
/// solves; the basis carries over as a warm start.
#[derive(Debug, Clone)]
pub struct Simplex {
    params: LpParams,
    n: usize,
    cols: Vec<Vec<(usize, f64)>>,
    cost: Vec<f64>,
    obj_constant: f64,
    lower: Vec<f64>,
    upper: Vec<f64>,
    status: Vec<VarStatus>,
    x: Vec<f64>,
    head: Vec<usize>,
    pos_of: Vec<usize>,
    factor: BasisFactor,
    y: Vec<f64>,
    d: Vec<f64>,
    bland: bool,
    stall: usize,
    iterations: usize,
    total_iterations: usize,
    budget: usize,
}

impl Simplex {
    pub fn new(problem: &LpProblem) -> Result<Self, LpError> {
        Self::with_params(problem, LpParams::default())
    }

    pub fn with_params(problem: &LpProblem, params: LpParams) -> Result<Self, LpError> {
        problem.validate()?;
        let n = problem.num_cols();
        let mut s = Simplex {
            params,
            n,
            cols: vec![Vec::new(); n],
            cost: problem.obj.clone(),
            obj_constant: problem.obj_constant,
            lower: problem.col_lower.clone(),
            upper: problem.col_upper.clone(),
            status: Vec::with_capacity(n),
            x: vec![0.0; n],
            head: Vec::new(),
            pos_of: vec![NONE; n],
            factor: BasisFactor::default(),
            y: Vec::new(),
            d: Vec::new(),
            bland: false,
            stall: 0,
            iterations: 0,
            total_iterations: 0,
            budget: 0,
        };
        for j in 0..n {
            let st = default_status(s.lower[j], s.upper[j]);
            s.status.push(st);
            s.x[j] = nonbasic_value(st, s.lower[j], s.upper[j]);
        }
        s.append_rows(&problem.rows);
        Ok(s)
    }

    pub fn num_cols(&self) -> usize {
        self.n
    }

    pub fn num_rows(&self) -> usize {
        self.head.len()
    }

    /// Pivots performed across all solves of this context.
    pub fn total_iterations(&self) -> usize {
        self.total_iterations
    }

    pub fn col_bounds(&self, j: usize) -> (f64, f64) {
        (self.lower[j], self.upper[j])
    }

    fn append_rows(&mut self, rows: &[LpRow]) {
        for row in rows {
            let r = self.head.len();
            for &(j, v) in &row.coefs {
                if v != 0.0 {
                    self.cols[j].push((r, v));
                }
            }
            let var = self.n + r;
            self.lower.push(row.lower);
            self.upper.push(row.upper);
            self.status.push(VarStatus::Basic);
            self.x.push(0.0);
            self.pos_of.push(r);
            self.head.push(var);
        }
    }

    /// Appends rows; each new row's activity enters the basis.
    pub fn add_rows(&mut self, rows: &[LpRow]) -> Result<(), LpError> {
        for row in rows {
            row.validate(self.n)?;
        }
        self.append_rows(rows);
        Ok(())
    }

    pub fn set_col_bounds(&mut self, j: usize, lower: f64, upper: f64) -> Result<(), LpError> {
        if j >= self.n {
            return Err(LpError::UnknownColumn(j));
        }
        if lower.is_nan() || upper.is_nan() || lower > upper {
            return Err(LpError::Bounds {
                col: j,
                lower,
                upper,
            });
        }
        self.lower[j] = lower;
        self.upper[j] = upper;
        if self.status[j] != VarStatus::Basic {
            let st = match self.status[j] {
                VarStatus::AtUpper if upper.is_finite() => VarStatus::AtUpper,
                VarStatus::AtLower if lower.is_finite() => VarStatus::AtLower,
                _ => default_status(lower, upper),
            };
            self.status[j] = st;
            self.x[j] = nonbasic_value(st, lower, upper);
        }
        Ok(())
    }

    pub fn set_costs(&mut self, cost: &[f64]) -> Result<(), LpError> {
        if cost.len() != self.n {
            return Err(LpError::Dimension {
                expected: self.n,
                got: cost.len(),
            });
        }
        self.cost.copy_from_slice(cost);
        Ok(())
    }

    pub fn basis(&self) -> Basis {
        Basis {
            status: self.status.clone(),
        }
    }

    /// Installs a warm-start basis. Rows beyond the basis length get basic
    /// activities; an inconsistent basis falls back to the slack basis.
    pub fn load_basis(&mut self, basis: &Basis) {
        let total = self.n + self.head.len();
        let mut status = basis.status.clone();
        if status.len() > total || status.len() < self.n {
            self.reset_basis();
            return;
        }
        status.resize(total, VarStatus::Basic);
        let basic = status.iter().filter(|&&s| s == VarStatus::Basic).count();
        if basic != self.head.len() {
            self.reset_basis();
            return;
        }
        self.status = status;
        self.rebuild_head();
        for j in 0..total {
            if self.status[j] != VarStatus::Basic {
                let st = match self.status[j] {
                    VarStatus::AtUpper if self.upper[j].is_finite() => VarStatus::AtUpper,
                    VarStatus::AtLower if self.lower[j].is_finite() => VarStatus::AtLower,
                    _ => default_status(self.lower[j], self.upper[j]),
                };
                self.status[j] = st;
                self.x[j] = nonbasic_value(st, self.lower[j], self.upper[j]);
            }
        }
    }

    pub fn reset_basis(&mut self) {
        let m = self.head.len();
        for j in 0..self.n {
            let st = default_status(self.lower[j], self.upper[j]);
            self.status[j] = st;
            self.x[j] = nonbasic_value(st, self.lower[j], self.upper[j]);
        }
        for r in 0..m {
            self.status[self.n + r] = VarStatus::Basic;
        }
        self.rebuild_head();
    }

    fn rebuild_head(&mut self) {
        self.head.clear();
        self.pos_of.iter_mut().for_each(|p| *p = NONE);
        for (j, st) in self.status.iter().enumerate() {
            if *st == VarStatus::Basic {
                self.pos_of[j] = self.head.len();
                self.head.push(j);
            }
        }
    }

    fn col_dense(&self, j: usize) -> Vec<f64> {
        let mut a = vec![0.0; self.head.len()];
        if j < self.n {
            for &(r, v) in &self.cols[j] {
                a[r] += v;
            }
        } else {
            a[j - self.n] = -1.0;
        }
        a
    }

    fn refactor(&mut self) {
        for _ in 0..(self.head.len() + 2) {
            match BasisFactor::new(self.n, &self.head, &self.cols) {
                Ok(f) => {
                    self.factor = f;
                    return;
                }
                Err(sing) => {
                    // Swap dependent structurals for slacks of uncovered rows.
                    let mut repaired = false;
                    for (&pos, &row) in sing.dependent_positions.iter().zip(&sing.uncovered_rows) {
                        let old = self.head[pos];
                        let slack = self.n + row;
                        if self.status[slack] == VarStatus::Basic {
                            continue;
                        }
                        let st = nearest_bound_status(self.x[old], self.lower[old], self.upper[old]);
                        self.status[old] = st;
                        self.x[old] = nonbasic_value(st, self.lower[old], self.upper[old]);
                        self.pos_of[old] = NONE;
                        self.status[slack] = VarStatus::Basic;
                        self.head[pos] = slack;
                        self.pos_of[slack] = pos;
                        repaired = true;
                    }
                    if !repaired {
                        self.reset_basis();
                    }
                }
            }
        }
        self.reset_basis();
        self.factor = BasisFactor::new(self.n, &self.head, &self.cols)
            .expect("slack basis is always nonsingular");
    }

    fn compute_primal(&mut self) {
        let m = self.head.len();
        let mut rhs = vec![0.0; m];
        for j in 0..self.n {
            if self.status[j] != VarStatus::Basic {
                let xj = self.x[j];
                if xj != 0.0 {
                    for &(r, v) in &self.cols[j] {
                        rhs[r] -= v * xj;
                    }
                }
            }
        }
        for r in 0..m {
            let j = self.n + r;
            if self.status[j] != VarStatus::Basic {
                rhs[r] += self.x[j];
            }
        }
        let xb = self.factor.ftran(&rhs, &self.cols);
        for (pos, &j) in self.head.iter().enumerate() {
            self.x[j] = xb[pos];
        }
    }

    fn compute_duals_with(&mut self, cb: &[f64], structural_cost: bool) {
        self.y = self.factor.btran(cb, &self.cols);
        let total = self.n + self.head.len();
        self.d.resize(total, 0.0);
        for j in 0..self.n {
            let mut dj = if structural_cost { self.cost[j] } else { 0.0 };
            for &(r, v) in &self.cols[j] {
                dj -= self.y[r] * v;
            }
            self.d[j] = dj;
        }
        for r in 0..self.head.len() {
            self.d[self.n + r] = self.y[r];
        }
        for &j in &self.head {
            self.d[j] = 0.0;
        }
    }

    fn compute_duals(&mut self) {
        let cb: Vec<f64> = self
            .head
            .iter()
            .map(|&j| if j < self.n { self.cost[j] } else { 0.0 })
            .collect();
        self.compute_duals_with(&cb, true);
    }

    fn infeasibility(&self, j: usize) -> f64 {
        let v = self.x[j];
        (self.lower[j] - v).max(v - self.upper[j]).max(0.0)
    }

    fn max_primal_infeasibility(&self) -> f64 {
        self.head
            .iter()
            .map(|&j| self.infeasibility(j))
            .fold(0.0, f64::max)
    }

    fn dual_infeasibility(&self, j: usize) -> f64 {
        let dj = self.d[j];
        match self.status[j] {
            VarStatus::Basic => 0.0,
            _ if self.lower[j] == self.upper[j] => 0.0,
            VarStatus::AtLower => (-dj).max(0.0),
            VarStatus::AtUpper => dj.max(0.0),
            VarStatus::Free => dj.abs(),
        }
    }

    fn max_dual_infeasibility(&self) -> f64 {
        (0..self.status.len())
            .map(|j| self.dual_infeasibility(j))
            .fold(0.0, f64::max)
    }

    /// Moves boxed nonbasics with wrong-signed reduced cost to the other bound.
    fn flip_for_dual_feasibility(&mut self) -> bool {
        let tol = self.params.dual_tol;
        let mut changed = false;
        for j in 0..self.status.len() {
            let (l, u) = (self.lower[j], self.upper[j]);
            if !(l.is_finite() && u.is_finite()) || l == u {
                continue;
            }
            match self.status[j] {
                VarStatus::AtLower if self.d[j] < -tol => {
                    self.status[j] = VarStatus::AtUpper;
                    self.x[j] = u;
                    changed = true;
                }
                VarStatus::AtUpper if self.d[j] > tol => {
                    self.status[j] = VarStatus::AtLower;
                    self.x[j] = l;
                    changed = true;
                }
                _ => {}
            }
        }
        changed
    }

    fn pivot(&mut self, pos: usize, entering: usize, w: &[f64], leaving_status: VarStatus) {
        let leaving = self.head[pos];
        self.status[leaving] = leaving_status;
        self.x[leaving] = nonbasic_value(leaving_status, self.lower[leaving], self.upper[leaving]);
        self.pos_of[leaving] = NONE;
        self.head[pos] = entering;
        self.pos_of[entering] = pos;
        self.status[entering] = VarStatus::Basic;
        self.factor.push_eta(pos, w);
        self.iterations += 1;
        self.total_iterations += 1;
    }

    fn note_step(&mut self, degenerate: bool) {
        if degenerate {
            self.stall += 1;
            if self.stall >= self.params.stall_limit {
                self.bland = true;
            }
        } else {
            self.stall = 0;
            self.bland = false;
        }
    }

    fn maybe_refactor(&mut self) {
        if self.factor.num_etas() >= self.params.refactor_every {
            self.refactor();
            self.compute_primal();
        }
    }

    fn dual_simplex(&mut self) -> Outcome {
        let ptol = self.params.primal_tol;
        let dtol = self.params.dual_tol;
        let piv_tol = self.params.pivot_tol;
        let mut mismatches = 0;
        loop {
            if self.iterations >= self.budget {
                return Outcome::IterLimit;
            }
            self.maybe_refactor();
            self.compute_duals();
            if self.max_dual_infeasibility() > 10.0 * dtol {
                return Outcome::Restart;
            }
            // Leaving row.
            let mut leave = NONE;
            let mut best = ptol;
            for (pos, &j) in self.head.iter().enumerate() {
                let inf = self.infeasibility(j);
                if inf > ptol {
                    if self.bland {
                        if leave == NONE || j < self.head[leave] {
                            leave = pos;
                        }
                    } else if inf > best {
                        best = inf;
                        leave = pos;
                    }
                }
            }
            if leave == NONE {
                return Outcome::Optimal;
            }
            let jl = self.head[leave];
            let below = self.x[jl] < self.lower[jl];
            let mut e = vec![0.0; self.head.len()];
            e[leave] = 1.0;
            let rho = self.factor.btran(&e, &self.cols);

            // Ratio test over nonbasic columns.
            let total = self.status.len();
            let mut cands: Vec<(usize, f64, f64)> = Vec::new();
            for j in 0..total {
                let st = self.status[j];
                if st == VarStatus::Basic || self.lower[j] == self.upper[j] {
                    continue;
                }
                let alpha = if j < self.n {
                    let mut s = 0.0;
                    for &(r, v) in &self.cols[j] {
                        s += rho[r] * v;
                    }
                    s
                } else {
                    -rho[j - self.n]
                };
                if alpha.abs() <= piv_tol {
                    continue;
                }
                // x_leave changes by -alpha * dx_j.
                let up_ok = matches!(st, VarStatus::AtLower | VarStatus::Free);
                let down_ok = matches!(st, VarStatus::AtUpper | VarStatus::Free);
                let eligible = if below {
                    (up_ok && alpha < 0.0) || (down_ok && alpha > 0.0)
                } else {
                    (up_ok && alpha > 0.0) || (down_ok && alpha < 0.0)
                };
                if eligible {
                    let slack = match st {
                        VarStatus::AtLower => self.d[j].max(0.0),
                        VarStatus::AtUpper => (-self.d[j]).max(0.0),
                        _ => self.d[j].abs(),
                    };
                    cands.push((j, alpha, slack));
                }
            }
            if cands.is_empty() {
                return Outcome::Infeasible;
            }
            let entering = if self.bland {
                let tmin = cands
                    .iter()
                    .map(|&(_, a, dj)| dj / a.abs())
                    .fold(f64::INFINITY, f64::min);
                cands
                    .iter()
                    .filter(|&&(_, a, dj)| dj / a.abs() <= tmin + 1e-12 * (1.0 + tmin))
                    .map(|&(j, _, _)| j)
                    .min()
                    .unwrap()
            } else {
                let tmax = cands
                    .iter()
                    .map(|&(_, a, dj)| (dj + dtol) / a.abs())
                    .fold(f64::INFINITY, f64::min);
                let mut pick = NONE;
                let mut pick_alpha = 0.0;
                for &(j, a, dj) in &cands {
                    if dj / a.abs() <= tmax && a.abs() > pick_alpha {
                        pick = j;
                        pick_alpha = a.abs();
                    }
                }
                pick
            };
            let alpha_q = cands.iter().find(|c| c.0 == entering).unwrap().1;
            let dual_step = cands.iter().find(|c| c.0 == entering).unwrap().2 / alpha_q.abs();

            let w = self.factor.ftran(&self.col_dense(entering), &self.cols);
            let wp = w[leave];
            if (wp - alpha_q).abs() > 1e-7 * (1.0 + wp.abs()) || wp.abs() <= piv_tol {
                mismatches += 1;
                if mismatches > 5 {
                    return Outcome::Restart;
                }
                self.refactor();
                self.compute_primal();
                continue;
            }
            let target = if below { self.lower[jl] } else { self.upper[jl] };
            let dx = (self.x[jl] - target) / wp;
            for (pos, &j) in self.head.iter().enumerate() {
                self.x[j] -= w[pos] * dx;
            }
            self.x[entering] += dx;
            let leaving_status = if below {
                VarStatus::AtLower
            } else {
                VarStatus::AtUpper
            };
            self.pivot(leave, entering, &w, leaving_status);
            self.note_step(dual_step <= 1e-12);
        }
    }

    fn primal_simplex(&mut self) -> Outcome {
        let ptol = self.params.primal_tol;
        let dtol = self.params.dual_tol;
        let piv_tol = self.params.pivot_tol;
        loop {
            if self.iterations >= self.budget {
                return Outcome::IterLimit;
            }
            self.maybe_refactor();
            let phase1 = self.max_primal_infeasibility() > ptol;
            if phase1 {
                let cb: Vec<f64> = self
                    .head
                    .iter()
                    .map(|&j| {
                        if self.x[j] < self.lower[j] - ptol {
                            -1.0
                        } else if self.x[j] > self.upper[j] + ptol {
                            1.0
                        } else {
                            0.0
                        }
                    })
                    .collect();
                self.compute_duals_with(&cb, false);
            } else {
                self.compute_duals();
            }

            // Entering column.
            let total = self.status.len();
            let mut entering = NONE;
            let mut best = dtol;
            for j in 0..total {
                let st = self.status[j];
                if st == VarStatus::Basic || self.lower[j] == self.upper[j] {
                    continue;
                }
                let dj = self.d[j];
                let can_up = matches!(st, VarStatus::AtLower | VarStatus::Free);
                let can_down = matches!(st, VarStatus::AtUpper | VarStatus::Free);
                let score = if can_up && dj < -dtol {
                    -dj
                } else if can_down && dj > dtol {
                    dj
                } else {
                    continue;
                };
                if self.bland {
                    entering = j;
                    break;
                }
                if score > best {
                    best = score;
                    entering = j;
                }
            }
            if entering == NONE {
                return if phase1 {
                    Outcome::Infeasible
                } else {
                    Outcome::Optimal
                };
            }
            let dir = if self.d[entering] < 0.0 { 1.0 } else { -1.0 };
            let w = self.factor.ftran(&self.col_dense(entering), &self.cols);

            // Ratio test: basic at position i moves by rate[i] * t.
            let flip_limit = self.upper[entering] - self.lower[entering];
            let mut tmax = if flip_limit.is_finite() {
                flip_limit
            } else {
                f64::INFINITY
            };
            let mut limits: Vec<(usize, f64, f64, bool)> = Vec::new();
            for (pos, &j) in self.head.iter().enumerate() {
                let rate = -dir * w[pos];
                if rate.abs() <= piv_tol {
                    continue;
                }
                let (l, u, xj) = (self.lower[j], self.upper[j], self.x[j]);
                // (exact ratio, relaxed ratio, hits upper?)
                let lim = if phase1 && xj < l - ptol {
                    if rate > 0.0 {
                        Some(((l - xj) / rate, (l - xj) / rate, false))
                    } else {
                        None
                    }
                } else if phase1 && xj > u + ptol {
                    if rate < 0.0 {
                        Some(((u - xj) / rate, (u - xj) / rate, true))
                    } else {
                        None
                    }
                } else if rate > 0.0 && u.is_finite() {
                    Some((((u - xj) / rate).max(0.0), (u - xj + ptol) / rate, true))
                } else if rate < 0.0 && l.is_finite() {
                    Some((((l - xj) / rate).max(0.0), (l - xj - ptol) / rate, false))
                } else {
                    None
                };
                if let Some((exact, relaxed, hits_upper)) = lim {
                    if self.bland {
                        tmax = tmax.min(exact);
                    } else {
                        tmax = tmax.min(relaxed);
                    }
                    limits.push((pos, exact, rate, hits_upper));
                }
            }
            if tmax == f64::INFINITY {
                return if phase1 {
                    // Cannot happen for a bounded phase-1 objective; rebuild and retry.
                    Outcome::Restart
                } else {
                    Outcome::Unbounded
                };
            }
            let mut leave: Option<(usize, f64, bool)> = None;
            if self.bland {
                let mut best_var = NONE;
                for &(pos, exact, _, hu) in &limits {
                    if exact <= tmax + 1e-12 * (1.0 + tmax) && self.head[pos] < best_var {
                        best_var = self.head[pos];
                        leave = Some((pos, exact, hu));
                    }
                }
            } else {
                let mut best_rate = 0.0;
                for &(pos, exact, rate, hu) in &limits {
                    if exact <= tmax && rate.abs() > best_rate {
                        best_rate = rate.abs();
                        leave = Some((pos, exact, hu));
                    }
                }
            }
            let step;
            match leave {
                Some((pos, exact, hits_upper)) if !(flip_limit.is_finite() && flip_limit <= exact) => {
                    step = exact;
                    for (i, &j) in self.head.iter().enumerate() {
                        self.x[j] += -dir * w[i] * step;
                    }
                    self.x[entering] += dir * step;
                    let st = if hits_upper {
                        VarStatus::AtUpper
                    } else {
                        VarStatus::AtLower
                    };
                    self.pivot(pos, entering, &w, st);
                }
                _ => {
                    // Bound flip of the entering variable.
                    step = flip_limit;
                    for (i, &j) in self.head.iter().enumerate() {
                        self.x[j] += -dir * w[i] * step;
                    }
                    let st = if dir > 0.0 {
                        VarStatus::AtUpper
                    } else {
                        VarStatus::AtLower
                    };
                    self.status[entering] = st;
                    self.x[entering] =
                        nonbasic_value(st, self.lower[entering], self.upper[entering]);
                    self.iterations += 1;
                    self.total_iterations += 1;
                }
            }
            self.note_step(step <= 1e-12);
        }
    }

    /// Solves from the current basis.
    pub fn solve(&mut self) -> LpSolution {
        let m = self.head.len();
        self.iterations = 0;
        self.bland = false;
        self.stall = 0;
        self.budget = self
            .params
            .max_iterations
            .unwrap_or(200 * (m + self.n).max(1));
        let mut force_primal = false;
        let mut status = LpStatus::IterLimit;
        for attempt in 0..10 {
            if attempt == 8 {
                // Repeated verification failures: restart cold.
                self.reset_basis();
                force_primal = true;
            }
            self.refactor();
            self.compute_primal();
            self.compute_duals();
            let outcome = if !force_primal {
                if self.flip_for_dual_feasibility() {
                    self.compute_primal();
                }
                if self.max_dual_infeasibility() <= self.params.dual_tol {
                    self.dual_simplex()
                } else {
                    self.primal_simplex()
                }
            } else {
                self.primal_simplex()
            };
            match outcome {
                Outcome::Optimal => {
                    self.refactor();
                    self.compute_primal();
                    self.compute_duals();
                    let pinf = self.max_primal_infeasibility();
                    let dinf = self.max_dual_infeasibility();
                    if pinf <= self.params.primal_tol && dinf <= self.params.dual_tol {
                        status = LpStatus::Optimal;
                        break;
                    }
                    force_primal = pinf <= self.params.primal_tol;
                }
                Outcome::Infeasible => {
                    if force_primal {
                        status = LpStatus::Infeasible;
                        break;
                    }
                    // Confirm with the primal phase 1.
                    force_primal = true;
                }
                Outcome::Unbounded => {
                    status = LpStatus::Unbounded;
                    break;
                }
                Outcome::IterLimit => {
                    status = LpStatus::IterLimit;
                    break;
                }
                Outcome::Restart => {
                    force_primal = true;
                }
            }
        }
        self.solution(status)
    }

    fn solution(&self, status: LpStatus) -> LpSolution {
        let n = self.n;
        let primal = self.x[..n].to_vec();
        let objective = self.obj_constant
            + primal
                .iter()
                .zip(&self.cost)
                .map(|(x, c)| x * c)
                .sum::<f64>();
        LpSolution {
            status,
            primal,
            row_activity: self.x[n..].to_vec(),
            dual: self.y.clone(),
            reduced_costs: self.d.clone(),
            objective,
            basis: self.basis(),
            iterations: self.iterations,
            lower: self.lower.clone(),
            upper: self.upper.clone(),
            obj_constant: self.obj_constant,
            dual_tol: self.params.dual_tol,
        }
    }
}

fn default_status(lower: f64, upper: f64) -> VarStatus {
    if lower.is_finite() {
        VarStatus::AtLower
    } else if upper.is_finite() {
        VarStatus::AtUpper
    } else {
        VarStatus::Free
    }
}

fn nearest_bound_status(x: f64, lower: f64, upper: f64) -> VarStatus {
    match (lower.is_finite(), upper.is_finite()) {
        (true, true) => {
            if (x - lower).abs() <= (upper - x).abs() {
                VarStatus::AtLower
            } else {
                VarStatus::AtUpper
            }
        }
        _ => default_status(lower, upper),
    }
}

fn nonbasic_value(status: VarStatus, lower: f64, upper: f64) -> f64 {
    match status {
        VarStatus::AtLower => lower,
        VarStatus::AtUpper => upper,
        _ => 0.0,
    }
}
