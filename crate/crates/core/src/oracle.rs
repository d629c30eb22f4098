//! Ground truth for small instances, independent of the cutting-plane path.
//!
//! `brute_force` enumerates every opening pattern with exactly `p` open
//! facilities and solves the continuous assignment problem of each with
//! away-step Frank–Wolfe (exact line search, linear minimization by the LP
//! kernel). `grid_check` is a cruder upper-bounding grid search used to
//! sandwich it.

use rayon::prelude::*;
use thiserror::Error;

use crate::ccflp::CcflpInstance;
use crate::lp::{LpError, LpProblem, LpStatus, Simplex};

pub const DEFAULT_TOL: f64 = 1e-7;
pub const MAX_PATTERNS: u128 = 1_000_000;
const MAX_GRID_POINTS: u128 = 50_000_000;
const MAX_FW_ITERS: usize = 200_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("instance too large for the oracle: {0}")]
    TooLarge(String),
    #[error("no opening pattern is capacity-feasible")]
    Infeasible,
    #[error("linear minimization failed: {0}")]
    Lp(#[from] LpError),
    #[error("linear minimization returned {0:?}")]
    LpStatus(LpStatus),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub optimum: f64,
    pub best_y: Vec<bool>,
    pub best_x: Vec<Vec<f64>>,
    pub patterns_evaluated: usize,
    pub tol: f64,
    /// Certified Frank–Wolfe gap of the winning pattern.
    pub gap: f64,
}

/// Minimizer of one fixed-pattern subproblem.
#[derive(Debug, Clone, PartialEq)]
pub struct SubproblemSolution {
    /// Transport plus congestion cost, without opening costs.
    pub value: f64,
    pub x: Vec<Vec<f64>>,
    pub gap: f64,
    pub iterations: usize,
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for t in 0..k {
        acc = acc * (n - t) as u128 / (t + 1) as u128;
        if acc > u128::MAX / 4 {
            return u128::MAX;
        }
    }
    acc
}

/// All `k`-subsets of `0..n` in lexicographic order.
fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k > n {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..k).collect();
    loop {
        out.push(cur.clone());
        let mut i = k;
        while i > 0 && cur[i - 1] == n - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return out;
        }
        cur[i - 1] += 1;
        for t in i..k {
            cur[t] = cur[t - 1] + 1;
        }
    }
}

struct Subproblem<'a> {
    inst: &'a CcflpInstance,
    open: &'a [usize],
}

impl Subproblem<'_> {
    fn n(&self) -> usize {
        self.inst.n_customers * self.open.len()
    }

    fn idx(&self, i: usize, k: usize) -> usize {
        i * self.open.len() + k
    }

    fn loads(&self, x: &[f64]) -> Vec<f64> {
        (0..self.open.len())
            .map(|k| {
                (0..self.inst.n_customers)
                    .map(|i| self.inst.demand[i] * x[self.idx(i, k)])
                    .sum()
            })
            .collect()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let inst = self.inst;
        let loads = self.loads(x);
        let mut total = 0.0;
        for (k, &j) in self.open.iter().enumerate() {
            total += inst.b * loads[k] + inst.a * loads[k] * loads[k];
            for i in 0..inst.n_customers {
                total += inst.demand[i] * inst.unit_cost[i][j] * x[self.idx(i, k)];
            }
        }
        total
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let inst = self.inst;
        let loads = self.loads(x);
        let mut g = vec![0.0; self.n()];
        for i in 0..inst.n_customers {
            for (k, &j) in self.open.iter().enumerate() {
                g[self.idx(i, k)] = inst.demand[i] * (inst.unit_cost[i][j] + inst.b + 2.0 * inst.a * loads[k]);
            }
        }
        g
    }

    /// Curvature `a * sum_k (sum_i d_i dir_ik)^2` along `dir`.
    fn curvature(&self, dir: &[f64]) -> f64 {
        self.loads(dir).iter().map(|l| l * l).sum::<f64>() * self.inst.a
    }

    fn lp(&self) -> LpProblem {
        let inst = self.inst;
        let mut lp = LpProblem::new();
        for _ in 0..self.n() {
            lp.add_col(0.0, 0.0, f64::INFINITY);
        }
        for i in 0..inst.n_customers {
            lp.add_row((0..self.open.len()).map(|k| (self.idx(i, k), 1.0)).collect(), 1.0, 1.0);
        }
        for (k, &j) in self.open.iter().enumerate() {
            let coefs = (0..inst.n_customers)
                .filter(|&i| inst.demand[i] != 0.0)
                .map(|i| (self.idx(i, k), inst.demand[i]))
                .collect();
            lp.add_row(coefs, f64::NEG_INFINITY, inst.capacity[j]);
        }
        lp
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves the continuous subproblem with facilities `open` by away-step
/// Frank–Wolfe. `Ok(None)` when the pattern is capacity-infeasible.
pub fn solve_pattern(inst: &CcflpInstance, open: &[usize], tol: f64) -> Result<Option<SubproblemSolution>, OracleError> {
    let sub = Subproblem { inst, open };
    let n = sub.n();
    let mut lmo = Simplex::new(&sub.lp())?;
    let mut minimize = |g: &[f64]| -> Result<Option<Vec<f64>>, OracleError> {
        lmo.set_costs(g)?;
        let sol = lmo.solve();
        match sol.status {
            LpStatus::Optimal => Ok(Some(sol.primal.iter().map(|v| v.max(0.0)).collect())),
            LpStatus::Infeasible => Ok(None),
            other => Err(OracleError::LpStatus(other)),
        }
    };
    let g0 = sub.gradient(&vec![0.0; n]);
    let Some(start) = minimize(&g0)? else {
        return Ok(None);
    };
    let mut atoms: Vec<(Vec<f64>, f64)> = vec![(start.clone(), 1.0)];
    let mut x = start;
    let mut gap = f64::INFINITY;
    let mut iterations = 0;
    while iterations < MAX_FW_ITERS {
        iterations += 1;
        let g = sub.gradient(&x);
        let s = minimize(&g)?.ok_or(OracleError::LpStatus(LpStatus::Infeasible))?;
        let gx = dot(&g, &x);
        gap = (gx - dot(&g, &s)).max(0.0);
        let value = sub.value(&x);
        if gap <= tol * (1.0 + value.abs()) {
            break;
        }
        let (away_idx, away_val) = atoms
            .iter()
            .enumerate()
            .map(|(k, (a, _))| (k, dot(&g, a)))
            .fold((0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });
        let away_gap = away_val - gx;
        let fw_step = gap >= away_gap || atoms.len() == 1;
        let (dir, gamma_max) = if fw_step {
            (s.iter().zip(&x).map(|(a, b)| a - b).collect::<Vec<_>>(), 1.0)
        } else {
            let w = atoms[away_idx].1;
            let dir = x.iter().zip(&atoms[away_idx].0).map(|(a, b)| a - b).collect::<Vec<_>>();
            (dir, w / (1.0 - w))
        };
        let slope = dot(&g, &dir);
        let curv = sub.curvature(&dir);
        let gamma = if curv > 0.0 {
            (-slope / (2.0 * curv)).min(gamma_max)
        } else {
            gamma_max
        }
        .max(0.0);
        if gamma == 0.0 {
            break;
        }
        for (xi, di) in x.iter_mut().zip(&dir) {
            *xi += gamma * di;
        }
        if fw_step {
            if gamma >= 1.0 {
                atoms = vec![(s, 1.0)];
            } else {
                for atom in atoms.iter_mut() {
                    atom.1 *= 1.0 - gamma;
                }
                match atoms
                    .iter_mut()
                    .find(|(a, _)| a.iter().zip(&s).all(|(p, q)| (p - q).abs() <= 1e-12))
                {
                    Some(atom) => atom.1 += gamma,
                    None => atoms.push((s, gamma)),
                }
            }
        } else {
            for atom in atoms.iter_mut() {
                atom.1 *= 1.0 + gamma;
            }
            atoms[away_idx].1 -= gamma;
            if gamma >= gamma_max || atoms[away_idx].1 <= 1e-15 {
                atoms.remove(away_idx);
            }
        }
    }
    let value = sub.value(&x);
    let mut full = vec![vec![0.0; inst.n_facilities]; inst.n_customers];
    for (i, row) in full.iter_mut().enumerate() {
        for (k, &j) in open.iter().enumerate() {
            row[j] = x[sub.idx(i, k)];
        }
    }
    Ok(Some(SubproblemSolution {
        value,
        x: full,
        gap,
        iterations,
    }))
}

/// Exhaustive search over opening patterns with exactly `p` open facilities.
pub fn brute_force(inst: &CcflpInstance, tol: f64) -> Result<OracleResult, OracleError> {
    let (nj, p) = (inst.n_facilities, inst.p);
    if p == 0 || p > nj {
        return Err(OracleError::Infeasible);
    }
    let count = binomial(nj, p);
    if count > MAX_PATTERNS {
        return Err(OracleError::TooLarge(format!("C({nj}, {p}) = {count} patterns")));
    }
    let total_demand = inst.total_demand();
    let patterns: Vec<Vec<usize>> = combinations(nj, p)
        .into_iter()
        .filter(|open| {
            let cap: f64 = open.iter().map(|&j| inst.capacity[j]).sum();
            cap >= total_demand * (1.0 - 1e-12)
        })
        .collect();
    let solved: Vec<Result<Option<(f64, SubproblemSolution)>, OracleError>> = patterns
        .par_iter()
        .map(|open| {
            let fixed: f64 = open.iter().map(|&j| inst.open_cost[j]).sum();
            Ok(solve_pattern(inst, open, tol)?.map(|s| (fixed + s.value, s)))
        })
        .collect();
    let mut best: Option<(usize, f64, SubproblemSolution)> = None;
    let mut evaluated = 0;
    for (k, r) in solved.into_iter().enumerate() {
        if let Some((total, sol)) = r? {
            evaluated += 1;
            if best.as_ref().is_none_or(|b| total < b.1) {
                best = Some((k, total, sol));
            }
        }
    }
    let (k, optimum, sol) = best.ok_or(OracleError::Infeasible)?;
    let mut best_y = vec![false; nj];
    for &j in &patterns[k] {
        best_y[j] = true;
    }
    Ok(OracleResult {
        optimum,
        best_y,
        best_x: sol.x,
        patterns_evaluated: evaluated,
        tol,
        gap: sol.gap,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridResult {
    /// Best objective over capacity-feasible grid points.
    pub value: f64,
    /// `value - lipschitz_bound` bounds the optimum from below whenever a
    /// grid point next to the optimum is capacity-feasible.
    pub lipschitz_bound: f64,
    pub points_evaluated: u64,
}

/// Compositions of `total` into `parts` nonnegative integers.
fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    if parts == 1 {
        return vec![vec![total]];
    }
    let mut out = Vec::new();
    for first in 0..=total {
        for mut rest in compositions(total - first, parts - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// Exhaustive grid over assignments at resolution `step` for every pattern.
pub fn grid_check(inst: &CcflpInstance, step: f64) -> Result<GridResult, OracleError> {
    let (ni, nj, p) = (inst.n_customers, inst.n_facilities, inst.p);
    if ni > 2 || nj > 3 {
        return Err(OracleError::TooLarge(format!("grid oracle needs |I| <= 2, |J| <= 3, got {ni}x{nj}")));
    }
    if !(step > 0.0 && step <= 1.0) {
        return Err(OracleError::TooLarge(format!("invalid step {step}")));
    }
    let k = (1.0 / step).round().max(1.0) as usize;
    let patterns = combinations(nj, p);
    let per_customer = binomial(k + p - 1, p - 1);
    let total = per_customer.saturating_pow(ni as u32).saturating_mul(patterns.len() as u128);
    if total > MAX_GRID_POINTS {
        return Err(OracleError::TooLarge(format!("{total} grid points")));
    }
    let h = 1.0 / k as f64;
    let total_demand = inst.total_demand();
    let mut best = f64::INFINITY;
    let mut evaluated = 0u64;
    for open in &patterns {
        let fixed: f64 = open.iter().map(|&j| inst.open_cost[j]).sum();
        let comps = compositions(k, p);
        // Odometer over one composition index per customer.
        let mut idx = vec![0usize; ni];
        loop {
            let mut loads = vec![0.0; p];
            let mut transport = 0.0;
            for i in 0..ni {
                for (t, &j) in open.iter().enumerate() {
                    let share = comps[idx[i]][t] as f64 * h;
                    loads[t] += inst.demand[i] * share;
                    transport += inst.demand[i] * inst.unit_cost[i][j] * share;
                }
            }
            let feasible = open.iter().enumerate().all(|(t, &j)| loads[t] <= inst.capacity[j] * (1.0 + 1e-12));
            if feasible {
                evaluated += 1;
                let cong: f64 = loads.iter().map(|l| inst.b * l + inst.a * l * l).sum();
                best = best.min(fixed + transport + cong);
            }
            let mut c = 0;
            loop {
                if c == ni {
                    break;
                }
                idx[c] += 1;
                if idx[c] < comps.len() {
                    break;
                }
                idx[c] = 0;
                c += 1;
            }
            if c == ni {
                break;
            }
        }
    }
    if !best.is_finite() {
        return Err(OracleError::Infeasible);
    }
    let max_load = total_demand;
    let mut lipschitz = 0.0;
    for i in 0..ni {
        for j in 0..nj {
            lipschitz += inst.demand[i] * (inst.unit_cost[i][j] + inst.b + 2.0 * inst.a * max_load.min(inst.capacity[j]));
        }
    }
    Ok(GridResult {
        value: best,
        lipschitz_bound: lipschitz * h,
        points_evaluated: evaluated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ccflp::tests::tiny;

    #[test]
    fn combinations_enumerate() {
        assert_eq!(combinations(4, 2).len(), 6);
        assert_eq!(combinations(3, 3), vec![vec![0, 1, 2]]);
        assert_eq!(combinations(3, 1), vec![vec![0], vec![1], vec![2]]);
        assert_eq!(binomial(10, 3), 120);
    }

    #[test]
    fn tiny_brute_force() {
        let r = brute_force(&tiny(), DEFAULT_TOL).unwrap();
        assert!((r.optimum - 8.0).abs() < 1e-9);
        assert_eq!(r.best_y, vec![true, false]);
        assert_eq!(r.patterns_evaluated, 2);
        assert!(r.gap <= DEFAULT_TOL * 9.0);
    }

    #[test]
    fn all_open_single_pattern() {
        let mut inst = tiny();
        inst.p = 2;
        let r = brute_force(&inst, DEFAULT_TOL).unwrap();
        assert_eq!(r.patterns_evaluated, 1);
    }

    #[test]
    fn no_congestion_closed_form() {
        let inst = CcflpInstance::from_data(
            "transport",
            vec![3.0, 5.0, 2.0],
            vec![100.0, 100.0, 100.0],
            vec![10.0, 20.0, 15.0],
            vec![vec![0.1, 0.5, 0.3], vec![0.4, 0.2, 0.6], vec![0.9, 0.8, 0.05]],
            0.0,
            0.0,
            2,
        )
        .unwrap();
        let r = brute_force(&inst, DEFAULT_TOL).unwrap();
        let mut expected = f64::INFINITY;
        for open in combinations(3, 2) {
            let f: f64 = open.iter().map(|&j| inst.open_cost[j]).sum();
            let t: f64 = (0..3)
                .map(|i| inst.demand[i] * open.iter().map(|&j| inst.unit_cost[i][j]).fold(f64::INFINITY, f64::min))
                .sum();
            expected = expected.min(f + t);
        }
        assert!((r.optimum - expected).abs() < 1e-9, "{} vs {expected}", r.optimum);
    }

    #[test]
    fn infeasible_and_too_large() {
        let inst = CcflpInstance::from_data("inf", vec![10.0], vec![8.0, 8.0], vec![1.0, 1.0], vec![vec![0.1, 0.1]], 0.01, 0.1, 1)
            .unwrap();
        assert_eq!(brute_force(&inst, DEFAULT_TOL), Err(OracleError::Infeasible));
        let big = crate::ccflp::generate_instance(1, &crate::ccflp::GeneratorParams::new(2, 40, 5.0, 0.5)).unwrap();
        assert!(matches!(brute_force(&big, DEFAULT_TOL), Err(OracleError::TooLarge(_))));
        assert!(matches!(grid_check(&big, 0.1), Err(OracleError::TooLarge(_))));
    }

    #[test]
    fn tiny_grid() {
        let g = grid_check(&tiny(), 1e-3).unwrap();
        assert!((g.value - 8.0).abs() < 1e-2);
        assert!((g.value - 8.0).abs() < 1e-12);
    }

    #[test]
    fn grid_refinement_and_sandwich() {
        let inst = CcflpInstance::from_data(
            "grid",
            vec![6.0, 9.0],
            vec![30.0, 30.0, 30.0],
            vec![4.0, 5.0, 6.0],
            vec![vec![0.3, 0.1, 0.4], vec![0.2, 0.5, 0.1]],
            0.05,
            0.2,
            2,
        )
        .unwrap();
        let coarse = grid_check(&inst, 0.02).unwrap();
        let fine = grid_check(&inst, 0.01).unwrap();
        assert!(fine.value <= coarse.value + 1e-12);
        let exact = brute_force(&inst, DEFAULT_TOL).unwrap().optimum;
        assert!(exact <= fine.value + 1e-9);
        assert!(exact >= fine.value - fine.lipschitz_bound);
    }

    #[test]
    fn continuous_split_matches_calculus() {
        // one customer, two open facilities, equal costs: split evenly
        let inst = CcflpInstance::from_data("split", vec![10.0], vec![20.0, 20.0], vec![0.0, 0.0], vec![vec![0.1, 0.1]], 0.5, 0.0, 2)
            .unwrap();
        let sol = solve_pattern(&inst, &[0, 1], 1e-10).unwrap().unwrap();
        assert!((sol.x[0][0] - 0.5).abs() < 1e-5);
        // 10*0.1 + 0.5*(25 + 25)
        assert!((sol.value - 26.0).abs() < 1e-8);
    }
}
