//! Outer approximation of rotated cones by linear cuts.
//!
//! Two families are separated for a cone `v^2 <= z*y`:
//!
//! * SOC linearization at `(z', y', v')` with `g = ||(2v', z'-y')||`:
//!   `4 v' v + (z'-y')(z-y) <= g (z+y)`;
//! * perspective tangent at slope point `w = v'/y'`: `z >= 2 w v - w^2 y`.
//!
//! Cuts are stored normalized to unit Euclidean coefficient norm.

use crate::lp::{LpError, LpProblem, LpRow, LpSolution, LpStatus, Simplex};
use crate::model::{LinConstraint, LinExpr, Model, RotatedCone, RowTag, Sense};

/// Minimum violation for a cut to be returned.
pub const TOL_SEP: f64 = 1e-7;
/// Cone residual at which a relaxation counts as converged.
pub const CONE_TOL: f64 = 1e-6;
pub const ROUND_LIMIT: usize = 200;

const DEDUP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CutFamily {
    SocLinearization,
    Perspective,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cut {
    /// Homogeneous row `cz z + cy y + cv v <= 0`.
    pub row: LinConstraint,
    pub family: CutFamily,
    pub cone_index: usize,
    pub generation_point: (f64, f64, f64),
    coefs: [f64; 3],
}

impl Cut {
    fn new(cone: &RotatedCone, cone_index: usize, family: CutFamily, raw: [f64; 3], at: (f64, f64, f64)) -> Self {
        let norm = (raw[0] * raw[0] + raw[1] * raw[1] + raw[2] * raw[2]).sqrt();
        let coefs = [raw[0] / norm, raw[1] / norm, raw[2] / norm];
        let tag = match family {
            CutFamily::SocLinearization => RowTag::SocCut,
            CutFamily::Perspective => RowTag::PerspectiveCut,
        };
        let expr = LinExpr::from_terms([(cone.z, coefs[0]), (cone.y, coefs[1]), (cone.v, coefs[2])]);
        Cut {
            row: LinConstraint::new(expr, Sense::Le, 0.0).tagged(tag),
            family,
            cone_index,
            generation_point: at,
            coefs,
        }
    }

    /// Normalized coefficients on `(z, y, v)`.
    pub fn coefficients(&self) -> [f64; 3] {
        self.coefs
    }

    /// Positive part of `cz z + cy y + cv v` at a cone triple.
    pub fn violation_at(&self, z: f64, y: f64, v: f64) -> f64 {
        (self.coefs[0] * z + self.coefs[1] * y + self.coefs[2] * v).max(0.0)
    }

    pub fn lp_row(&self) -> LpRow {
        LpRow::from_constraint(&self.row)
    }
}

fn triple(cone: &RotatedCone, point: &[f64]) -> (f64, f64, f64) {
    (point[cone.z.index()], point[cone.y.index()], point[cone.v.index()])
}

/// Supporting hyperplane of the cone at the projection direction of `point`,
/// or `None` when the point is within `TOL_SEP` of the cone or at the origin.
pub fn separate_soc(cone: &RotatedCone, cone_index: usize, point: &[f64]) -> Option<Cut> {
    let (z, y, v) = triple(cone, point);
    let g = (2.0 * v).hypot(z - y);
    if g == 0.0 || g <= (z + y) + TOL_SEP {
        return None;
    }
    // 4v' v + (z'-y') z - (z'-y') y - g z - g y <= 0
    let raw = [(z - y) - g, -(z - y) - g, 4.0 * v];
    Some(Cut::new(cone, cone_index, CutFamily::SocLinearization, raw, (z, y, v)))
}

/// Perspective tangent `z >= 2 w v - w^2 y` at `w = v'/y'` clamped to
/// `[0, v_upper]`, when it is violated by more than `TOL_SEP`.
pub fn separate_perspective(cone: &RotatedCone, cone_index: usize, point: &[f64], v_upper: f64) -> Option<Cut> {
    let (z, y, v) = triple(cone, point);
    let w = (v / y.max(1e-9)).clamp(0.0, v_upper.max(0.0));
    let violation = 2.0 * w * v - w * w * y - z;
    if !(violation > TOL_SEP) {
        return None;
    }
    let raw = [-1.0, -w * w, 2.0 * w];
    Some(Cut::new(cone, cone_index, CutFamily::Perspective, raw, (z, y, v)))
}

/// Accumulated cuts, deduplicated per cone on normalized coefficients.
#[derive(Debug, Clone, Default)]
pub struct CutPool {
    cuts: Vec<Cut>,
    by_cone: Vec<Vec<usize>>,
}

impl CutPool {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.cuts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cuts.is_empty()
    }

    pub fn cuts(&self) -> &[Cut] {
        &self.cuts
    }

    pub fn contains(&self, cut: &Cut) -> bool {
        self.by_cone.get(cut.cone_index).is_some_and(|ids| {
            ids.iter().any(|&k| {
                let c = &self.cuts[k].coefs;
                (0..3).all(|t| (c[t] - cut.coefs[t]).abs() <= DEDUP_TOL)
            })
        })
    }

    /// Adds `cut` unless an equal one exists; returns whether it was added.
    pub fn insert(&mut self, cut: Cut) -> bool {
        if self.contains(&cut) {
            return false;
        }
        if self.by_cone.len() <= cut.cone_index {
            self.by_cone.resize(cut.cone_index + 1, Vec::new());
        }
        self.by_cone[cut.cone_index].push(self.cuts.len());
        self.cuts.push(cut);
        true
    }
}

/// Result of a cutting-plane loop.
#[derive(Debug, Clone)]
pub struct ConvergeOutcome {
    pub solution: LpSolution,
    pub rounds: usize,
    pub max_residual: f64,
    /// Nonempty residual remains after `round_limit` rounds.
    pub hit_round_limit: bool,
    /// Objective after each LP solve.
    pub objectives: Vec<f64>,
}

impl ConvergeOutcome {
    pub fn converged(&self, cone_tol: f64) -> bool {
        self.solution.status == LpStatus::Optimal && self.max_residual <= cone_tol
    }
}

/// LP relaxation of a conic model with its cut pool. Cuts added to the
/// pool are also appended to the LP.
#[derive(Debug, Clone)]
pub struct OaRelaxation {
    pub simplex: Simplex,
    pub pool: CutPool,
    cones: Vec<RotatedCone>,
    v_upper: Vec<f64>,
}

impl OaRelaxation {
    pub fn new(model: &Model) -> Result<Self, LpError> {
        let lp = LpProblem::from_model(model);
        let simplex = Simplex::new(&lp)?;
        let cones = model.cones().to_vec();
        let v_upper = cones.iter().map(|c| model.var(c.v).upper).collect();
        Ok(OaRelaxation {
            simplex,
            pool: CutPool::new(),
            cones,
            v_upper,
        })
    }

    pub fn cones(&self) -> &[RotatedCone] {
        &self.cones
    }

    pub fn max_residual(&self, point: &[f64]) -> f64 {
        self.cones
            .iter()
            .map(|c| c.residual(point))
            .fold(0.0, f64::max)
    }

    /// One separation round at `point`; returns the number of new cuts.
    pub fn separate(&mut self, point: &[f64], cone_tol: f64) -> usize {
        let mut rows = Vec::new();
        for (k, cone) in self.cones.iter().enumerate() {
            if cone.residual(point) <= cone_tol {
                continue;
            }
            let soc = separate_soc(cone, k, point);
            let persp = separate_perspective(cone, k, point, self.v_upper[k]);
            for cut in [soc, persp].into_iter().flatten() {
                let row = cut.lp_row();
                if self.pool.insert(cut) {
                    rows.push(row);
                }
            }
        }
        let added = rows.len();
        if added > 0 {
            self.simplex
                .add_rows(&rows)
                .expect("cut rows reference model columns");
        }
        added
    }

    pub fn solve(&mut self) -> LpSolution {
        self.simplex.solve()
    }

    /// One LP solve, one separation round, and a re-solve if cuts were added.
    pub fn single_round(&mut self, cone_tol: f64) -> ConvergeOutcome {
        let first = self.solve();
        let mut objectives = vec![first.objective];
        if first.status != LpStatus::Optimal {
            return ConvergeOutcome {
                solution: first,
                rounds: 1,
                max_residual: f64::INFINITY,
                hit_round_limit: false,
                objectives,
            };
        }
        let added = self.separate(&first.primal, cone_tol);
        let solution = if added > 0 { self.solve() } else { first };
        objectives.push(solution.objective);
        let max_residual = if solution.status == LpStatus::Optimal {
            self.max_residual(&solution.primal)
        } else {
            f64::INFINITY
        };
        ConvergeOutcome {
            solution,
            rounds: 1,
            max_residual,
            hit_round_limit: false,
            objectives,
        }
    }

    /// Repeats solve and separate until the cone residual is at most
    /// `cone_tol`, no new cut is found, or `round_limit` rounds ran.
    pub fn converge(&mut self, cone_tol: f64, round_limit: usize) -> ConvergeOutcome {
        let mut objectives = Vec::new();
        let mut rounds = 0;
        loop {
            let sol = self.solve();
            rounds += 1;
            objectives.push(sol.objective);
            if sol.status != LpStatus::Optimal {
                return ConvergeOutcome {
                    solution: sol,
                    rounds,
                    max_residual: f64::INFINITY,
                    hit_round_limit: false,
                    objectives,
                };
            }
            let residual = self.max_residual(&sol.primal);
            let done = residual <= cone_tol;
            if done || rounds >= round_limit || self.separate(&sol.primal, cone_tol) == 0 {
                return ConvergeOutcome {
                    solution: sol,
                    rounds,
                    max_residual: residual,
                    hit_round_limit: !done && rounds >= round_limit,
                    objectives,
                };
            }
        }
    }
}

/// Converged cutting-plane relaxation of `model` with default tolerances
/// applied to a fresh LP context.
pub fn converge_relaxation(model: &Model, cone_tol: f64, round_limit: usize) -> Result<(ConvergeOutcome, CutPool), LpError> {
    let mut relax = OaRelaxation::new(model)?;
    let out = relax.converge(cone_tol, round_limit);
    Ok((out, relax.pool))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{VarId, VarKind};

    fn cone() -> RotatedCone {
        RotatedCone {
            z: VarId(0),
            y: VarId(1),
            v: VarId(2),
        }
    }

    fn assert_proportional(cut: &Cut, raw: [f64; 3]) {
        let n = (raw[0] * raw[0] + raw[1] * raw[1] + raw[2] * raw[2]).sqrt();
        let c = cut.coefficients();
        for t in 0..3 {
            assert!((c[t] - raw[t] / n).abs() < 1e-12, "{c:?} vs {raw:?}");
        }
    }

    #[test]
    fn soc_cut_at_infeasible_point() {
        let cut = separate_soc(&cone(), 0, &[1.0, 1.0, 2.0]).unwrap();
        // 8v <= 4(z+y), i.e. 2v <= z + y
        assert_proportional(&cut, [-1.0, -1.0, 2.0]);
        assert_eq!(cut.family, CutFamily::SocLinearization);
        let unnormalized = 2.0 * 2.0 - 1.0 - 1.0;
        let scale = 6f64.sqrt();
        assert!((cut.violation_at(1.0, 1.0, 2.0) * scale - unnormalized).abs() < 1e-12);
    }

    #[test]
    fn soc_none_on_boundary_and_origin() {
        assert!(separate_soc(&cone(), 0, &[2.0, 2.0, 2.0]).is_none());
        assert!(separate_soc(&cone(), 0, &[0.0, 0.0, 0.0]).is_none());
    }

    #[test]
    fn perspective_tangent_point() {
        // slope 3 from (z, y, v) = (0, 1, 3)
        let cut = separate_perspective(&cone(), 0, &[0.0, 1.0, 3.0], 100.0).unwrap();
        assert_proportional(&cut, [-1.0, -9.0, 6.0]);
        assert!(cut.violation_at(9.0, 1.0, 3.0) < 1e-15);
        let c = cut.coefficients();
        assert!((c[0] * 9.0 + c[1] * 1.0 + c[2] * 3.0).abs() < 1e-12);
    }

    #[test]
    fn perspective_violation_amount() {
        let cut = separate_perspective(&cone(), 0, &[0.0, 0.5, 1.0], 100.0).unwrap();
        assert_proportional(&cut, [-1.0, -4.0, 4.0]);
        let scale = 33f64.sqrt();
        assert!((cut.violation_at(0.0, 0.5, 1.0) * scale - 2.0).abs() < 1e-12);
        assert!(separate_perspective(&cone(), 0, &[1.0, 1.0, 1.0], 100.0).is_none());
    }

    #[test]
    fn perspective_slope_clamped() {
        let cut = separate_perspective(&cone(), 0, &[0.0, 0.0, 1.0], 5.0).unwrap();
        assert_proportional(&cut, [-1.0, -25.0, 10.0]);
    }

    #[test]
    fn pool_deduplicates() {
        let mut pool = CutPool::new();
        let a = separate_soc(&cone(), 0, &[1.0, 1.0, 2.0]).unwrap();
        let b = separate_soc(&cone(), 0, &[1.0, 1.0, 2.0]).unwrap();
        assert!(pool.insert(a));
        assert!(!pool.insert(b));
        // same direction, scaled point
        let c = separate_soc(&cone(), 0, &[2.0, 2.0, 4.0]).unwrap();
        assert!(!pool.insert(c));
        let other_cone = separate_soc(&cone(), 1, &[1.0, 1.0, 2.0]).unwrap();
        assert!(pool.insert(other_cone));
        assert_eq!(pool.len(), 2);
    }

    #[test]
    fn no_cones_single_round() {
        let mut m = Model::new();
        let x = m.add_var(VarKind::Continuous, 0.0, 4.0, "x").unwrap();
        m.set_objective(LinExpr::new().with_term(x, -1.0)).unwrap();
        let (out, pool) = converge_relaxation(&m, CONE_TOL, ROUND_LIMIT).unwrap();
        assert_eq!(out.rounds, 1);
        assert!(pool.is_empty());
        assert!((out.solution.objective + 4.0).abs() < 1e-12);
    }

    #[test]
    fn single_cone_converges_to_analytic_optimum() {
        let mut m = Model::new();
        let z = m.add_var(VarKind::Continuous, 0.0, f64::INFINITY, "z").unwrap();
        let y = m.add_var(VarKind::Continuous, 1.0, 1.0, "y").unwrap();
        let v = m.add_var(VarKind::Continuous, 3.0, 3.0, "v").unwrap();
        m.add_cone(RotatedCone { z, y, v }).unwrap();
        m.set_objective(LinExpr::new().with_term(z, 1.0)).unwrap();
        let (out, _) = converge_relaxation(&m, 1e-6, ROUND_LIMIT).unwrap();
        assert!(out.converged(1e-6));
        assert!(out.rounds <= 60, "rounds {}", out.rounds);
        assert!((out.solution.objective - 9.0).abs() < 1e-5);
        for w in out.objectives.windows(2) {
            assert!(w[1] >= w[0] - 1e-8);
        }
    }
}
