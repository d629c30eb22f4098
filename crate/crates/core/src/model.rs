//! In-memory mixed-integer conic program: linear rows, 3-dimensional rotated
//! cones `v^2 <= z*y`, and a linear objective to minimize.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid bounds [{lower}, {upper}] for variable `{name}`")]
    Bounds { name: String, lower: f64, upper: f64 },
    #[error("point has {got} entries, model has {expected} variables")]
    Dimension { expected: usize, got: usize },
    #[error("unknown variable id {0}")]
    UnknownVar(usize),
    #[error("cone references variable {0} more than once")]
    DuplicateConeVar(usize),
    #[error("constraint `{0}` has a non-finite right-hand side")]
    NonFiniteRhs(String),
    #[error("non-finite coefficient on variable {0}")]
    NonFiniteCoef(usize),
}

/// Dense variable index, stable once created.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

impl VarId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarDef {
    pub id: VarId,
    pub kind: VarKind,
    pub lower: f64,
    /// `f64::INFINITY` when unbounded above.
    pub upper: f64,
    pub name: String,
}

/// Sparse affine expression. Zero coefficients are never stored.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinExpr {
    terms: BTreeMap<VarId, f64>,
    pub constant: f64,
}

impl LinExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn constant(value: f64) -> Self {
        LinExpr {
            terms: BTreeMap::new(),
            constant: value,
        }
    }

    pub fn from_terms<I: IntoIterator<Item = (VarId, f64)>>(terms: I) -> Self {
        let mut e = LinExpr::new();
        for (v, c) in terms {
            e.add_term(v, c);
        }
        e
    }

    /// Adds `coef * var`, merging with an existing term.
    pub fn add_term(&mut self, var: VarId, coef: f64) -> &mut Self {
        let entry = self.terms.entry(var).or_insert(0.0);
        *entry += coef;
        if *entry == 0.0 {
            self.terms.remove(&var);
        }
        self
    }

    pub fn with_term(mut self, var: VarId, coef: f64) -> Self {
        self.add_term(var, coef);
        self
    }

    pub fn terms(&self) -> impl Iterator<Item = (VarId, f64)> + '_ {
        self.terms.iter().map(|(&v, &c)| (v, c))
    }

    pub fn coef(&self, var: VarId) -> f64 {
        self.terms.get(&var).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Value at `values`, indexed by `VarId`. Caller guarantees the length.
    pub fn eval(&self, values: &[f64]) -> f64 {
        self.terms
            .iter()
            .fold(self.constant, |acc, (v, c)| acc + c * values[v.0])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        })
    }
}

/// Where a row came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RowTag {
    Model,
    SocCut,
    PerspectiveCut,
    Branching,
}

impl fmt::Display for RowTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RowTag::Model => "model",
            RowTag::SocCut => "soc_cut",
            RowTag::PerspectiveCut => "perspective_cut",
            RowTag::Branching => "branching",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinConstraint {
    pub expr: LinExpr,
    pub sense: Sense,
    pub rhs: f64,
    pub tag: RowTag,
    pub name: String,
}

impl LinConstraint {
    pub fn new(expr: LinExpr, sense: Sense, rhs: f64) -> Self {
        LinConstraint {
            expr,
            sense,
            rhs,
            tag: RowTag::Model,
            name: String::new(),
        }
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn tagged(mut self, tag: RowTag) -> Self {
        self.tag = tag;
        self
    }

    /// Amount by which the row is violated at `values` (0 when satisfied).
    pub fn violation(&self, values: &[f64]) -> f64 {
        let lhs = self.expr.eval(values);
        match self.sense {
            Sense::Le => (lhs - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - lhs).max(0.0),
            Sense::Eq => (lhs - self.rhs).abs(),
        }
    }

    /// Row bounds `lo <= sum(coef * var) <= hi`, with the constant folded in.
    pub fn row_bounds(&self) -> (f64, f64) {
        let rhs = self.rhs - self.expr.constant;
        match self.sense {
            Sense::Le => (f64::NEG_INFINITY, rhs),
            Sense::Ge => (rhs, f64::INFINITY),
            Sense::Eq => (rhs, rhs),
        }
    }
}

/// `v^2 <= z * y`, `z >= 0`, `y >= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RotatedCone {
    pub z: VarId,
    pub y: VarId,
    pub v: VarId,
}

impl RotatedCone {
    /// SOC-form residual `max(||(2v, z-y)|| - (z+y), -z, -y, 0)`.
    pub fn residual(&self, values: &[f64]) -> f64 {
        cone_residual(values[self.z.0], values[self.y.0], values[self.v.0])
    }
}

pub fn cone_residual(z: f64, y: f64, v: f64) -> f64 {
    let soc = (2.0 * v).hypot(z - y) - (z + y);
    soc.max(-z).max(-y).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeasReport {
    /// Largest violation over linear rows and variable bounds.
    pub max_lin_violation: f64,
    pub max_cone_violation: f64,
    pub max_int_violation: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub values: Vec<f64>,
}

impl Point {
    pub fn new(values: Vec<f64>) -> Self {
        Point { values }
    }

    pub fn zeros(n: usize) -> Self {
        Point {
            values: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, v: VarId) -> f64 {
        self.values[v.0]
    }

    pub fn set(&mut self, v: VarId, value: f64) {
        self.values[v.0] = value;
    }
}

/// A mixed-integer program over rotated cones. Append-only; minimization.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Model {
    vars: Vec<VarDef>,
    lin: Vec<LinConstraint>,
    cones: Vec<RotatedCone>,
    objective: LinExpr,
}

impl Model {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(
        &mut self,
        kind: VarKind,
        lower: f64,
        upper: f64,
        name: impl Into<String>,
    ) -> Result<VarId, ModelError> {
        let name = name.into();
        let bad = lower.is_nan()
            || upper.is_nan()
            || lower > upper
            || lower == f64::INFINITY
            || upper == f64::NEG_INFINITY
            || (kind == VarKind::Binary && (lower < 0.0 || upper > 1.0));
        if bad {
            return Err(ModelError::Bounds { name, lower, upper });
        }
        let id = VarId(self.vars.len());
        self.vars.push(VarDef {
            id,
            kind,
            lower,
            upper,
            name,
        });
        Ok(id)
    }

    fn check_expr(&self, expr: &LinExpr) -> Result<(), ModelError> {
        for (v, c) in expr.terms() {
            if v.0 >= self.vars.len() {
                return Err(ModelError::UnknownVar(v.0));
            }
            if !c.is_finite() {
                return Err(ModelError::NonFiniteCoef(v.0));
            }
        }
        Ok(())
    }

    pub fn add_constraint(&mut self, row: LinConstraint) -> Result<usize, ModelError> {
        self.check_expr(&row.expr)?;
        if !row.rhs.is_finite() || !row.expr.constant.is_finite() {
            return Err(ModelError::NonFiniteRhs(row.name));
        }
        self.lin.push(row);
        Ok(self.lin.len() - 1)
    }

    pub fn add_cone(&mut self, cone: RotatedCone) -> Result<usize, ModelError> {
        for v in [cone.z, cone.y, cone.v] {
            if v.0 >= self.vars.len() {
                return Err(ModelError::UnknownVar(v.0));
            }
        }
        if cone.z == cone.y || cone.z == cone.v {
            return Err(ModelError::DuplicateConeVar(cone.z.0));
        }
        if cone.y == cone.v {
            return Err(ModelError::DuplicateConeVar(cone.y.0));
        }
        self.cones.push(cone);
        Ok(self.cones.len() - 1)
    }

    pub fn set_objective(&mut self, objective: LinExpr) -> Result<(), ModelError> {
        self.check_expr(&objective)?;
        self.objective = objective;
        Ok(())
    }

    pub fn vars(&self) -> &[VarDef] {
        &self.vars
    }

    pub fn var(&self, id: VarId) -> &VarDef {
        &self.vars[id.0]
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn constraints(&self) -> &[LinConstraint] {
        &self.lin
    }

    pub fn cones(&self) -> &[RotatedCone] {
        &self.cones
    }

    pub fn objective(&self) -> &LinExpr {
        &self.objective
    }

    /// Copy of the model with one variable's bounds replaced.
    pub fn with_bounds(&self, id: VarId, lower: f64, upper: f64) -> Result<Model, ModelError> {
        let def = self.vars.get(id.0).ok_or(ModelError::UnknownVar(id.0))?;
        if lower.is_nan() || upper.is_nan() || lower > upper {
            return Err(ModelError::Bounds {
                name: def.name.clone(),
                lower,
                upper,
            });
        }
        let mut m = self.clone();
        m.vars[id.0].lower = lower;
        m.vars[id.0].upper = upper;
        Ok(m)
    }

    fn check_len(&self, point: &Point) -> Result<(), ModelError> {
        if point.len() != self.vars.len() {
            return Err(ModelError::Dimension {
                expected: self.vars.len(),
                got: point.len(),
            });
        }
        Ok(())
    }

    pub fn evaluate_objective(&self, point: &Point) -> Result<f64, ModelError> {
        self.check_len(point)?;
        Ok(self.objective.eval(&point.values))
    }

    pub fn check_point(
        &self,
        point: &Point,
        feas_tol: f64,
        int_tol: f64,
    ) -> Result<FeasReport, ModelError> {
        self.check_len(point)?;
        let x = &point.values;
        let mut lin = 0.0f64;
        let mut int = 0.0f64;
        for def in &self.vars {
            let val = x[def.id.0];
            lin = lin.max(def.lower - val).max(val - def.upper);
            if def.kind == VarKind::Binary {
                int = int.max(val.abs().min((val - 1.0).abs()));
            }
        }
        for row in &self.lin {
            lin = lin.max(row.violation(x));
        }
        let cone = self
            .cones
            .iter()
            .map(|c| c.residual(x))
            .fold(0.0f64, f64::max);
        // NaN anywhere makes the point infeasible.
        let finite = x.iter().all(|v| v.is_finite());
        Ok(FeasReport {
            max_lin_violation: lin,
            max_cone_violation: cone,
            max_int_violation: int,
            feasible: finite && lin <= feas_tol && cone <= feas_tol && int <= int_tol,
        })
    }
}
