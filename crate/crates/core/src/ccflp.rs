//! Congested capacitated facility location: instance data, a seeded
//! generator, and builders for the perspective and natural formulations.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    LinConstraint, LinExpr, Model, ModelError, Point, RotatedCone, Sense, VarId, VarKind,
};
use crate::rng::SplitMix64;

pub const DEFAULT_CONGESTION_A: f64 = 0.0075;
pub const DEFAULT_CONGESTION_B: f64 = 0.5;

/// Capacity shortfall when the `p` largest facilities cannot serve demand.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InfeasibleReason {
    pub deficit: f64,
}

#[derive(Debug, Error)]
pub enum CcflpError {
    #[error("invalid generator parameters: {0}")]
    Param(String),
    #[error("malformed instance: {0}")]
    Shape(String),
    #[error("instance is capacity-infeasible (deficit {})", .0.deficit)]
    Infeasible(InfeasibleReason),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("instance json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CcflpInstance {
    pub id: String,
    pub n_customers: usize,
    pub n_facilities: usize,
    pub p: usize,
    pub a: f64,
    pub b: f64,
    pub r: f64,
    pub pi: f64,
    pub seed: u64,
    pub demand: Vec<f64>,
    pub capacity: Vec<f64>,
    pub open_cost: Vec<f64>,
    /// `unit_cost[i][j]`: cost per unit of customer `i`'s demand served by `j`.
    pub unit_cost: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorParams {
    pub n_customers: usize,
    pub n_facilities: usize,
    /// Total capacity over total demand.
    pub ratio: f64,
    /// Fraction of facilities to open, `p = floor(pi * n_facilities)`.
    pub pi: f64,
    pub a: f64,
    pub b: f64,
}

impl GeneratorParams {
    pub fn new(n_customers: usize, n_facilities: usize, ratio: f64, pi: f64) -> Self {
        GeneratorParams {
            n_customers,
            n_facilities,
            ratio,
            pi,
            a: DEFAULT_CONGESTION_A,
            b: DEFAULT_CONGESTION_B,
        }
    }
}

/// `floor(pi * n)`, robust to products like `0.6 * 5 = 2.9999999999999996`.
pub fn open_count(pi: f64, n_facilities: usize) -> usize {
    (pi * n_facilities as f64 + 1e-9).floor() as usize
}

/// Samples an instance. Draw order: customer coordinates, facility
/// coordinates (both uniform on `[0,100]^2`), integer demands in `[1,100]`,
/// integer opening costs in `[500,1500]`, raw capacities uniform in `[1,2]`.
/// Unit costs are Euclidean distances divided by 100; capacities are scaled
/// so their total is `ratio` times total demand.
pub fn generate_instance(seed: u64, params: &GeneratorParams) -> Result<CcflpInstance, CcflpError> {
    let GeneratorParams {
        n_customers,
        n_facilities,
        ratio,
        pi,
        a,
        b,
    } = *params;
    if !(ratio >= 1.0 && ratio.is_finite()) {
        return Err(CcflpError::Param(format!("ratio {ratio} must be >= 1")));
    }
    if !(pi > 0.0 && pi <= 1.0) {
        return Err(CcflpError::Param(format!("pi {pi} must lie in (0, 1]")));
    }
    if n_customers == 0 || n_facilities == 0 {
        return Err(CcflpError::Param("need at least one customer and facility".into()));
    }
    let p = open_count(pi, n_facilities);
    if p < 1 {
        return Err(CcflpError::Param(format!(
            "pi * n_facilities = {} opens no facility",
            pi * n_facilities as f64
        )));
    }
    if !(a >= 0.0 && b >= 0.0 && a.is_finite() && b.is_finite()) {
        return Err(CcflpError::Param("congestion coefficients must be >= 0".into()));
    }
    let mut rng = SplitMix64::new(seed);
    let customers: Vec<(f64, f64)> = (0..n_customers)
        .map(|_| (rng.uniform(0.0, 100.0), rng.uniform(0.0, 100.0)))
        .collect();
    let facilities: Vec<(f64, f64)> = (0..n_facilities)
        .map(|_| (rng.uniform(0.0, 100.0), rng.uniform(0.0, 100.0)))
        .collect();
    let demand: Vec<f64> = (0..n_customers).map(|_| rng.int_in(1, 100) as f64).collect();
    let open_cost: Vec<f64> = (0..n_facilities)
        .map(|_| rng.int_in(500, 1500) as f64)
        .collect();
    let raw: Vec<f64> = (0..n_facilities).map(|_| rng.uniform(1.0, 2.0)).collect();
    let total_demand: f64 = demand.iter().sum();
    let raw_total: f64 = raw.iter().sum();
    let scale = ratio * total_demand / raw_total;
    let capacity: Vec<f64> = raw.iter().map(|u| u * scale).collect();
    let unit_cost = customers
        .iter()
        .map(|&(cx, cy)| {
            facilities
                .iter()
                .map(|&(fx, fy)| (cx - fx).hypot(cy - fy) / 100.0)
                .collect()
        })
        .collect();
    Ok(CcflpInstance {
        id: format!("ccflp-{n_customers}x{n_facilities}-r{ratio}-pi{pi}-s{seed}"),
        n_customers,
        n_facilities,
        p,
        a,
        b,
        r: ratio,
        pi,
        seed,
        demand,
        capacity,
        open_cost,
        unit_cost,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormulationKind {
    Perspective,
    Natural,
}

impl FormulationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FormulationKind::Perspective => "perspective",
            FormulationKind::Natural => "natural",
        }
    }
}

impl std::str::FromStr for FormulationKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "perspective" => Ok(FormulationKind::Perspective),
            "natural" => Ok(FormulationKind::Natural),
            other => Err(format!("unknown formulation `{other}`")),
        }
    }
}

/// Variable ids of a built CCFLP model.
#[derive(Debug, Clone, PartialEq)]
pub struct VarMap {
    pub kind: FormulationKind,
    /// `x[i][j]`.
    pub x: Vec<Vec<VarId>>,
    pub y: Vec<VarId>,
    pub v: Vec<VarId>,
    /// Absent when the quadratic congestion coefficient is zero.
    pub z: Option<Vec<VarId>>,
    /// Unit variable of the natural formulation.
    pub one: Option<VarId>,
    /// Number of facilities to open.
    pub p_open: usize,
}

impl VarMap {
    /// Full model point for an assignment `x` and opening pattern `y`, with
    /// loads and epigraph variables at their tightest values.
    pub fn point_from(&self, model: &Model, instance: &CcflpInstance, x: &[Vec<f64>], y: &[f64]) -> Point {
        let mut pt = Point::zeros(model.num_vars());
        for (i, row) in self.x.iter().enumerate() {
            for (j, &id) in row.iter().enumerate() {
                pt.set(id, x[i][j]);
            }
        }
        for (j, &id) in self.y.iter().enumerate() {
            pt.set(id, y[j]);
        }
        for (j, &id) in self.v.iter().enumerate() {
            let load: f64 = (0..instance.n_customers)
                .map(|i| instance.demand[i] * x[i][j])
                .sum();
            pt.set(id, load);
            if let Some(z) = &self.z {
                let zj = match self.kind {
                    FormulationKind::Perspective if y[j] > 0.0 => load * load / y[j],
                    FormulationKind::Perspective => 0.0,
                    FormulationKind::Natural => load * load,
                };
                pt.set(z[j], zj);
            }
        }
        if let Some(one) = self.one {
            pt.set(one, 1.0);
        }
        pt
    }
}

impl CcflpInstance {
    /// Instance from raw data; `r` and `pi` are derived.
    #[allow(clippy::too_many_arguments)]
    pub fn from_data(
        id: impl Into<String>,
        demand: Vec<f64>,
        capacity: Vec<f64>,
        open_cost: Vec<f64>,
        unit_cost: Vec<Vec<f64>>,
        a: f64,
        b: f64,
        p: usize,
    ) -> Result<Self, CcflpError> {
        let total_d: f64 = demand.iter().sum();
        let total_s: f64 = capacity.iter().sum();
        let inst = CcflpInstance {
            id: id.into(),
            n_customers: demand.len(),
            n_facilities: capacity.len(),
            p,
            a,
            b,
            r: if total_d > 0.0 { total_s / total_d } else { 0.0 },
            pi: if capacity.is_empty() {
                0.0
            } else {
                p as f64 / capacity.len() as f64
            },
            seed: 0,
            demand,
            capacity,
            open_cost,
            unit_cost,
        };
        inst.check_shape()?;
        Ok(inst)
    }

    pub fn total_demand(&self) -> f64 {
        self.demand.iter().sum()
    }

    pub fn check_shape(&self) -> Result<(), CcflpError> {
        let (ni, nj) = (self.n_customers, self.n_facilities);
        let shape = |msg: String| Err(CcflpError::Shape(msg));
        if ni == 0 || nj == 0 {
            return shape("empty customer or facility set".into());
        }
        if self.demand.len() != ni || self.unit_cost.len() != ni {
            return shape(format!("expected {ni} customers"));
        }
        if self.capacity.len() != nj
            || self.open_cost.len() != nj
            || self.unit_cost.iter().any(|row| row.len() != nj)
        {
            return shape(format!("expected {nj} facilities"));
        }
        if self.p == 0 || self.p > nj {
            return shape(format!("p = {} outside [1, {nj}]", self.p));
        }
        let all_finite = self
            .demand
            .iter()
            .chain(&self.capacity)
            .chain(&self.open_cost)
            .chain(self.unit_cost.iter().flatten())
            .chain([&self.a, &self.b, &self.r, &self.pi])
            .all(|v| v.is_finite());
        if !all_finite {
            return shape("non-finite value".into());
        }
        if self.demand.iter().any(|&d| d < 0.0)
            || self.open_cost.iter().any(|&f| f < 0.0)
            || self.unit_cost.iter().flatten().any(|&c| c < 0.0)
            || self.a < 0.0
            || self.b < 0.0
        {
            return shape("negative demand, cost or congestion coefficient".into());
        }
        if self.capacity.iter().any(|&s| s <= 0.0) {
            return shape("capacities must be positive".into());
        }
        Ok(())
    }

    /// Feasible iff the `p` largest capacities cover total demand.
    pub fn validate(&self) -> Result<(), InfeasibleReason> {
        let mut caps = self.capacity.clone();
        caps.sort_by(|a, b| b.total_cmp(a));
        let top: f64 = caps.iter().take(self.p).sum();
        let total = self.total_demand();
        if top >= total * (1.0 - 1e-12) {
            Ok(())
        } else {
            Err(InfeasibleReason {
                deficit: total - top,
            })
        }
    }

    pub fn build_model(&self, kind: FormulationKind) -> Result<(Model, VarMap), CcflpError> {
        self.check_shape()?;
        self.validate().map_err(CcflpError::Infeasible)?;
        let (ni, nj) = (self.n_customers, self.n_facilities);
        let mut m = Model::new();
        let mut x = Vec::with_capacity(ni);
        for i in 0..ni {
            let row = (0..nj)
                .map(|j| m.add_var(VarKind::Continuous, 0.0, 1.0, format!("x_{i}_{j}")))
                .collect::<Result<Vec<_>, _>>()?;
            x.push(row);
        }
        let y = (0..nj)
            .map(|j| m.add_var(VarKind::Binary, 0.0, 1.0, format!("y_{j}")))
            .collect::<Result<Vec<_>, _>>()?;
        let v = (0..nj)
            .map(|j| m.add_var(VarKind::Continuous, 0.0, self.capacity[j], format!("v_{j}")))
            .collect::<Result<Vec<_>, _>>()?;
        let congested = self.a > 0.0;
        let z = if congested {
            Some(
                (0..nj)
                    .map(|j| m.add_var(VarKind::Continuous, 0.0, f64::INFINITY, format!("z_{j}")))
                    .collect::<Result<Vec<_>, _>>()?,
            )
        } else {
            None
        };
        let one = if congested && kind == FormulationKind::Natural {
            Some(m.add_var(VarKind::Continuous, 1.0, 1.0, "one")?)
        } else {
            None
        };

        let mut obj = LinExpr::new();
        for j in 0..nj {
            obj.add_term(y[j], self.open_cost[j]);
            obj.add_term(v[j], self.b);
            if let Some(z) = &z {
                obj.add_term(z[j], self.a);
            }
        }
        for i in 0..ni {
            for j in 0..nj {
                obj.add_term(x[i][j], self.demand[i] * self.unit_cost[i][j]);
            }
        }
        m.set_objective(obj)?;

        m.add_constraint(
            LinConstraint::new(LinExpr::from_terms(y.iter().map(|&id| (id, 1.0))), Sense::Eq, self.p as f64)
                .named("pmedian"),
        )?;
        for j in 0..nj {
            let mut e = LinExpr::from_terms((0..ni).map(|i| (x[i][j], self.demand[i])));
            e.add_term(v[j], -1.0);
            m.add_constraint(LinConstraint::new(e, Sense::Eq, 0.0).named(format!("load_{j}")))?;
        }
        for (i, row) in x.iter().enumerate() {
            m.add_constraint(
                LinConstraint::new(LinExpr::from_terms(row.iter().map(|&id| (id, 1.0))), Sense::Eq, 1.0)
                    .named(format!("assign_{i}")),
            )?;
        }
        for (i, row) in x.iter().enumerate() {
            for j in 0..nj {
                let e = LinExpr::from_terms([(row[j], 1.0), (y[j], -1.0)]);
                m.add_constraint(LinConstraint::new(e, Sense::Le, 0.0).named(format!("vub_{i}_{j}")))?;
            }
        }
        for j in 0..nj {
            let e = LinExpr::from_terms([(v[j], 1.0), (y[j], -self.capacity[j])]);
            m.add_constraint(LinConstraint::new(e, Sense::Le, 0.0).named(format!("cap_{j}")))?;
        }
        if let Some(z) = &z {
            for j in 0..nj {
                let second = one.unwrap_or(y[j]);
                m.add_cone(RotatedCone {
                    z: z[j],
                    y: second,
                    v: v[j],
                })?;
            }
        }
        Ok((
            m,
            VarMap {
                kind,
                x,
                y,
                v,
                z,
                one,
                p_open: self.p,
            },
        ))
    }

    /// Natural objective with loads computed from `x`.
    pub fn objective_of(&self, x: &[Vec<f64>], y: &[f64]) -> Result<f64, CcflpError> {
        let (ni, nj) = (self.n_customers, self.n_facilities);
        if x.len() != ni || x.iter().any(|r| r.len() != nj) || y.len() != nj {
            return Err(CcflpError::Shape(format!("expected x {ni}x{nj} and y {nj}")));
        }
        for (i, row) in x.iter().enumerate() {
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-9 || row.iter().any(|&v| v < -1e-9) {
                return Err(CcflpError::Shape(format!("row {i} of x is not stochastic")));
            }
        }
        if y.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(CcflpError::Shape("y must be binary".into()));
        }
        let opened = y.iter().filter(|&&v| v == 1.0).count();
        if opened != self.p {
            return Err(CcflpError::Shape(format!("{opened} facilities open, expected {}", self.p)));
        }
        let mut total = 0.0;
        for j in 0..nj {
            total += self.open_cost[j] * y[j];
            let load: f64 = (0..ni).map(|i| self.demand[i] * x[i][j]).sum();
            total += self.b * load + self.a * load * load;
        }
        for i in 0..ni {
            for j in 0..nj {
                total += self.demand[i] * self.unit_cost[i][j] * x[i][j];
            }
        }
        Ok(total)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serializes")
    }

    /// Parses and checks an instance document. Non-finite numbers are rejected.
    pub fn from_json(text: &str) -> Result<Self, CcflpError> {
        let inst: CcflpInstance = serde_json::from_str(text)?;
        inst.check_shape()?;
        Ok(inst)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, CcflpError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), CcflpError> {
        let mut text = self.to_json();
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }
}
