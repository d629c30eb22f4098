//! Conic Benchmark Format (version 3) export and import for the model class
//! used here: boxed variables, linear rows and rotated cones.
//!
//! Variable bounds other than `x >= 0` are written as single-variable rows
//! `x - l in L+` / `x - u in L-`; the reader folds unit-coefficient
//! single-variable rows back into bounds. Each cone `v^2 <= z*y` becomes a
//! `QR` block over `(z, y, sqrt(2) v)`, since CBF reads `QR` as
//! `2 t1 t2 >= t3^2`.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::model::{LinConstraint, LinExpr, Model, ModelError, RotatedCone, Sense, VarId, VarKind};

#[derive(Debug, Error)]
pub enum CbfError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: unsupported CBF feature `{what}`")]
    UnsupportedSection { line: usize, what: String },
    #[error("model cannot be expressed in the supported CBF subset: {0}")]
    UnsupportedModel(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

const SQRT2: f64 = std::f64::consts::SQRT_2;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Domain {
    LPlus,
    LMinus,
    LEq,
    Free,
}

impl Domain {
    fn as_str(self) -> &'static str {
        match self {
            Domain::LPlus => "L+",
            Domain::LMinus => "L-",
            Domain::LEq => "L=",
            Domain::Free => "F",
        }
    }
}

/// Run-length groups of consecutive equal items.
fn runs<T: Copy + PartialEq>(items: &[T]) -> Vec<(T, usize)> {
    let mut out: Vec<(T, usize)> = Vec::new();
    for &it in items {
        match out.last_mut() {
            Some((d, n)) if *d == it => *n += 1,
            _ => out.push((it, 1)),
        }
    }
    out
}

pub fn write_cbf(model: &Model) -> Result<String, CbfError> {
    let mut var_dom = Vec::with_capacity(model.num_vars());
    // (domain, coefficient list, constant)
    let mut rows: Vec<(Domain, Vec<(usize, f64)>, f64)> = Vec::new();
    for def in model.vars() {
        let j = def.id.index();
        if def.lower == 0.0 {
            var_dom.push(Domain::LPlus);
        } else {
            var_dom.push(Domain::Free);
            if def.lower.is_finite() {
                if def.lower == def.upper {
                    rows.push((Domain::LEq, vec![(j, 1.0)], -def.lower));
                    continue;
                }
                rows.push((Domain::LPlus, vec![(j, 1.0)], -def.lower));
            }
        }
        if def.upper.is_finite() {
            rows.push((Domain::LMinus, vec![(j, 1.0)], -def.upper));
        }
    }
    for row in model.constraints() {
        let dom = match row.sense {
            Sense::Le => Domain::LMinus,
            Sense::Ge => Domain::LPlus,
            Sense::Eq => Domain::LEq,
        };
        let coefs = row.expr.terms().map(|(v, c)| (v.index(), c)).collect();
        rows.push((dom, coefs, row.expr.constant - row.rhs));
    }

    let mut s = String::new();
    s.push_str("VER\n3\n\nOBJSENSE\nMIN\n\n");
    let _ = writeln!(s, "VAR\n{} {}", model.num_vars(), runs(&var_dom).len());
    for (d, n) in runs(&var_dom) {
        let _ = writeln!(s, "{} {}", d.as_str(), n);
    }
    s.push('\n');

    let ints: Vec<usize> = model
        .vars()
        .iter()
        .filter(|d| d.kind == VarKind::Binary)
        .map(|d| d.id.index())
        .collect();
    if !ints.is_empty() {
        let _ = writeln!(s, "INT\n{}", ints.len());
        for j in &ints {
            let _ = writeln!(s, "{j}");
        }
        s.push('\n');
    }

    // Cone rows follow the linear rows.
    let n_lin = rows.len();
    let n_rows = n_lin + 3 * model.cones().len();
    if n_rows > 0 {
        let mut doms: Vec<&str> = rows.iter().map(|r| r.0.as_str()).collect();
        doms.extend(std::iter::repeat_n("QR", model.cones().len()));
        let mut blocks: Vec<(&str, usize)> = Vec::new();
        for d in doms {
            match blocks.last_mut() {
                // Each QR block is its own 3-dimensional cone.
                Some((b, n)) if *b == d && d != "QR" => *n += 1,
                _ => blocks.push((d, if d == "QR" { 3 } else { 1 })),
            }
        }
        let _ = writeln!(s, "CON\n{} {}", n_rows, blocks.len());
        for (d, n) in &blocks {
            let _ = writeln!(s, "{d} {n}");
        }
        s.push('\n');
    }

    let obj: Vec<(VarId, f64)> = model.objective().terms().collect();
    if !obj.is_empty() {
        let _ = writeln!(s, "OBJACOORD\n{}", obj.len());
        for (v, c) in obj {
            let _ = writeln!(s, "{} {}", v.index(), c);
        }
        s.push('\n');
    }
    if model.objective().constant != 0.0 {
        let _ = writeln!(s, "OBJBCOORD\n{}\n", model.objective().constant);
    }

    let mut acoord: Vec<(usize, usize, f64)> = Vec::new();
    let mut bcoord: Vec<(usize, f64)> = Vec::new();
    for (i, (_, coefs, b)) in rows.iter().enumerate() {
        for &(j, c) in coefs {
            acoord.push((i, j, c));
        }
        if *b != 0.0 {
            bcoord.push((i, *b));
        }
    }
    for (k, cone) in model.cones().iter().enumerate() {
        let base = n_lin + 3 * k;
        acoord.push((base, cone.z.index(), 1.0));
        acoord.push((base + 1, cone.y.index(), 1.0));
        acoord.push((base + 2, cone.v.index(), SQRT2));
    }
    if !acoord.is_empty() {
        let _ = writeln!(s, "ACOORD\n{}", acoord.len());
        for (i, j, c) in acoord {
            let _ = writeln!(s, "{i} {j} {c}");
        }
        s.push('\n');
    }
    if !bcoord.is_empty() {
        let _ = writeln!(s, "BCOORD\n{}", bcoord.len());
        for (i, b) in bcoord {
            let _ = writeln!(s, "{i} {b}");
        }
        s.push('\n');
    }
    Ok(s)
}

pub fn write_cbf_file(model: &Model, path: impl AsRef<Path>) -> Result<(), CbfError> {
    std::fs::write(path, write_cbf(model)?)?;
    Ok(())
}

pub fn read_cbf_file(path: impl AsRef<Path>) -> Result<Model, CbfError> {
    read_cbf(&std::fs::read_to_string(path)?)
}

struct Lines<'a> {
    inner: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Lines {
            inner: text.lines().enumerate().peekable(),
            last: 0,
        }
    }

    /// Next non-blank, non-comment line with its 1-based number.
    fn next(&mut self) -> Option<(usize, &'a str)> {
        for (i, l) in self.inner.by_ref() {
            self.last = i + 1;
            let t = l.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            return Some((i + 1, t));
        }
        None
    }

    fn expect(&mut self, what: &str) -> Result<(usize, &'a str), CbfError> {
        self.next().ok_or_else(|| CbfError::Parse {
            line: self.last + 1,
            msg: format!("unexpected end of file, expected {what}"),
        })
    }
}

fn parse_err(line: usize, msg: impl Into<String>) -> CbfError {
    CbfError::Parse {
        line,
        msg: msg.into(),
    }
}

fn fields<const N: usize>(line: usize, text: &str) -> Result<[&str; N], CbfError> {
    let parts: Vec<&str> = text.split_whitespace().collect();
    parts
        .try_into()
        .map_err(|_| parse_err(line, format!("expected {N} fields in `{text}`")))
}

fn num<T: std::str::FromStr>(line: usize, s: &str) -> Result<T, CbfError> {
    s.parse()
        .map_err(|_| parse_err(line, format!("cannot parse `{s}`")))
}

const UNSUPPORTED: &[&str] = &[
    "PSDVAR", "PSDCON", "FCOORD", "HCOORD", "DCOORD", "POWCONES", "POW*CONES", "CHANGE", "OBJFCOORD",
];

#[derive(Clone, Copy, PartialEq, Eq)]
enum ConDomain {
    Lin(Domain),
    Qr,
}

pub fn read_cbf(text: &str) -> Result<Model, CbfError> {
    let mut lines = Lines::new(text);
    let mut version = None;
    let mut var_doms: Option<Vec<Domain>> = None;
    let mut ints: Vec<(usize, usize)> = Vec::new();
    let mut con_doms: Option<Vec<(ConDomain, usize)>> = None;
    let mut con_line = 0;
    let mut obj: Vec<(usize, f64, usize)> = Vec::new();
    let mut obj_b = 0.0;
    let mut acoord: Vec<(usize, usize, f64, usize)> = Vec::new();
    let mut bcoord: Vec<(usize, f64, usize)> = Vec::new();

    while let Some((ln, key)) = lines.next() {
        match key {
            "VER" => {
                let (l, v) = lines.expect("version")?;
                let v: u32 = num(l, v)?;
                if v != 3 {
                    return Err(CbfError::UnsupportedSection {
                        line: l,
                        what: format!("VER {v}"),
                    });
                }
                version = Some(v);
            }
            "OBJSENSE" => {
                let (l, v) = lines.expect("objective sense")?;
                if v != "MIN" {
                    return Err(CbfError::UnsupportedSection {
                        line: l,
                        what: format!("OBJSENSE {v}"),
                    });
                }
            }
            "VAR" => {
                let (l, hdr) = lines.expect("VAR header")?;
                let [n, k] = fields::<2>(l, hdr)?;
                let (n, k): (usize, usize) = (num(l, n)?, num(l, k)?);
                let mut doms = Vec::with_capacity(n);
                for _ in 0..k {
                    let (l, t) = lines.expect("VAR domain")?;
                    let [d, c] = fields::<2>(l, t)?;
                    let c: usize = num(l, c)?;
                    let dom = match d {
                        "L+" => Domain::LPlus,
                        "L-" => Domain::LMinus,
                        "L=" => Domain::LEq,
                        "F" => Domain::Free,
                        other => {
                            return Err(CbfError::UnsupportedSection {
                                line: l,
                                what: format!("variable domain {other}"),
                            })
                        }
                    };
                    doms.extend(std::iter::repeat_n(dom, c));
                }
                if doms.len() != n {
                    return Err(parse_err(l, format!("VAR declares {n} variables, domains cover {}", doms.len())));
                }
                var_doms = Some(doms);
            }
            "INT" => {
                let (l, c) = lines.expect("INT count")?;
                let c: usize = num(l, c)?;
                for _ in 0..c {
                    let (l, j) = lines.expect("integer index")?;
                    ints.push((num(l, j)?, l));
                }
            }
            "CON" => {
                con_line = ln;
                let (l, hdr) = lines.expect("CON header")?;
                let [m, k] = fields::<2>(l, hdr)?;
                let (m, k): (usize, usize) = (num(l, m)?, num(l, k)?);
                let mut doms = Vec::with_capacity(k);
                let mut total = 0;
                for _ in 0..k {
                    let (l, t) = lines.expect("CON domain")?;
                    let [d, c] = fields::<2>(l, t)?;
                    let c: usize = num(l, c)?;
                    let dom = match d {
                        "L+" => ConDomain::Lin(Domain::LPlus),
                        "L-" => ConDomain::Lin(Domain::LMinus),
                        "L=" => ConDomain::Lin(Domain::LEq),
                        "F" => ConDomain::Lin(Domain::Free),
                        "QR" if c == 3 => ConDomain::Qr,
                        other => {
                            return Err(CbfError::UnsupportedSection {
                                line: l,
                                what: format!("constraint domain {other} {c}"),
                            })
                        }
                    };
                    total += c;
                    doms.push((dom, c));
                }
                if total != m {
                    return Err(parse_err(l, format!("CON declares {m} rows, domains cover {total}")));
                }
                con_doms = Some(doms);
            }
            "OBJACOORD" => {
                let (l, c) = lines.expect("OBJACOORD count")?;
                let c: usize = num(l, c)?;
                for _ in 0..c {
                    let (l, t) = lines.expect("objective coordinate")?;
                    let [j, a] = fields::<2>(l, t)?;
                    obj.push((num(l, j)?, num(l, a)?, l));
                }
            }
            "OBJBCOORD" => {
                let (l, b) = lines.expect("objective constant")?;
                obj_b = num(l, b)?;
            }
            "ACOORD" => {
                let (l, c) = lines.expect("ACOORD count")?;
                let c: usize = num(l, c)?;
                for _ in 0..c {
                    let (l, t) = lines.expect("constraint coordinate")?;
                    let [i, j, a] = fields::<3>(l, t)?;
                    acoord.push((num(l, i)?, num(l, j)?, num(l, a)?, l));
                }
            }
            "BCOORD" => {
                let (l, c) = lines.expect("BCOORD count")?;
                let c: usize = num(l, c)?;
                for _ in 0..c {
                    let (l, t) = lines.expect("constant coordinate")?;
                    let [i, b] = fields::<2>(l, t)?;
                    bcoord.push((num(l, i)?, num(l, b)?, l));
                }
            }
            k if UNSUPPORTED.contains(&k) => {
                return Err(CbfError::UnsupportedSection {
                    line: ln,
                    what: k.to_string(),
                })
            }
            other => return Err(parse_err(ln, format!("unknown section `{other}`"))),
        }
    }
    if version.is_none() {
        return Err(parse_err(lines.last + 1, "missing VER section"));
    }
    let var_doms = var_doms.unwrap_or_default();
    let n = var_doms.len();
    let mut lower = vec![f64::NEG_INFINITY; n];
    let mut upper = vec![f64::INFINITY; n];
    for (j, d) in var_doms.iter().enumerate() {
        match d {
            Domain::LPlus => lower[j] = 0.0,
            Domain::LMinus => upper[j] = 0.0,
            Domain::LEq => {
                lower[j] = 0.0;
                upper[j] = 0.0;
            }
            Domain::Free => {}
        }
    }

    // Row domains, expanded.
    let mut row_dom: Vec<(ConDomain, usize)> = Vec::new();
    for (k, (d, c)) in con_doms.unwrap_or_default().into_iter().enumerate() {
        for _ in 0..c {
            row_dom.push((d, k));
        }
    }
    let m = row_dom.len();
    let mut row_terms: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
    let mut row_b = vec![0.0; m];
    for &(i, j, a, l) in &acoord {
        if i >= m || j >= n {
            return Err(parse_err(l, format!("coordinate ({i}, {j}) out of range")));
        }
        row_terms[i].push((j, a));
    }
    for &(i, b, l) in &bcoord {
        if i >= m {
            return Err(parse_err(l, format!("row {i} out of range")));
        }
        row_b[i] += b;
    }
    for &(j, _, l) in &obj {
        if j >= n {
            return Err(parse_err(l, format!("objective column {j} out of range")));
        }
    }

    let mut linear: Vec<LinConstraint> = Vec::new();
    let mut cones: Vec<RotatedCone> = Vec::new();
    let mut i = 0;
    while i < m {
        match row_dom[i].0 {
            ConDomain::Lin(dom) => {
                let terms = &row_terms[i];
                let b = row_b[i];
                if terms.len() == 1 && terms[0].1 == 1.0 && dom != Domain::Free {
                    let j = terms[0].0;
                    match dom {
                        Domain::LPlus => lower[j] = lower[j].max(-b),
                        Domain::LMinus => upper[j] = upper[j].min(-b),
                        Domain::LEq => {
                            lower[j] = lower[j].max(-b);
                            upper[j] = upper[j].min(-b);
                        }
                        Domain::Free => unreachable!(),
                    }
                } else if dom != Domain::Free {
                    let sense = match dom {
                        Domain::LPlus => Sense::Ge,
                        Domain::LMinus => Sense::Le,
                        _ => Sense::Eq,
                    };
                    let expr = LinExpr::from_terms(terms.iter().map(|&(j, a)| (VarId(j), a)));
                    linear.push(LinConstraint::new(expr, sense, -b));
                }
                i += 1;
            }
            ConDomain::Qr => {
                let mut ids = [0usize; 3];
                for (t, id) in ids.iter_mut().enumerate() {
                    let terms = &row_terms[i + t];
                    let want = if t == 2 { SQRT2 } else { 1.0 };
                    if terms.len() != 1 || terms[0].1 != want || row_b[i + t] != 0.0 {
                        return Err(CbfError::UnsupportedSection {
                            line: con_line,
                            what: format!("QR cone at row {i} is not of the form (z, y, sqrt(2) v)"),
                        });
                    }
                    *id = terms[0].0;
                }
                cones.push(RotatedCone {
                    z: VarId(ids[0]),
                    y: VarId(ids[1]),
                    v: VarId(ids[2]),
                });
                i += 3;
            }
        }
    }

    if let Some(&(j, l)) = ints.iter().find(|&&(j, _)| j >= n) {
        return Err(parse_err(l, format!("integer index {j} out of range")));
    }
    let mut is_int = vec![None; n];
    for &(j, l) in &ints {
        is_int[j] = Some(l);
    }
    let mut model = Model::new();
    for j in 0..n {
        let kind = if let Some(l) = is_int[j] {
            if lower[j] >= 0.0 && upper[j] <= 1.0 {
                VarKind::Binary
            } else {
                return Err(CbfError::UnsupportedSection {
                    line: l,
                    what: format!("general integer variable {j}"),
                });
            }
        } else {
            VarKind::Continuous
        };
        model.add_var(kind, lower[j], upper[j], format!("x{j}"))?;
    }
    for row in linear {
        model.add_constraint(row)?;
    }
    for cone in cones {
        model.add_cone(cone)?;
    }
    let mut objective = LinExpr::from_terms(obj.into_iter().map(|(j, a, _)| (VarId(j), a)));
    objective.constant = obj_b;
    model.set_objective(objective)?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ccflp::tests::tiny;
    use crate::ccflp::FormulationKind;

    fn one_cone() -> Model {
        let mut m = Model::new();
        let z = m.add_var(VarKind::Continuous, 0.0, f64::INFINITY, "z").unwrap();
        let y = m.add_var(VarKind::Continuous, 0.0, f64::INFINITY, "y").unwrap();
        let v = m.add_var(VarKind::Continuous, f64::NEG_INFINITY, f64::INFINITY, "v").unwrap();
        m.add_cone(RotatedCone { z, y, v }).unwrap();
        m
    }

    #[test]
    fn single_cone_document() {
        let text = write_cbf(&one_cone()).unwrap();
        assert!(text.contains("CON\n3 1\nQR 3\n"));
        let back = read_cbf(&text).unwrap();
        assert_eq!(back.cones().len(), 1);
        assert_eq!(back.constraints().len(), 0);
        assert_eq!(back.var(VarId(2)).lower, f64::NEG_INFINITY);
    }

    #[test]
    fn empty_model() {
        let text = write_cbf(&Model::new()).unwrap();
        assert!(text.contains("VAR\n0 0\n"));
        let back = read_cbf(&text).unwrap();
        assert_eq!(back.num_vars(), 0);
    }

    #[test]
    fn ccflp_counts_survive() {
        let inst = crate::ccflp::CcflpInstance::from_data(
            "2x2",
            vec![3.0, 4.0],
            vec![10.0, 10.0],
            vec![5.0, 6.0],
            vec![vec![0.1, 0.2], vec![0.3, 0.1]],
            0.01,
            0.1,
            1,
        )
        .unwrap();
        let (m, _) = inst.build_model(FormulationKind::Perspective).unwrap();
        let back = read_cbf(&write_cbf(&m).unwrap()).unwrap();
        assert_eq!((back.num_vars(), back.constraints().len(), back.cones().len()), (10, 11, 2));
    }

    #[test]
    fn truncation_reports_line() {
        let (m, _) = tiny().build_model(FormulationKind::Perspective).unwrap();
        let text = write_cbf(&m).unwrap();
        // Cut inside the ACOORD entries.
        let lines: Vec<&str> = text.lines().collect();
        let acoord = lines.iter().position(|l| *l == "ACOORD").unwrap();
        let keep = acoord + 3;
        let cut = lines[..keep].join("\n");
        match read_cbf(&cut) {
            Err(CbfError::Parse { line, .. }) => assert_eq!(line, keep + 1),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn psd_is_unsupported() {
        let text = "VER\n3\n\nPSDVAR\n1\n2\n";
        assert!(matches!(read_cbf(text), Err(CbfError::UnsupportedSection { line: 4, .. })));
    }

    #[test]
    fn deterministic_output() {
        let (m, _) = tiny().build_model(FormulationKind::Natural).unwrap();
        assert_eq!(write_cbf(&m).unwrap(), write_cbf(&m).unwrap());
    }
}
