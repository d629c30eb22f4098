//! Basis factorization.
//!
//! The constraint matrix is `[A  -I]`, so a basis mixes structural columns
//! with negated unit columns. Rows whose slack is basic are eliminated
//! directly; only the square block of structural columns restricted to the
//! remaining rows goes through a dense LU with complete pivoting. Basis
//! changes between refactorizations are kept as product-form eta vectors.

const NONE: usize = usize::MAX;

/// Dense LU with complete pivoting: `P A Q = L U`.
#[derive(Debug, Clone, Default)]
pub(crate) struct DenseLu {
    k: usize,
    /// Row-major packed L (strict lower, unit diagonal) and U.
    lu: Vec<f64>,
    /// Transpose of `lu`, for column-oriented sweeps.
    lut: Vec<f64>,
    row_perm: Vec<usize>,
    col_perm: Vec<usize>,
}

/// Rank deficiency found during factorization, in local indices.
#[derive(Debug, Clone)]
pub(crate) struct RankDeficiency {
    pub dependent_cols: Vec<usize>,
    pub uncovered_rows: Vec<usize>,
}

impl DenseLu {
    pub fn factor(k: usize, mut a: Vec<f64>) -> Result<Self, RankDeficiency> {
        debug_assert_eq!(a.len(), k * k);
        let mut row_perm: Vec<usize> = (0..k).collect();
        let mut col_perm: Vec<usize> = (0..k).collect();
        let max_abs = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let sing_tol = 1e-13 * (1.0 + max_abs);
        for s in 0..k {
            let (mut bi, mut bj, mut best) = (s, s, 0.0f64);
            for i in s..k {
                let row = &a[i * k..(i + 1) * k];
                for (j, &v) in row.iter().enumerate().skip(s) {
                    if v.abs() > best {
                        best = v.abs();
                        bi = i;
                        bj = j;
                    }
                }
            }
            if best <= sing_tol {
                return Err(RankDeficiency {
                    dependent_cols: col_perm[s..].to_vec(),
                    uncovered_rows: row_perm[s..].to_vec(),
                });
            }
            if bi != s {
                for j in 0..k {
                    a.swap(bi * k + j, s * k + j);
                }
                row_perm.swap(bi, s);
            }
            if bj != s {
                for i in 0..k {
                    a.swap(i * k + bj, i * k + s);
                }
                col_perm.swap(bj, s);
            }
            let piv = a[s * k + s];
            let (upper, lower) = a.split_at_mut((s + 1) * k);
            let prow = &upper[s * k..(s + 1) * k];
            for i in 0..(k - s - 1) {
                let row = &mut lower[i * k..(i + 1) * k];
                let l = row[s] / piv;
                row[s] = l;
                if l != 0.0 {
                    for j in (s + 1)..k {
                        row[j] -= l * prow[j];
                    }
                }
            }
        }
        let mut lut = vec![0.0; k * k];
        for i in 0..k {
            for j in 0..k {
                lut[j * k + i] = a[i * k + j];
            }
        }
        Ok(DenseLu {
            k,
            lu: a,
            lut,
            row_perm,
            col_perm,
        })
    }

    /// Solves `A w = b`; `b` indexed by local row, result by local column.
    pub fn solve(&self, b: &[f64], out: &mut [f64]) {
        let k = self.k;
        let mut t: Vec<f64> = self.row_perm.iter().map(|&r| b[r]).collect();
        for s in 0..k {
            let ts = t[s];
            if ts != 0.0 {
                let col = &self.lut[s * k..(s + 1) * k];
                for i in (s + 1)..k {
                    t[i] -= col[i] * ts;
                }
            }
        }
        for s in (0..k).rev() {
            let col = &self.lut[s * k..(s + 1) * k];
            let ts = t[s] / col[s];
            t[s] = ts;
            if ts != 0.0 {
                for i in 0..s {
                    t[i] -= col[i] * ts;
                }
            }
        }
        for (s, &c) in self.col_perm.iter().enumerate() {
            out[c] = t[s];
        }
    }

    /// Solves `A^T y = c`; `c` indexed by local column, result by local row.
    pub fn solve_transpose(&self, c: &[f64], out: &mut [f64]) {
        let k = self.k;
        let mut t: Vec<f64> = self.col_perm.iter().map(|&j| c[j]).collect();
        for s in 0..k {
            let row = &self.lu[s * k..(s + 1) * k];
            let ts = t[s] / row[s];
            t[s] = ts;
            if ts != 0.0 {
                for j in (s + 1)..k {
                    t[j] -= row[j] * ts;
                }
            }
        }
        for s in (0..k).rev() {
            let ts = t[s];
            if ts != 0.0 {
                let row = &self.lu[s * k..(s + 1) * k];
                for i in 0..s {
                    t[i] -= row[i] * ts;
                }
            }
        }
        for (s, &r) in self.row_perm.iter().enumerate() {
            out[r] = t[s];
        }
    }
}

#[derive(Debug, Clone)]
struct Eta {
    pos: usize,
    pivot: f64,
    /// Off-pivot entries of the entering column in position space.
    entries: Vec<(usize, f64)>,
}

/// Singular basis: positions holding dependent structural columns and rows
/// left without a pivot.
#[derive(Debug, Clone)]
pub(crate) struct SingularBasis {
    pub dependent_positions: Vec<usize>,
    pub uncovered_rows: Vec<usize>,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct BasisFactor {
    m: usize,
    slack_pos_of_row: Vec<usize>,
    struct_pos: Vec<usize>,
    struct_col: Vec<usize>,
    local_rows: Vec<usize>,
    lu: DenseLu,
    etas: Vec<Eta>,
}

impl BasisFactor {
    /// Factors the basis described by `head` (variable per position);
    /// variables `>= n` are slacks of row `var - n`.
    pub fn new(
        n: usize,
        head: &[usize],
        cols: &[Vec<(usize, f64)>],
    ) -> Result<Self, SingularBasis> {
        let m = head.len();
        let mut slack_pos_of_row = vec![NONE; m];
        let mut struct_pos = Vec::new();
        let mut struct_col = Vec::new();
        for (pos, &var) in head.iter().enumerate() {
            if var >= n {
                slack_pos_of_row[var - n] = pos;
            } else {
                struct_pos.push(pos);
                struct_col.push(var);
            }
        }
        let local_rows: Vec<usize> = (0..m).filter(|&r| slack_pos_of_row[r] == NONE).collect();
        let k = struct_col.len();
        if local_rows.len() != k {
            // Duplicate slacks or malformed head; treat every structural as dependent.
            return Err(SingularBasis {
                dependent_positions: struct_pos,
                uncovered_rows: local_rows,
            });
        }
        let mut row_local = vec![NONE; m];
        for (li, &r) in local_rows.iter().enumerate() {
            row_local[r] = li;
        }
        let mut dense = vec![0.0; k * k];
        for (lc, &col) in struct_col.iter().enumerate() {
            for &(r, v) in &cols[col] {
                let li = row_local[r];
                if li != NONE {
                    dense[li * k + lc] += v;
                }
            }
        }
        match DenseLu::factor(k, dense) {
            Ok(lu) => Ok(BasisFactor {
                m,
                slack_pos_of_row,
                struct_pos,
                struct_col,
                local_rows,
                lu,
                etas: Vec::new(),
            }),
            Err(def) => Err(SingularBasis {
                dependent_positions: def.dependent_cols.iter().map(|&lc| struct_pos[lc]).collect(),
                uncovered_rows: def.uncovered_rows.iter().map(|&li| local_rows[li]).collect(),
            }),
        }
    }

    pub fn num_etas(&self) -> usize {
        self.etas.len()
    }

    /// `w = B^{-1} a` with `a` in row space; result in position space.
    pub fn ftran(&self, a: &[f64], cols: &[Vec<(usize, f64)>]) -> Vec<f64> {
        let m = self.m;
        let k = self.struct_col.len();
        let mut out = vec![0.0; m];
        let b: Vec<f64> = self.local_rows.iter().map(|&r| a[r]).collect();
        let mut wn = vec![0.0; k];
        if k > 0 {
            self.lu.solve(&b, &mut wn);
        }
        for r in 0..m {
            let pos = self.slack_pos_of_row[r];
            if pos != NONE {
                out[pos] = -a[r];
            }
        }
        for (lc, &col) in self.struct_col.iter().enumerate() {
            let w = wn[lc];
            out[self.struct_pos[lc]] = w;
            if w != 0.0 {
                for &(r, v) in &cols[col] {
                    let pos = self.slack_pos_of_row[r];
                    if pos != NONE {
                        out[pos] += v * w;
                    }
                }
            }
        }
        for eta in &self.etas {
            let xp = out[eta.pos];
            if xp != 0.0 {
                let xp = xp / eta.pivot;
                out[eta.pos] = xp;
                for &(i, w) in &eta.entries {
                    out[i] -= w * xp;
                }
            }
        }
        out
    }

    /// `y = B^{-T} c` with `c` in position space; result in row space.
    pub fn btran(&self, c: &[f64], cols: &[Vec<(usize, f64)>]) -> Vec<f64> {
        let m = self.m;
        let mut c = c.to_vec();
        for eta in self.etas.iter().rev() {
            let mut s = c[eta.pos];
            for &(i, w) in &eta.entries {
                s -= w * c[i];
            }
            c[eta.pos] = s / eta.pivot;
        }
        let mut y = vec![0.0; m];
        for r in 0..m {
            let pos = self.slack_pos_of_row[r];
            if pos != NONE {
                y[r] = -c[pos];
            }
        }
        let k = self.struct_col.len();
        if k > 0 {
            let rhs: Vec<f64> = self
                .struct_col
                .iter()
                .enumerate()
                .map(|(lc, &col)| {
                    let mut s = c[self.struct_pos[lc]];
                    for &(r, v) in &cols[col] {
                        if self.slack_pos_of_row[r] != NONE {
                            s -= v * y[r];
                        }
                    }
                    s
                })
                .collect();
            let mut yn = vec![0.0; k];
            self.lu.solve_transpose(&rhs, &mut yn);
            for (li, &r) in self.local_rows.iter().enumerate() {
                y[r] = yn[li];
            }
        }
        y
    }

    /// Records the pivot replacing position `pos` by a column with
    /// `B^{-1} a = w`.
    pub fn push_eta(&mut self, pos: usize, w: &[f64]) {
        let entries = w
            .iter()
            .enumerate()
            .filter(|&(i, &v)| i != pos && v != 0.0)
            .map(|(i, &v)| (i, v))
            .collect();
        self.etas.push(Eta {
            pos,
            pivot: w[pos],
            entries,
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matvec(k: usize, a: &[f64], x: &[f64]) -> Vec<f64> {
        (0..k)
            .map(|i| (0..k).map(|j| a[i * k + j] * x[j]).sum())
            .collect()
    }

    #[test]
    fn dense_lu_solves_both_ways() {
        let k = 4;
        let a = vec![
            0.0, 2.0, 1.0, 0.0, //
            1.0, 0.0, 0.0, 3.0, //
            4.0, 1.0, 0.0, 0.0, //
            0.0, 0.0, 5.0, 1.0,
        ];
        let lu = DenseLu::factor(k, a.clone()).unwrap();
        let b = vec![1.0, -2.0, 0.5, 3.0];
        let mut w = vec![0.0; k];
        lu.solve(&b, &mut w);
        let back = matvec(k, &a, &w);
        for i in 0..k {
            assert!((back[i] - b[i]).abs() < 1e-12);
        }
        let mut y = vec![0.0; k];
        lu.solve_transpose(&b, &mut y);
        let mut at = vec![0.0; k * k];
        for i in 0..k {
            for j in 0..k {
                at[j * k + i] = a[i * k + j];
            }
        }
        let back = matvec(k, &at, &y);
        for i in 0..k {
            assert!((back[i] - b[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn dense_lu_reports_rank_deficiency() {
        let a = vec![1.0, 2.0, 2.0, 4.0];
        let def = DenseLu::factor(2, a).unwrap_err();
        assert_eq!(def.dependent_cols.len(), 1);
        assert_eq!(def.uncovered_rows.len(), 1);
    }

    #[test]
    fn basis_factor_with_slacks_and_etas() {
        // rows: r0: x0 + x1, r1: x0 - x1, r2: x1
        let cols = vec![vec![(0, 1.0), (1, 1.0)], vec![(0, 1.0), (1, -1.0), (2, 1.0)]];
        let n = 2;
        // basis: x0, slack of row 1, x1
        let head = vec![0, n + 1, 1];
        let f = BasisFactor::new(n, &head, &cols).unwrap();
        let a = vec![3.0, 1.0, 2.0];
        let w = f.ftran(&a, &cols);
        // B w = a, columns: x0=(1,1,0), s1=(0,-1,0), x1=(1,-1,1)
        let bw = [
            w[0] + w[2],
            w[0] - w[1] - w[2],
            w[2],
        ];
        for i in 0..3 {
            assert!((bw[i] - a[i]).abs() < 1e-12);
        }
        let c = vec![1.0, 2.0, -1.0];
        let y = f.btran(&c, &cols);
        // B^T y = c
        let bty = [y[0] + y[1], -y[1], y[0] - y[1] + y[2]];
        for i in 0..3 {
            assert!((bty[i] - c[i]).abs() < 1e-12);
        }

        // replace position 1 (slack row 1) by slack of row 2 via an eta
        let mut f2 = f.clone();
        let mut e2 = vec![0.0; 3];
        e2[2] = -1.0;
        let w2 = f2.ftran(&e2, &cols);
        f2.push_eta(1, &w2);
        let head2 = vec![0, n + 2, 1];
        let fresh = BasisFactor::new(n, &head2, &cols).unwrap();
        let a = vec![0.3, -1.2, 4.0];
        let u = f2.ftran(&a, &cols);
        let v = fresh.ftran(&a, &cols);
        for i in 0..3 {
            assert!((u[i] - v[i]).abs() < 1e-12);
        }
        let u = f2.btran(&c, &cols);
        let v = fresh.btran(&c, &cols);
        for i in 0..3 {
            assert!((u[i] - v[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_basis_positions() {
        let cols = vec![vec![(0, 1.0), (1, 1.0)], vec![(0, 2.0), (1, 2.0)]];
        let head = vec![0, 1];
        let err = BasisFactor::new(2, &head, &cols).unwrap_err();
        assert_eq!(err.dependent_positions.len(), 1);
        assert_eq!(err.uncovered_rows.len(), 1);
    }
}
