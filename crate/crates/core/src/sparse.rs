//! Compressed sparse row matrices and a restarted GMRES solver.

use ndarray::Array2;

use crate::C64;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<C64>,
}

impl CsrMatrix {
    /// Build from unsorted `(row, col, value)` triplets; duplicates are summed
    /// and exact zeros dropped.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        mut triplets: Vec<(usize, usize, C64)>,
    ) -> Self {
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0; nrows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut data: Vec<C64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            debug_assert!(r < nrows && c < ncols);
            if last == Some((r, c)) {
                *data.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                data.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            indptr[r + 1] += indptr[r];
        }
        CsrMatrix {
            nrows,
            ncols,
            indptr,
            indices,
            data,
        }
        .pruned()
    }

    fn pruned(self) -> Self {
        if self.data.iter().all(|v| *v != ZERO) {
            return self;
        }
        let mut out = CsrMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            indptr: vec![0; self.nrows + 1],
            indices: Vec::with_capacity(self.indices.len()),
            data: Vec::with_capacity(self.data.len()),
        };
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                if v != ZERO {
                    out.indices.push(c);
                    out.data.push(v);
                }
            }
            out.indptr[r + 1] = out.indices.len();
        }
        out
    }

    pub fn from_dense(m: &Array2<C64>) -> Self {
        let triplets = m
            .indexed_iter()
            .filter(|(_, v)| **v != ZERO)
            .map(|((r, c), v)| (r, c, *v))
            .collect();
        Self::from_triplets(m.nrows(), m.ncols(), triplets)
    }

    pub fn identity(n: usize) -> Self {
        CsrMatrix {
            nrows: n,
            ncols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            data: vec![C64::new(1.0, 0.0); n],
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn row(&self, r: usize) -> (&[usize], &[C64]) {
        let (a, b) = (self.indptr[r], self.indptr[r + 1]);
        (&self.indices[a..b], &self.data[a..b])
    }

    /// Iterate over stored `(row, col, value)` entries in row order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.nrows).flat_map(move |r| {
            let (cols, vals) = self.row(r);
            cols.iter().zip(vals).map(move |(&c, &v)| (r, c, v))
        })
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        let (cols, vals) = self.row(r);
        cols.binary_search(&c).map(|k| vals[k]).unwrap_or(ZERO)
    }

    pub fn to_dense(&self) -> Array2<C64> {
        let mut m = Array2::zeros((self.nrows, self.ncols));
        for (r, c, v) in self.iter() {
            m[[r, c]] = v;
        }
        m
    }

    pub fn matvec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|r| {
                let (cols, vals) = self.row(r);
                cols.iter().zip(vals).map(|(&c, v)| v * x[c]).sum()
            })
            .collect()
    }

    /// Sparse product `self * other`.
    pub fn mul(&self, other: &CsrMatrix) -> CsrMatrix {
        assert_eq!(self.ncols, other.nrows);
        let mut triplets = Vec::new();
        for (r, k, a) in self.iter() {
            let (cols, vals) = other.row(k);
            for (&c, &b) in cols.iter().zip(vals) {
                triplets.push((r, c, a * b));
            }
        }
        CsrMatrix::from_triplets(self.nrows, other.ncols, triplets)
    }

    pub fn scaled(&self, s: C64) -> CsrMatrix {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v *= s);
        out.pruned()
    }

    pub fn adjoint(&self) -> CsrMatrix {
        let triplets = self.iter().map(|(r, c, v)| (c, r, v.conj())).collect();
        CsrMatrix::from_triplets(self.ncols, self.nrows, triplets)
    }

    pub fn diagonal(&self) -> Vec<C64> {
        (0..self.nrows.min(self.ncols))
            .map(|i| self.get(i, i))
            .collect()
    }

    /// Copy with row `r` replaced by the given `(col, value)` entries.
    pub fn with_row_replaced(&self, r: usize, entries: &[(usize, C64)]) -> CsrMatrix {
        let mut triplets: Vec<_> = self.iter().filter(|&(row, _, _)| row != r).collect();
        triplets.extend(entries.iter().map(|&(c, v)| (r, c, v)));
        CsrMatrix::from_triplets(self.nrows, self.ncols, triplets)
    }
}

pub(crate) fn norm2(x: &[C64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, Copy)]
pub struct GmresOptions {
    pub restart: usize,
    pub max_restarts: usize,
    /// Stop once `||b - A x|| <= tol * ||b||`.
    pub tol: f64,
}

impl Default for GmresOptions {
    fn default() -> Self {
        GmresOptions {
            restart: 60,
            max_restarts: 400,
            tol: 1e-13,
        }
    }
}

/// Restarted GMRES with Jacobi right preconditioning. Returns the solution
/// and the final relative residual, or `Err` with the residual reached.
pub fn gmres(a: &CsrMatrix, b: &[C64], opts: GmresOptions) -> Result<(Vec<C64>, f64), f64> {
    let n = b.len();
    let inv_diag: Vec<C64> = a
        .diagonal()
        .into_iter()
        .map(|d| {
            if d.norm() > 1e-14 {
                1.0 / d
            } else {
                C64::new(1.0, 0.0)
            }
        })
        .collect();
    let precond = |v: &[C64]| -> Vec<C64> { v.iter().zip(&inv_diag).map(|(x, d)| x * d).collect() };
    let bnorm = norm2(b).max(f64::MIN_POSITIVE);
    let mut x = vec![ZERO; n];
    let m = opts.restart.max(1);
    let mut rel = 1.0;

    for _ in 0..opts.max_restarts {
        let ax = a.matvec(&x);
        let r: Vec<C64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let beta = norm2(&r);
        rel = beta / bnorm;
        if rel <= opts.tol {
            return Ok((x, rel));
        }
        let mut basis: Vec<Vec<C64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut h = vec![vec![ZERO; m]; m + 1];
        let mut cs = vec![ZERO; m];
        let mut sn = vec![ZERO; m];
        let mut g = vec![ZERO; m + 1];
        g[0] = C64::new(beta, 0.0);
        let mut steps = 0;
        for k in 0..m {
            let mut w = a.matvec(&precond(&basis[k]));
            // modified Gram-Schmidt
            for (j, vj) in basis.iter().enumerate() {
                let hjk: C64 = vj.iter().zip(&w).map(|(v, wi)| v.conj() * wi).sum();
                h[j][k] = hjk;
                w.iter_mut().zip(vj).for_each(|(wi, v)| *wi -= hjk * v);
            }
            let wn = norm2(&w);
            h[k + 1][k] = C64::new(wn, 0.0);
            for j in 0..k {
                let t = cs[j].conj() * h[j][k] + sn[j].conj() * h[j + 1][k];
                h[j + 1][k] = -sn[j] * h[j][k] + cs[j] * h[j + 1][k];
                h[j][k] = t;
            }
            let (hk, hk1) = (h[k][k], h[k + 1][k]);
            let denom = (hk.norm_sqr() + hk1.norm_sqr()).sqrt();
            if denom == 0.0 {
                steps = k;
                break;
            }
            cs[k] = hk / denom;
            sn[k] = hk1 / denom;
            h[k][k] = C64::new(denom, 0.0);
            h[k + 1][k] = ZERO;
            g[k + 1] = -sn[k] * g[k];
            g[k] = cs[k].conj() * g[k];
            steps = k + 1;
            if g[k + 1].norm() / bnorm <= opts.tol * 0.5 || wn == 0.0 {
                break;
            }
            basis.push(w.iter().map(|v| v / wn).collect());
        }
        // back substitution
        let mut y = vec![ZERO; steps];
        for i in (0..steps).rev() {
            let s: C64 = ((i + 1)..steps).map(|j| h[i][j] * y[j]).sum();
            y[i] = (g[i] - s) / h[i][i];
        }
        let mut update = vec![ZERO; n];
        for (yi, vi) in y.iter().zip(&basis) {
            update.iter_mut().zip(vi).for_each(|(u, v)| *u += yi * v);
        }
        let update = precond(&update);
        x.iter_mut().zip(&update).for_each(|(xi, u)| *xi += u);
    }
    let ax = a.matvec(&x);
    let r: Vec<C64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let final_rel = norm2(&r) / bnorm;
    if final_rel <= opts.tol {
        Ok((x, final_rel))
    } else {
        Err(final_rel.min(rel))
    }
}
