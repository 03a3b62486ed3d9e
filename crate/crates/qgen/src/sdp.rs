//! Small dense primal-dual interior-point solver for block semidefinite programs.
//!
//! Primal: min sum_j <C_j, X_j> s.t. sum_j <A_kj, X_j> = b_k, X_j psd.
//! Dual:   max b.y s.t. S_j = C_j - sum_k y_k A_kj psd.
//! HKM search direction with a Mehrotra corrector. Redundant equality rows are
//! removed up front with an SVD of the constraint matrix.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

const MAX_ITER: usize = 100;
const TOL: f64 = 1e-10;
/// Accepted when the iteration stalls above `TOL`.
const LOOSE_TOL: f64 = 1e-7;

#[derive(Debug, Clone)]
pub(crate) struct BlockSdp {
    pub sizes: Vec<usize>,
    pub c: Vec<DMatrix<f64>>,
    /// One row per constraint: (block, symmetric matrix) terms.
    pub rows: Vec<Vec<(usize, DMatrix<f64>)>>,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct SdpSolution {
    pub x: Vec<DMatrix<f64>>,
    /// Multipliers for the original rows.
    pub y: Vec<f64>,
    pub primal: f64,
    #[allow(dead_code)]
    pub dual: f64,
}

fn svec_len(n: usize) -> usize {
    n * (n + 1) / 2
}

fn svec_into(m: &DMatrix<f64>, out: &mut [f64]) {
    let n = m.nrows();
    let mut k = 0;
    for j in 0..n {
        for i in 0..=j {
            out[k] = if i == j { m[(i, j)] } else { std::f64::consts::SQRT_2 * 0.5 * (m[(i, j)] + m[(j, i)]) };
            k += 1;
        }
    }
}

fn smat(v: &[f64], n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    let mut k = 0;
    for j in 0..n {
        for i in 0..=j {
            if i == j {
                m[(i, i)] = v[k];
            } else {
                let x = v[k] / std::f64::consts::SQRT_2;
                m[(i, j)] = x;
                m[(j, i)] = x;
            }
            k += 1;
        }
    }
    m
}

struct Layout {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
    total: usize,
}

impl Layout {
    fn new(sizes: &[usize]) -> Self {
        let mut offsets = Vec::with_capacity(sizes.len());
        let mut total = 0;
        for &n in sizes {
            offsets.push(total);
            total += svec_len(n);
        }
        Self {
            sizes: sizes.to_vec(),
            offsets,
            total,
        }
    }

    fn pack(&self, blocks: &[DMatrix<f64>]) -> DVector<f64> {
        let mut v = DVector::zeros(self.total);
        for (j, m) in blocks.iter().enumerate() {
            let o = self.offsets[j];
            svec_into(m, &mut v.as_mut_slice()[o..o + svec_len(self.sizes[j])]);
        }
        v
    }

    fn unpack(&self, v: &DVector<f64>) -> Vec<DMatrix<f64>> {
        self.sizes
            .iter()
            .zip(&self.offsets)
            .map(|(&n, &o)| smat(&v.as_slice()[o..o + svec_len(n)], n))
            .collect()
    }
}

fn sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Largest step t <= 1/0 such that x + t dx stays psd, via the Cholesky factor of x.
fn max_step(x: &DMatrix<f64>, dx: &DMatrix<f64>) -> Result<f64> {
    let chol = Cholesky::new(x.clone()).ok_or_else(|| Error::SolverFailure("iterate left the cone".into()))?;
    let l = chol.l();
    let linv = l
        .clone()
        .solve_lower_triangular(&DMatrix::identity(x.nrows(), x.nrows()))
        .ok_or_else(|| Error::SolverFailure("singular Cholesky factor".into()))?;
    let m = sym(&(&linv * dx * linv.transpose()));
    let lmin = SymmetricEigen::new(m).eigenvalues.min();
    Ok(if lmin >= 0.0 { f64::INFINITY } else { -1.0 / lmin })
}

fn step_lengths(
    x: &[DMatrix<f64>],
    s: &[DMatrix<f64>],
    dx: &[DMatrix<f64>],
    ds: &[DMatrix<f64>],
    damping: f64,
) -> Result<(f64, f64)> {
    let mut ap = 1.0f64;
    let mut ad = 1.0f64;
    for j in 0..x.len() {
        ap = ap.min(damping * max_step(&x[j], &dx[j])?);
        ad = ad.min(damping * max_step(&s[j], &ds[j])?);
    }
    Ok((ap, ad))
}

fn inverse_spd(s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Cholesky::new(s.clone())
        .map(|c| c.inverse())
        .ok_or_else(|| Error::SolverFailure("dual slack lost definiteness".into()))
}

fn trace_dot(a: &[DMatrix<f64>], b: &[DMatrix<f64>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

pub(crate) fn solve(p: &BlockSdp) -> Result<SdpSolution> {
    let layout = Layout::new(&p.sizes);
    let n_rows = p.rows.len();
    // dense constraint matrix, original rows
    let mut a0 = DMatrix::<f64>::zeros(n_rows, layout.total);
    for (k, row) in p.rows.iter().enumerate() {
        for (j, m) in row {
            let o = layout.offsets[*j];
            let len = svec_len(p.sizes[*j]);
            let mut tmp = vec![0.0; len];
            svec_into(m, &mut tmp);
            for (t, v) in tmp.into_iter().enumerate() {
                a0[(k, o + t)] += v;
            }
        }
    }
    let b0 = DVector::from_column_slice(&p.b);

    // Replace the rows by U_r^T A where A = U S V^T, dropping null singular directions.
    let svd_rows = a0.clone().svd(true, false);
    let u_rows = svd_rows.u.as_ref().expect("requested U");
    let smax_r = svd_rows.singular_values.max();
    let kept: Vec<usize> = (0..svd_rows.singular_values.len())
        .filter(|&i| svd_rows.singular_values[i] > 1e-10 * smax_r.max(1.0))
        .collect();
    let r = kept.len();
    let ur = DMatrix::from_fn(n_rows, r, |i, c| u_rows[(i, kept[c])]);
    let a = ur.transpose() * &a0;
    let b = ur.transpose() * &b0;
    let resid = (&b0 - &ur * &b).norm();
    if resid > 1e-8 * (1.0 + b0.norm()) {
        return Err(Error::SolverFailure(format!("inconsistent equality constraints (residual {resid:.3e})")));
    }

    let a_blocks: Vec<Vec<DMatrix<f64>>> = (0..r)
        .map(|k| layout.unpack(&a.row(k).transpose()))
        .collect();
    let c_vec = layout.pack(&p.c);
    let c_norm = c_vec.norm();
    let b_norm = b.norm();
    let n_total: usize = p.sizes.iter().sum();

    // SDPT3-style starting point
    let mut xi: f64 = 10.0;
    let mut eta: f64 = 10.0;
    for k in 0..r {
        let ak = a.row(k).norm();
        xi = xi.max((n_total as f64).sqrt() * (1.0 + b[k].abs()) / (1.0 + ak));
        eta = eta.max(ak);
    }
    eta = eta.max(c_norm).max((n_total as f64).sqrt());
    let mut x: Vec<DMatrix<f64>> = p.sizes.iter().map(|&n| DMatrix::identity(n, n) * xi).collect();
    let mut s: Vec<DMatrix<f64>> = p.sizes.iter().map(|&n| DMatrix::identity(n, n) * eta).collect();
    let mut y = DVector::<f64>::zeros(r);

    let mut best: Option<(f64, Vec<DMatrix<f64>>, DVector<f64>)> = None;
    for _ in 0..MAX_ITER {
        let xv = layout.pack(&x);
        let sv = layout.pack(&s);
        let rp = &b - &a * &xv;
        let rd_v = &c_vec - a.transpose() * &y - &sv;
        let rd = layout.unpack(&rd_v);
        let pobj = c_vec.dot(&xv);
        let dobj = b.dot(&y);
        let mu = xv.dot(&sv) / n_total as f64;
        let err = (rp.norm() / (1.0 + b_norm))
            .max(rd_v.norm() / (1.0 + c_norm))
            .max((pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs()));
        if best.as_ref().is_none_or(|(e, _, _)| err < *e) {
            best = Some((err, x.clone(), y.clone()));
        }
        if err < TOL {
            break;
        }

        let Ok(sinv) = s.iter().map(inverse_spd).collect::<Result<Vec<_>>>() else {
            break;
        };
        // Schur complement M_kl = sum_j <A_kj, X_j A_lj S_j^-1>
        let mut g = DMatrix::<f64>::zeros(layout.total, r);
        for l in 0..r {
            let blocks: Vec<DMatrix<f64>> = (0..x.len())
                .map(|j| sym(&(&x[j] * &a_blocks[l][j] * &sinv[j])))
                .collect();
            g.set_column(l, &layout.pack(&blocks));
        }
        let mut m = &a * &g;
        m = (&m + m.transpose()) * 0.5;
        let chol = match Cholesky::new(m.clone()) {
            Some(c) => c,
            None => {
                let reg = 1e-14 * m.diagonal().max().max(1.0);
                for i in 0..r {
                    m[(i, i)] += reg;
                }
                match Cholesky::new(m) {
                    Some(c) => c,
                    None => break,
                }
            }
        };

        let direction = |rc: &[DMatrix<f64>]| -> (Vec<DMatrix<f64>>, Vec<DMatrix<f64>>, DVector<f64>) {
            // dX = (Rc - X dS) S^-1, dS = Rd - A^T dy
            let base: Vec<DMatrix<f64>> = (0..x.len())
                .map(|j| sym(&((&rc[j] - &x[j] * &rd[j]) * &sinv[j])))
                .collect();
            let h = &rp - &a * layout.pack(&base);
            let dy = chol.solve(&h);
            let ds = layout.unpack(&(&rd_v - a.transpose() * &dy));
            let dx: Vec<DMatrix<f64>> = (0..x.len())
                .map(|j| sym(&((&rc[j] - &x[j] * &ds[j]) * &sinv[j])))
                .collect();
            (dx, ds, dy)
        };

        let xs: Vec<DMatrix<f64>> = (0..x.len()).map(|j| &x[j] * &s[j]).collect();
        let rc_aff: Vec<DMatrix<f64>> = xs.iter().map(|m| -m).collect();
        let (dx_a, ds_a, _) = direction(&rc_aff);
        let Ok((ap, ad)) = step_lengths(&x, &s, &dx_a, &ds_a, 1.0) else {
            break;
        };
        let x_a: Vec<DMatrix<f64>> = (0..x.len()).map(|j| &x[j] + &dx_a[j] * ap).collect();
        let s_a: Vec<DMatrix<f64>> = (0..x.len()).map(|j| &s[j] + &ds_a[j] * ad).collect();
        let mu_aff = trace_dot(&x_a, &s_a) / n_total as f64;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        let rc: Vec<DMatrix<f64>> = (0..x.len())
            .map(|j| {
                let n = p.sizes[j];
                DMatrix::identity(n, n) * (sigma * mu) - &xs[j] - &dx_a[j] * &ds_a[j]
            })
            .collect();
        let (dx, ds, dy) = direction(&rc);
        let Ok((ap, ad)) = step_lengths(&x, &s, &dx, &ds, 0.98) else {
            break;
        };
        for j in 0..x.len() {
            x[j] += &dx[j] * ap;
            s[j] += &ds[j] * ad;
        }
        y += dy * ad;
        if ap < 1e-12 && ad < 1e-12 {
            break;
        }
    }

    let (err, x, y) = best.expect("at least one iterate");
    if err > LOOSE_TOL {
        return Err(Error::SolverFailure(format!("interior-point iteration stalled at residual {err:.3e}")));
    }
    let xv = layout.pack(&x);
    let primal = c_vec.dot(&xv);
    let dual = b.dot(&y);
    let y_orig = &ur * &y;
    Ok(SdpSolution {
        x,
        y: y_orig.as_slice().to_vec(),
        primal,
        dual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svec_round_trip_preserves_inner_products() {
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 5.0, 3.0, 5.0, 6.0]);
        let b = DMatrix::from_row_slice(3, 3, &[0.5, -1.0, 0.0, -1.0, 2.0, 1.0, 0.0, 1.0, -3.0]);
        let mut va = vec![0.0; 6];
        let mut vb = vec![0.0; 6];
        svec_into(&a, &mut va);
        svec_into(&b, &mut vb);
        let dot: f64 = va.iter().zip(&vb).map(|(x, y)| x * y).sum();
        assert!((dot - a.dot(&b)).abs() < 1e-12);
        assert!((smat(&va, 3) - a).amax() < 1e-12);
    }

    #[test]
    fn min_eigenvalue_program() {
        // min <C, X> s.t. tr X = 1 is the smallest eigenvalue of C
        let c = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 3.0, -1.0, 0.0, -1.0, 1.0]);
        let lmin = SymmetricEigen::new(c.clone()).eigenvalues.min();
        let p = BlockSdp {
            sizes: vec![3],
            c: vec![c],
            rows: vec![vec![(0, DMatrix::identity(3, 3))]],
            b: vec![1.0],
        };
        let sol = solve(&p).unwrap();
        assert!((sol.primal - lmin).abs() < 1e-8, "{} vs {lmin}", sol.primal);
        assert!((sol.dual - lmin).abs() < 1e-8);
    }

    #[test]
    fn redundant_rows_are_tolerated() {
        let c = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, -1.0]);
        let i2 = DMatrix::identity(2, 2);
        let p = BlockSdp {
            sizes: vec![2],
            c: vec![c.clone()],
            rows: vec![vec![(0, i2.clone())], vec![(0, i2 * 2.0)]],
            b: vec![1.0, 2.0],
        };
        let sol = solve(&p).unwrap();
        let lmin = SymmetricEigen::new(c).eigenvalues.min();
        assert!((sol.primal - lmin).abs() < 1e-8);
    }
}
