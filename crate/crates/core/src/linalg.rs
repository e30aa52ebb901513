//! SVD-backed kernels: minimum-norm least squares, hard singular value
//! thresholding and spectral-energy ranks.

use nalgebra::{DMatrix, DVector};

/// Default relative cutoff for the pseudoinverse.
pub const DEFAULT_RCOND: f64 = 1e-10;

/// Thin SVD with singular values sorted nonincreasing.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    pub u: DMatrix<f64>,
    pub s: DVector<f64>,
    pub vt: DMatrix<f64>,
}

impl SvdFactors {
    /// Columns of `u` paired with zero singular values are zero.
    pub fn new(matrix: &DMatrix<f64>) -> Self {
        let (m, n) = matrix.shape();
        let k = m.min(n);
        if k == 0 {
            return Self {
                u: DMatrix::zeros(m, 0),
                s: DVector::zeros(0),
                vt: DMatrix::zeros(0, n),
            };
        }
        // Jacobi works on the tall orientation; a wide matrix is factored
        // through its transpose with the roles of u and v swapped.
        let (u, s, v) = if m >= n {
            jacobi_svd(matrix.clone())
        } else {
            let (u, s, v) = jacobi_svd(matrix.transpose());
            (v, s, u)
        };
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));

        let mut out_u = DMatrix::zeros(m, k);
        let mut out_vt = DMatrix::zeros(k, n);
        let mut out_s = DVector::zeros(k);
        for (dst, &src) in order.iter().enumerate() {
            out_s[dst] = s[src];
            let mut v_col = v.column(src).clone_owned();
            let mut u_col = u.column(src).clone_owned();
            // Deterministic sign: largest-magnitude entry of v is nonnegative.
            let pivot = v_col
                .iter()
                .copied()
                .fold(0.0_f64, |best, x| if x.abs() > best.abs() { x } else { best });
            if pivot < 0.0 {
                v_col.neg_mut();
                u_col.neg_mut();
            }
            out_vt.set_row(dst, &v_col.transpose());
            out_u.set_column(dst, &u_col);
        }
        Self { u: out_u, s: out_s, vt: out_vt }
    }

    /// Number of leading singular values needed to capture `energy` of the
    /// squared Frobenius norm. Ties resolve to the smaller count. Singular
    /// values at or below `DEFAULT_RCOND * s_max` count as zero, so energy 1.0
    /// gives the numerical rank.
    pub fn energy_rank(&self, energy: f64) -> usize {
        let s_max = self.s.iter().copied().fold(0.0, f64::max);
        if s_max <= 0.0 {
            return 0;
        }
        let kept: Vec<f64> = self.s.iter().copied().take_while(|&s| s > DEFAULT_RCOND * s_max).collect();
        let total: f64 = kept.iter().map(|s| s * s).sum();
        let mut cum = 0.0;
        for (i, s) in kept.iter().enumerate() {
            cum += s * s;
            if cum / total >= energy {
                return i + 1;
            }
        }
        kept.len()
    }

    /// `u_k diag(s_k) vt_k` for the leading `k` triplets.
    pub fn reconstruct(&self, k: usize) -> DMatrix<f64> {
        let k = k.min(self.s.len());
        let (m, n) = (self.u.nrows(), self.vt.ncols());
        if k == 0 {
            return DMatrix::zeros(m, n);
        }
        let mut us = self.u.columns(0, k).clone_owned();
        for j in 0..k {
            us.column_mut(j).scale_mut(self.s[j]);
        }
        us * self.vt.rows(0, k)
    }
}

/// One-sided Jacobi SVD of a matrix with at least as many rows as columns.
/// Returns unsorted `(u, s, v)` with `a = u diag(s) v^T`.
fn jacobi_svd(mut a: DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>) {
    const MAX_SWEEPS: usize = 80;
    let (m, n) = a.shape();
    let mut v = DMatrix::<f64>::identity(n, n);
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = a.column(p).norm_squared();
                let beta = a.column(q).norm_squared();
                let gamma = a.column(p).dot(&a.column(q));
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let (x, y) = (a[(i, p)], a[(i, q)]);
                    a[(i, p)] = c * x - s * y;
                    a[(i, q)] = s * x + c * y;
                }
                for i in 0..n {
                    let (x, y) = (v[(i, p)], v[(i, q)]);
                    v[(i, p)] = c * x - s * y;
                    v[(i, q)] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let s = DVector::from_fn(n, |j, _| a.column(j).norm());
    for j in 0..n {
        if s[j] > 0.0 {
            a.column_mut(j).unscale_mut(s[j]);
        }
    }
    (a, s, v)
}

/// Result of a minimum-norm least-squares solve.
#[derive(Debug, Clone, PartialEq)]
pub struct LstsqSolution {
    pub weights: DVector<f64>,
    /// Number of singular values kept above the cutoff.
    pub rank: usize,
    /// Set when the design matrix is identically zero.
    pub degenerate: bool,
}

/// Minimum-norm least-squares solution `design^+ target`, with singular values
/// below `rcond * s_max` treated as zero.
pub fn pseudoinverse_solve(
    design: &DMatrix<f64>,
    target: &DVector<f64>,
    rcond: f64,
) -> LstsqSolution {
    assert_eq!(design.nrows(), target.len(), "design/target row mismatch");
    let n = design.ncols();
    let svd = SvdFactors::new(design);
    let s_max = svd.s.iter().copied().fold(0.0, f64::max);
    if s_max <= 0.0 {
        return LstsqSolution { weights: DVector::zeros(n), rank: 0, degenerate: true };
    }
    let cutoff = rcond * s_max;
    let mut weights = DVector::zeros(n);
    let mut rank = 0;
    for i in 0..svd.s.len() {
        let s = svd.s[i];
        if s <= cutoff {
            break;
        }
        rank += 1;
        let coef = svd.u.column(i).dot(target) / s;
        weights += svd.vt.row(i).transpose() * coef;
    }
    LstsqSolution { weights, rank, degenerate: false }
}

/// Hard singular value thresholding at the given energy level.
pub fn hsvt(matrix: &DMatrix<f64>, energy: f64) -> DMatrix<f64> {
    hsvt_with_rank(matrix, energy).0
}

/// Like [`hsvt`], also returning the retained rank.
pub fn hsvt_with_rank(matrix: &DMatrix<f64>, energy: f64) -> (DMatrix<f64>, usize) {
    let svd = SvdFactors::new(matrix);
    let k = svd.energy_rank(energy);
    (svd.reconstruct(k), k)
}

pub fn effective_rank(matrix: &DMatrix<f64>, energy: f64) -> usize {
    SvdFactors::new(matrix).energy_rank(energy)
}

/// Top right singular vectors as columns of an `n x k` matrix, with `k` the
/// energy rank.
pub fn right_singular_basis(matrix: &DMatrix<f64>, energy: f64) -> DMatrix<f64> {
    let svd = SvdFactors::new(matrix);
    let k = svd.energy_rank(energy);
    svd.vt.rows(0, k).transpose()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn normal_equation_oracle(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
        let ata = a.transpose() * a;
        let atb = a.transpose() * b;
        ata.lu().solve(&atb).expect("full column rank")
    }

    #[test]
    fn pinv_examples() {
        let sol = pseudoinverse_solve(&DMatrix::identity(2, 2), &DVector::from_vec(vec![3.0, 5.0]), DEFAULT_RCOND);
        assert!((sol.weights - DVector::from_vec(vec![3.0, 5.0])).norm() < 1e-12);

        let a = DMatrix::from_row_slice(2, 1, &[1.0, 1.0]);
        let b = DVector::from_vec(vec![1.0, 3.0]);
        let oracle = normal_equation_oracle(&a, &b);
        assert!((oracle[0] - 2.0).abs() < 1e-12);
        let sol = pseudoinverse_solve(&a, &b, DEFAULT_RCOND);
        assert!((sol.weights[0] - oracle[0]).abs() < 1e-12);

        // x1 + x2 = 2 has minimum-norm solution [1, 1].
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let sol = pseudoinverse_solve(&a, &DVector::from_vec(vec![2.0, 2.0]), DEFAULT_RCOND);
        assert_eq!(sol.rank, 1);
        assert!((sol.weights - DVector::from_vec(vec![1.0, 1.0])).norm() < 1e-12);
    }

    #[test]
    fn pinv_zero_design_is_degenerate() {
        let sol = pseudoinverse_solve(&DMatrix::zeros(3, 2), &DVector::from_vec(vec![1.0, 2.0, 3.0]), DEFAULT_RCOND);
        assert!(sol.degenerate);
        assert_eq!(sol.weights, DVector::zeros(2));
    }

    #[test]
    fn hsvt_examples() {
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 0.0]));
        let (out, k) = hsvt_with_rank(&d, 0.95);
        assert_eq!(k, 1);
        assert!((out - &d).norm() < 1e-12);

        // 4 / (4 + 1) = 0.8 meets the threshold exactly, so one value is kept.
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 1.0]));
        let (out, k) = hsvt_with_rank(&d, 0.8);
        assert_eq!(k, 1);
        assert!((out - DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 0.0]))).norm() < 1e-12);

        let x = DMatrix::from_row_slice(3, 2, &[1.0, -2.0, 0.5, 4.0, 3.0, 1.0]);
        assert!((hsvt(&x, 1.0) - &x).norm() <= 1e-10 * x.norm());
    }

    #[test]
    fn effective_rank_examples() {
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 1.0]));
        assert_eq!(effective_rank(&d, 0.8), 1);
        assert_eq!(effective_rank(&DMatrix::identity(3, 3), 1.0), 3);
        assert_eq!(effective_rank(&DMatrix::zeros(3, 3), 0.95), 0);
    }

    #[test]
    fn right_basis_examples() {
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 1.0]));
        let q = right_singular_basis(&d, 1.0);
        assert!((q - DMatrix::identity(2, 2)).norm() < 1e-12);

        let r1 = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        let q = right_singular_basis(&r1, 0.95);
        assert_eq!(q.ncols(), 1);
        let expected = DVector::from_vec(vec![1.0, 2.0]) / 5f64.sqrt();
        assert!((q.column(0) - expected).norm() < 1e-12);

        assert_eq!(right_singular_basis(&DMatrix::zeros(2, 3), 0.95).ncols(), 0);
    }

    #[test]
    fn wide_and_empty_matrices() {
        let wide = DMatrix::from_row_slice(1, 3, &[1.0, 2.0, 2.0]);
        let q = right_singular_basis(&wide, 1.0);
        assert_eq!(q.shape(), (3, 1));
        assert_eq!(right_singular_basis(&DMatrix::zeros(0, 3), 1.0).shape(), (3, 0));
    }
}
