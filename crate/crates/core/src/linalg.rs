use nalgebra::{DMatrix, DVector};

/// Maps a node interval onto `[-1, 1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct AffineMap {
    pub center: f64,
    pub half_width: f64,
}

impl AffineMap {
    pub fn spanning(nodes: &[f64]) -> Self {
        let lo = nodes.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = nodes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let half_width = (hi - lo) / 2.0;
        if !(half_width > 0.0) {
            return Self {
                center: lo,
                half_width: 1.0,
            };
        }
        Self {
            center: (hi + lo) / 2.0,
            half_width,
        }
    }

    pub fn apply(&self, w: f64) -> f64 {
        (w - self.center) / self.half_width
    }
}

/// `T_0(t) .. T_{n-1}(t)`.
pub(crate) fn chebyshev_row(t: f64, n: usize) -> Vec<f64> {
    let mut row = Vec::with_capacity(n);
    if n > 0 {
        row.push(1.0);
    }
    if n > 1 {
        row.push(t);
    }
    for k in 2..n {
        let next = 2.0 * t * row[k - 1] - row[k - 2];
        row.push(next);
    }
    row
}

/// `T_n(t)`.
pub(crate) fn chebyshev_t(n: usize, t: f64) -> f64 {
    chebyshev_row(t, n + 1)[n]
}

/// Clenshaw evaluation of `sum_k c_k T_k(t)`.
pub(crate) fn clenshaw(coeffs: &[f64], t: f64) -> f64 {
    let mut b1 = 0.0;
    let mut b2 = 0.0;
    for &c in coeffs.iter().skip(1).rev() {
        let b0 = c + 2.0 * t * b1 - b2;
        b2 = b1;
        b1 = b0;
    }
    match coeffs.first() {
        Some(&c0) => c0 + t * b1 - b2,
        None => 0.0,
    }
}

/// Thin SVD `A = U diag(s) V^T` with singular values in non-increasing order.
pub(crate) struct Svd {
    pub u: DMatrix<f64>,
    pub s: DVector<f64>,
    pub v: DMatrix<f64>,
}

impl Svd {
    /// `V diag(1/s) U^T b`, dropping singular values at or below `cutoff`.
    pub fn solve(&self, b: &DVector<f64>, cutoff: f64) -> DVector<f64> {
        let mut coeffs = self.u.tr_mul(b);
        for (c, &sigma) in coeffs.iter_mut().zip(self.s.iter()) {
            *c = if sigma > cutoff { *c / sigma } else { 0.0 };
        }
        &self.v * coeffs
    }
}

/// Thin SVD through faer. nalgebra's bidiagonal iteration can stop with
/// reconstruction errors near `1e-5` on small, well-conditioned matrices,
/// which is far too coarse for the locator.
pub(crate) fn svd(a: &DMatrix<f64>) -> Svd {
    let (m, n) = a.shape();
    let k = m.min(n);
    if k == 0 {
        return Svd {
            u: DMatrix::zeros(m, 0),
            s: DVector::zeros(0),
            v: DMatrix::zeros(n, 0),
        };
    }
    let fa = faer::Mat::<f64>::from_fn(m, n, |i, j| a[(i, j)]);
    match fa.thin_svd() {
        Ok(d) => {
            let (u, v, s) = (d.U(), d.V(), d.S().column_vector());
            Svd {
                u: DMatrix::from_fn(m, k, |i, j| u[(i, j)]),
                s: DVector::from_fn(k, |i, _| s[i]),
                v: DMatrix::from_fn(n, k, |i, j| v[(i, j)]),
            }
        }
        // only reachable on non-finite input; report a zero matrix so that
        // callers see rank 0 and an unexplained residual
        Err(_) => Svd {
            u: DMatrix::zeros(m, k),
            s: DVector::zeros(k),
            v: DMatrix::zeros(n, k),
        },
    }
}

pub(crate) struct LeastSquares {
    pub solution: DVector<f64>,
    pub rank: usize,
    pub residual: f64,
}

/// Minimum-norm least squares through an SVD of the column-equilibrated
/// system. Singular values below `rcond * sigma_max` count as zero.
///
/// `scale_rows` also normalises each equation by its largest coefficient,
/// which only leaves the solution unchanged when the system is consistent.
/// Weighted fits must pass `false`.
pub(crate) fn lstsq(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    rcond: f64,
    scale_rows: bool,
) -> LeastSquares {
    let (m, n) = a.shape();
    if n == 0 {
        return LeastSquares {
            solution: DVector::zeros(0),
            rank: 0,
            residual: b.norm(),
        };
    }
    let row_scale: Vec<f64> = (0..m)
        .map(|i| {
            let s = a.row(i).amax();
            if scale_rows && s > 0.0 {
                1.0 / s
            } else {
                1.0
            }
        })
        .collect();
    let mut scaled = a.clone();
    let mut rhs = b.clone();
    for i in 0..m {
        scaled.row_mut(i).scale_mut(row_scale[i]);
        rhs[i] *= row_scale[i];
    }
    let col_scale: Vec<f64> = (0..n)
        .map(|j| {
            let s = scaled.column(j).norm();
            if s > 0.0 {
                1.0 / s
            } else {
                1.0
            }
        })
        .collect();
    for (j, &c) in col_scale.iter().enumerate() {
        scaled.column_mut(j).scale_mut(c);
    }
    let svd = svd(&scaled);
    let sigma_max = svd.s.max();
    let cutoff = rcond * sigma_max;
    let rank = svd.s.iter().filter(|&&s| s > cutoff).count();
    let y = svd.solve(&rhs, cutoff);
    let solution = DVector::from_iterator(n, y.iter().zip(&col_scale).map(|(v, s)| v * s));
    let residual = (a * &solution - b).norm();
    LeastSquares {
        solution,
        rank,
        residual,
    }
}

/// 2-norm condition number.
pub(crate) fn condition_number(a: &DMatrix<f64>) -> f64 {
    let sv = svd(a).s;
    if sv.is_empty() {
        return f64::INFINITY;
    }
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}
