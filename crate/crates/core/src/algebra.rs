//! Fixed-size matrix aliases, cross-product helpers and finite-difference
//! stencils shared by every module.

use nalgebra::{DMatrix, SMatrix, SVector};

pub type Vector3 = nalgebra::Vector3<f64>;
pub type Vector4 = nalgebra::Vector4<f64>;
pub type Vector6 = SVector<f64, 6>;
pub type Vector12 = SVector<f64, 12>;
pub type Matrix3 = nalgebra::Matrix3<f64>;
pub type Matrix4 = nalgebra::Matrix4<f64>;
pub type Matrix6 = SMatrix<f64, 6, 6>;
pub type Matrix12 = SMatrix<f64, 12, 12>;

/// Skew-symmetric matrix `û` with `û ζ = u × ζ`.
pub fn hat(u: &Vector3) -> Matrix3 {
    Matrix3::new(0.0, -u[2], u[1], u[2], 0.0, -u[0], -u[1], u[0], 0.0)
}

/// Inverse of [`hat`]. Only the skew part of `m` is used.
pub fn vee(m: &Matrix3) -> Vector3 {
    Vector3::new(
        0.5 * (m[(2, 1)] - m[(1, 2)]),
        0.5 * (m[(0, 2)] - m[(2, 0)]),
        0.5 * (m[(1, 0)] - m[(0, 1)]),
    )
}

pub fn diag6(d: &[f64; 6]) -> Matrix6 {
    Matrix6::from_diagonal(&Vector6::from_column_slice(d))
}

pub fn diag3(a: f64, b: f64, c: f64) -> Matrix3 {
    Matrix3::from_diagonal(&Vector3::new(a, b, c))
}

/// 12x12 block matrix `[a b; c d]` from 6x6 blocks.
pub fn blocks(a: &Matrix6, b: &Matrix6, c: &Matrix6, d: &Matrix6) -> Matrix12 {
    let mut m = Matrix12::zeros();
    m.fixed_view_mut::<6, 6>(0, 0).copy_from(a);
    m.fixed_view_mut::<6, 6>(0, 6).copy_from(b);
    m.fixed_view_mut::<6, 6>(6, 0).copy_from(c);
    m.fixed_view_mut::<6, 6>(6, 6).copy_from(d);
    m
}

/// Maximum absolute row sum.
pub fn norm_inf<const R: usize, const C: usize>(m: &SMatrix<f64, R, C>) -> f64 {
    m.row_iter()
        .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Largest eigenvalue of a symmetric matrix (symmetrised first).
pub fn max_eigenvalue<const N: usize>(m: &SMatrix<f64, N, N>) -> f64 {
    let sym = 0.5 * (m + m.transpose());
    DMatrix::from_column_slice(N, N, sym.as_slice()).symmetric_eigenvalues().max()
}

/// Spectral norm.
pub fn norm2<const N: usize>(m: &SMatrix<f64, N, N>) -> f64 {
    DMatrix::from_column_slice(N, N, m.as_slice()).singular_values().max()
}

/// Finite-difference weights for the `order`-th derivative at offset 0 using
/// the given stencil offsets (in units of the grid spacing). Fornberg's
/// recursion.
pub fn fd_weights(offsets: &[f64], order: usize) -> Vec<f64> {
    let n = offsets.len();
    let mut c = vec![vec![0.0; order + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = offsets[0];
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = offsets[i];
        for j in 0..i {
            let c3 = offsets[i] - offsets[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[order]).collect()
}

/// First derivative of uniformly sampled data: centred second-order in the
/// interior, one-sided second-order at both ends.
pub fn gradient<T>(values: &[T], h: f64) -> Vec<T>
where
    T: Copy + std::ops::Sub<Output = T> + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T>,
{
    let n = values.len();
    assert!(n >= 3, "gradient needs at least three samples");
    let mut out = Vec::with_capacity(n);
    out.push((values[0] * -3.0 + values[1] * 4.0 - values[2]) * (0.5 / h));
    for i in 1..n - 1 {
        out.push((values[i + 1] - values[i - 1]) * (0.5 / h));
    }
    out.push((values[n - 1] * 3.0 - values[n - 2] * 4.0 + values[n - 3]) * (0.5 / h));
    out
}

/// First derivative at the first (or, with `from_end`, the last) sample using
/// a one-sided stencil of `points` samples.
pub fn endpoint_derivative<T>(values: &[T], h: f64, points: usize, from_end: bool) -> T
where
    T: Copy + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T>,
{
    let n = values.len();
    let points = points.min(n);
    let offsets: Vec<f64> = (0..points)
        .map(|k| if from_end { -(k as f64) } else { k as f64 })
        .collect();
    let w = fd_weights(&offsets, 1);
    let sample = |k: usize| if from_end { values[n - 1 - k] } else { values[k] };
    let mut acc = sample(0) * (w[0] / h);
    for (k, wk) in w.iter().enumerate().skip(1) {
        acc = acc + sample(k) * (wk / h);
    }
    acc
}

/// First derivative from `points`-sample stencils, centred where the data
/// allow and shifted towards the interior near the ends.
pub fn gradient_wide<T>(values: &[T], h: f64, points: usize) -> Vec<T>
where
    T: Copy + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T>,
{
    let n = values.len();
    let p = points.min(n);
    assert!(p >= 2, "need at least two samples");
    (0..n)
        .map(|i| {
            let start = i.saturating_sub(p / 2).min(n - p);
            let offsets: Vec<f64> = (start..start + p).map(|k| k as f64 - i as f64).collect();
            let w = fd_weights(&offsets, 1);
            let mut acc = values[start] * (w[0] / h);
            for (k, wk) in w.iter().enumerate().skip(1) {
                acc = acc + values[start + k] * (wk / h);
            }
            acc
        })
        .collect()
}

/// Composite trapezoid rule on a uniform grid.
pub fn trapezoid(values: &[f64], h: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => h * (0.5 * (values[0] + values[n - 1]) + values[1..n - 1].iter().sum::<f64>()),
    }
}
