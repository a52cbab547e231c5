//! Brute-force reference implementations.
//!
//! Everything here trades speed for independence: direct summation instead
//! of FFTs, explicit quadrature loops instead of multiplier algebra. The
//! fast paths are validated against these on small grids, and the
//! verification suites call them where a second, unrelated evaluation of an
//! identity is wanted.

use crate::field::{ScalarField, SpectralField};
use crate::scalar::Scalar;
use num_complex::Complex;

/// Forward transform by direct summation, `O(N^2)`. Small grids only.
pub fn slow_dft<T: Scalar>(f: &ScalarField<T>) -> SpectralField<T> {
    let grid = *f.grid();
    let [n1, n2, n3] = grid.dims();
    let tau = T::of(2.0) * T::PI();
    let mut out = SpectralField::zeros(grid);
    let norm = T::one() / T::of(grid.len() as f64);
    grid.for_each_index(|flat_k, k| {
        let mut acc = Complex::new(T::zero(), T::zero());
        grid.for_each_index(|flat_x, x| {
            // kappa . x depends only on the integer phase
            // k1 i1/n1 + k2 i2/n2 + k3 i3/n3, reduced mod 1.
            let phase = T::of(
                (k[0] * x[0]) as f64 / n1 as f64
                    + (k[1] * x[1]) as f64 / n2 as f64
                    + (k[2] * x[2]) as f64 / n3 as f64,
            );
            let angle = -tau * phase.fract();
            let (s, c) = angle.sin_cos();
            acc = acc + Complex::new(c, s) * f.values()[flat_x];
        });
        out.coeffs_mut()[flat_k] = acc * norm;
    });
    out
}

/// Circular quadrature convolution `(f * k)(x) = sum_y f(x-y) k(y) dV`,
/// evaluated by direct lattice summation. `O(N^2)`.
pub fn slow_convolution<T: Scalar>(f: &ScalarField<T>, kernel: &ScalarField<T>) -> ScalarField<T> {
    let grid = *f.grid();
    let [n1, n2, n3] = grid.dims();
    let dv = grid.cell_volume();
    let mut out = vec![T::zero(); grid.len()];
    grid.for_each_index(|flat_x, x| {
        let mut acc = T::zero();
        grid.for_each_index(|flat_y, y| {
            let src = [
                (x[0] + n1 - y[0]) % n1,
                (x[1] + n2 - y[1]) % n2,
                (x[2] + n3 - y[2]) % n3,
            ];
            acc += f.values()[grid.index(src)] * kernel.values()[flat_y];
        });
        out[flat_x] = acc * dv;
    });
    ScalarField::from_values_unchecked(grid, out)
}
