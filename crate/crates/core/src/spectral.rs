//! Pseudo-spectral substrate: 3-d FFT, derivatives, Leray projection.
//!
//! Conventions (fixed across the crate):
//!
//! ```text
//!   forward:  c(k) = (1/N) sum_x f(x) exp(-i kappa . x),   N = n1 n2 n3
//!   inverse:  f(x) =       sum_k c(k) exp(+i kappa . x)
//! ```
//!
//! so `c(0)` is the field mean and differentiation is multiplication by
//! `i kappa`, with the unpaired Nyquist mode dropped to keep derivatives of
//! real input real.

use crate::error::{Error, Result};
use crate::field::{ScalarField, SpectralField, VectorField};
use crate::grid::GridSpec;
use crate::scalar::Scalar;
use num_complex::Complex;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use std::any::{Any, TypeId};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

fn plan<T: Scalar>(n: usize, forward: bool) -> Arc<dyn Fft<T>> {
    static CACHE: OnceLock<Mutex<HashMap<(TypeId, usize, bool), Box<dyn Any + Send + Sync>>>> =
        OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    let mut guard = cache.lock().expect("fft plan cache poisoned");
    let key = (TypeId::of::<T>(), n, forward);
    if let Some(entry) = guard.get(&key) {
        return entry
            .downcast_ref::<Arc<dyn Fft<T>>>()
            .expect("cache entry type")
            .clone();
    }
    let mut planner = FftPlanner::<T>::new();
    let p = if forward {
        planner.plan_fft_forward(n)
    } else {
        planner.plan_fft_inverse(n)
    };
    guard.insert(key, Box::new(p.clone()));
    p
}

/// Applies the length-`n` transform to every line of `block` along the
/// middle axis of a `[rows, n, cols]` sub-array.
fn fft_strided<T: Scalar>(block: &mut [Complex<T>], n: usize, cols: usize, fft: &dyn Fft<T>) {
    let rows = block.len() / (n * cols);
    let mut line = vec![Complex::new(T::zero(), T::zero()); n];
    for r in 0..rows {
        let base = r * n * cols;
        for c in 0..cols {
            for j in 0..n {
                line[j] = block[base + j * cols + c];
            }
            fft.process(&mut line);
            for j in 0..n {
                block[base + j * cols + c] = line[j];
            }
        }
    }
}

fn transform3<T: Scalar>(grid: &GridSpec<T>, buf: &mut [Complex<T>], forward: bool) {
    let [n1, n2, n3] = grid.dims();
    let p1 = plan::<T>(n1, forward);
    let p2 = plan::<T>(n2, forward);
    let p3 = plan::<T>(n3, forward);
    // Axes 1 and 2 stay inside one i1-block, so blocks transform
    // independently; axis 0 lines cross all blocks and run afterwards.
    buf.par_chunks_mut(n2 * n3).for_each(|block| {
        p3.process(block);
        fft_strided(block, n2, n3, p2.as_ref());
    });
    fft_strided(buf, n1, n2 * n3, p1.as_ref());
}

/// Forward transform. Errors if the input contains non-finite samples.
pub fn to_spectral<T: Scalar>(f: &ScalarField<T>) -> Result<SpectralField<T>> {
    let grid = *f.grid();
    let mut buf = Vec::with_capacity(grid.len());
    let mut finite = true;
    for &v in f.values() {
        finite &= v.is_finite();
        buf.push(Complex::new(v, T::zero()));
    }
    if !finite {
        return Err(Error::NonFinite("transform input".into()));
    }
    transform3(&grid, &mut buf, true);
    let norm = T::one() / T::of(grid.len() as f64);
    for c in buf.iter_mut() {
        *c = *c * norm;
    }
    Ok(SpectralField::from_coeffs_unchecked(grid, buf))
}

/// Inverse transform of conjugate-symmetric coefficients; the imaginary
/// residue (rounding noise for Hermitian input) is discarded.
pub fn from_spectral<T: Scalar>(s: &SpectralField<T>) -> ScalarField<T> {
    let grid = *s.grid();
    let mut buf = s.coeffs().to_vec();
    transform3(&grid, &mut buf, false);
    let values = buf.into_iter().map(|c| c.re).collect();
    ScalarField::from_values_unchecked(grid, values)
}

pub fn to_spectral_vector<T: Scalar>(u: &VectorField<T>) -> Result<[SpectralField<T>; 3]> {
    Ok([
        to_spectral(u.comp(0))?,
        to_spectral(u.comp(1))?,
        to_spectral(u.comp(2))?,
    ])
}

pub fn from_spectral_vector<T: Scalar>(s: &[SpectralField<T>; 3]) -> VectorField<T> {
    VectorField::new([
        from_spectral(&s[0]),
        from_spectral(&s[1]),
        from_spectral(&s[2]),
    ])
    .expect("components share the grid")
}

/// Spectral derivative along `axis`: multiplication by `i kappa_axis`.
pub fn derivative<T: Scalar>(s: &SpectralField<T>, axis: usize) -> SpectralField<T> {
    assert!(axis < 3, "axis out of range");
    let grid = *s.grid();
    let mut out = s.clone();
    let [n1, n2, n3] = grid.dims();
    let k1: Vec<T> = (0..n1).map(|i| grid.deriv_wavenumber(0, i)).collect();
    let k2: Vec<T> = (0..n2).map(|i| grid.deriv_wavenumber(1, i)).collect();
    let k3: Vec<T> = (0..n3).map(|i| grid.deriv_wavenumber(2, i)).collect();
    let ks = [&k1, &k2, &k3];
    let coeffs = out.coeffs_mut();
    let mut flat = 0;
    for i1 in 0..n1 {
        for i2 in 0..n2 {
            for i3 in 0..n3 {
                let idx = [i1, i2, i3];
                let k = ks[axis][idx[axis]];
                let c = coeffs[flat];
                coeffs[flat] = Complex::new(-c.im * k, c.re * k);
                flat += 1;
            }
        }
    }
    out
}

pub fn gradient<T: Scalar>(s: &SpectralField<T>) -> [SpectralField<T>; 3] {
    [derivative(s, 0), derivative(s, 1), derivative(s, 2)]
}

/// `sum_a i kappa_a u_a(k)`, the spectral divergence.
pub fn divergence_spectral<T: Scalar>(u: &[SpectralField<T>; 3]) -> SpectralField<T> {
    let grid = *u[0].grid();
    let mut out = SpectralField::zeros(grid);
    for a in 0..3 {
        let d = derivative(&u[a], a);
        for (o, c) in out.coeffs_mut().iter_mut().zip(d.coeffs()) {
            *o += *c;
        }
    }
    out
}

/// Physical-space divergence via the spectral route.
pub fn divergence<T: Scalar>(u: &VectorField<T>) -> Result<ScalarField<T>> {
    let s = to_spectral_vector(u)?;
    Ok(from_spectral(&divergence_spectral(&s)))
}

/// Largest `|kappa . u(k)|` over the lattice; scale against `max |u(k)|`.
pub fn max_spectral_divergence<T: Scalar>(u: &[SpectralField<T>; 3]) -> T {
    divergence_spectral(u).max_norm()
}

/// In-place Leray projection `u -> u - kappa (kappa . u)/|kappa|^2` on the
/// derivative frequency lattice; the mean mode passes through. Idempotent,
/// and afterwards the spectral divergence vanishes identically because the
/// divergence operator uses the same lattice.
pub fn leray_project_spectral<T: Scalar>(u: &mut [SpectralField<T>; 3]) {
    let grid = *u[0].grid();
    let [n1, n2, n3] = grid.dims();
    let k1: Vec<T> = (0..n1).map(|i| grid.deriv_wavenumber(0, i)).collect();
    let k2: Vec<T> = (0..n2).map(|i| grid.deriv_wavenumber(1, i)).collect();
    let k3: Vec<T> = (0..n3).map(|i| grid.deriv_wavenumber(2, i)).collect();
    let mut flat = 0;
    for i1 in 0..n1 {
        for i2 in 0..n2 {
            for i3 in 0..n3 {
                let k = [k1[i1], k2[i2], k3[i3]];
                let k2n = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
                if k2n > T::zero() {
                    let mut dot = Complex::new(T::zero(), T::zero());
                    for a in 0..3 {
                        dot = dot + u[a].coeffs()[flat] * k[a];
                    }
                    let f = dot / k2n;
                    for a in 0..3 {
                        let c = u[a].coeffs()[flat];
                        u[a].coeffs_mut()[flat] = c - f * k[a];
                    }
                }
                flat += 1;
            }
        }
    }
}

/// Physical-space Leray projection; the result is flagged solenoidal.
pub fn leray_project<T: Scalar>(u: &VectorField<T>) -> Result<VectorField<T>> {
    let mut s = to_spectral_vector(u)?;
    leray_project_spectral(&mut s);
    Ok(from_spectral_vector(&s).mark_divergence_free())
}

/// Verifies `max |kappa . u(k)| <= tol * max |u(k)|`; used as the
/// precondition guard of the flux diagnostics.
pub fn check_divergence_free<T: Scalar>(s: &[SpectralField<T>; 3], tol: T) -> Result<()> {
    let max_div = max_spectral_divergence(s).to_f64x();
    let scale = s
        .iter()
        .fold(T::zero(), |m, c| m.max(c.max_norm()))
        .to_f64x()
        * s[0].grid().nyquist().to_f64x();
    if max_div > tol.to_f64x() * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::NotDivergenceFree {
            max_div,
            tol: tol.to_f64x() * scale,
        });
    }
    Ok(())
}

/// `int |grad u|^2 dV = vol sum_k |kappa|^2 |u(k)|^2`, by Parseval.
pub fn gradient_l2_squared<T: Scalar>(u: &VectorField<T>) -> Result<T> {
    let grid = *u.grid();
    let s = to_spectral_vector(u)?;
    let mut acc = T::zero();
    for c in &s {
        grid.for_each_index(|flat, idx| {
            let k1 = grid.deriv_wavenumber(0, idx[0]);
            let k2 = grid.deriv_wavenumber(1, idx[1]);
            let k3 = grid.deriv_wavenumber(2, idx[2]);
            let k2sum = k1 * k1 + k2 * k2 + k3 * k3;
            acc += k2sum * c.coeffs()[flat].norm_sqr();
        });
    }
    Ok(acc * grid.volume())
}

/// Relative Parseval residual `|int f^2 dV - vol * sum |c|^2| / int f^2 dV`.
pub fn parseval_residual<T: Scalar>(f: &ScalarField<T>, s: &SpectralField<T>) -> Result<T> {
    let phys = f.lp_norm(T::of(2.0))?;
    let phys2 = phys * phys;
    let spec2 = s.l2_power() * s.grid().volume();
    if phys2 == T::zero() {
        return Ok(spec2.abs());
    }
    Ok((phys2 - spec2).abs() / phys2)
}
