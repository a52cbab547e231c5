//! Physical and spectral field containers.

use crate::error::{Error, Result};
use crate::fit::pairwise_sum;
use crate::grid::GridSpec;
use crate::scalar::Scalar;
use num_complex::Complex;

/// Real-valued samples on the lattice of a [`GridSpec`], C order.
#[derive(Clone, Debug)]
pub struct ScalarField<T> {
    grid: GridSpec<T>,
    values: Vec<T>,
}

impl<T: Scalar> ScalarField<T> {
    pub fn zeros(grid: GridSpec<T>) -> Self {
        ScalarField {
            grid,
            values: vec![T::zero(); grid.len()],
        }
    }

    /// Wraps externally produced samples, rejecting wrong lengths and
    /// non-finite entries.
    pub fn from_values(grid: GridSpec<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "expected {} samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("field samples".into()));
        }
        Ok(ScalarField { grid, values })
    }

    pub(crate) fn from_values_unchecked(grid: GridSpec<T>, values: Vec<T>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        ScalarField { grid, values }
    }

    /// Samples `f` at the lattice points.
    pub fn from_fn(grid: GridSpec<T>, mut f: impl FnMut([T; 3]) -> T) -> Self {
        let mut values = vec![T::zero(); grid.len()];
        grid.for_each_index(|flat, idx| {
            let x = [
                grid.coord(0, idx[0]),
                grid.coord(1, idx[1]),
                grid.coord(2, idx[2]),
            ];
            values[flat] = f(x);
        });
        ScalarField { grid, values }
    }

    pub fn grid(&self) -> &GridSpec<T> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    /// `L^p` norm by the rectangle rule, `(sum |f|^p dV)^(1/p)`; `p` may be
    /// any real `>= 1` or `+inf` for the lattice maximum. The rule is
    /// spectrally accurate for smooth periodic integrands.
    pub fn lp_norm(&self, p: T) -> Result<T> {
        if p.is_infinite() && p > T::zero() {
            return Ok(self
                .values
                .iter()
                .fold(T::zero(), |m, &v| m.max(v.abs())));
        }
        if !(p.is_finite() && p >= T::one()) {
            return Err(Error::parameter("p", format!("need p >= 1 or inf, got {p}")));
        }
        let sum = if p == T::one() {
            pairwise_sum(&self.values, |&v| v.abs())
        } else if p == T::of(2.0) {
            pairwise_sum(&self.values, |&v| v * v)
        } else if p == T::of(3.0) {
            pairwise_sum(&self.values, |&v| {
                let a = v.abs();
                a * a * a
            })
        } else if p == T::of(4.0) {
            pairwise_sum(&self.values, |&v| {
                let s = v * v;
                s * s
            })
        } else {
            pairwise_sum(&self.values, |&v| v.abs().powf(p))
        };
        Ok((sum * self.grid.cell_volume()).powf(T::one() / p))
    }

    /// Lattice mean; equals the rectangle-rule average.
    pub fn mean(&self) -> T {
        pairwise_sum(&self.values, |&v| v) / T::of(self.values.len() as f64)
    }

    /// Rectangle-rule inner product `int f g dV`.
    pub fn inner(&self, other: &Self) -> Result<T> {
        self.grid.same_grid(&other.grid)?;
        let s = pairwise_sum_zip(&self.values, &other.values);
        Ok(s * self.grid.cell_volume())
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        ScalarField {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        self.grid.same_grid(&other.grid)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(ScalarField {
            grid: self.grid,
            values,
        })
    }

    pub fn pointwise_mul(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn scale(&self, c: T) -> Self {
        self.map(|v| v * c)
    }

    /// Circular lattice translation: `result(x) = self(x - shift_cells)`.
    pub fn translate(&self, shift_cells: [i64; 3]) -> Self {
        let [n1, n2, n3] = self.grid.dims();
        let mut out = vec![T::zero(); self.values.len()];
        let wrap = |i: usize, s: i64, n: usize| -> usize {
            (((i as i64 - s) % n as i64 + n as i64) % n as i64) as usize
        };
        self.grid.for_each_index(|flat, idx| {
            let src = [
                wrap(idx[0], shift_cells[0], n1),
                wrap(idx[1], shift_cells[1], n2),
                wrap(idx[2], shift_cells[2], n3),
            ];
            out[flat] = self.values[self.grid.index(src)];
        });
        ScalarField {
            grid: self.grid,
            values: out,
        }
    }
}

fn pairwise_sum_zip<T: Scalar>(a: &[T], b: &[T]) -> T {
    // Blocked pairwise accumulation, same scheme as `pairwise_sum`.
    const BLOCK: usize = 128;
    if a.len() <= BLOCK {
        let mut s = T::zero();
        for (&x, &y) in a.iter().zip(b) {
            s += x * y;
        }
        s
    } else {
        let mid = a.len() / 2;
        pairwise_sum_zip(&a[..mid], &b[..mid]) + pairwise_sum_zip(&a[mid..], &b[mid..])
    }
}

/// Three-component velocity field on a common grid.
#[derive(Clone, Debug)]
pub struct VectorField<T> {
    comps: [ScalarField<T>; 3],
    divergence_free: bool,
}

impl<T: Scalar> VectorField<T> {
    pub fn new(comps: [ScalarField<T>; 3]) -> Result<Self> {
        comps[0].grid().same_grid(comps[1].grid())?;
        comps[0].grid().same_grid(comps[2].grid())?;
        Ok(VectorField {
            comps,
            divergence_free: false,
        })
    }

    pub fn zeros(grid: GridSpec<T>) -> Self {
        VectorField {
            comps: [
                ScalarField::zeros(grid),
                ScalarField::zeros(grid),
                ScalarField::zeros(grid),
            ],
            divergence_free: false,
        }
    }

    pub fn grid(&self) -> &GridSpec<T> {
        self.comps[0].grid()
    }

    pub fn comp(&self, i: usize) -> &ScalarField<T> {
        &self.comps[i]
    }

    pub fn comp_mut(&mut self, i: usize) -> &mut ScalarField<T> {
        &mut self.comps[i]
    }

    pub fn comps(&self) -> &[ScalarField<T>; 3] {
        &self.comps
    }

    pub fn into_comps(self) -> [ScalarField<T>; 3] {
        self.comps
    }

    /// Set by constructions that guarantee a solenoidal field.
    pub fn divergence_free(&self) -> bool {
        self.divergence_free
    }

    pub(crate) fn mark_divergence_free(mut self) -> Self {
        self.divergence_free = true;
        self
    }

    /// Pointwise Euclidean magnitude.
    pub fn magnitude(&self) -> ScalarField<T> {
        let g = *self.grid();
        let mut values = vec![T::zero(); g.len()];
        for (i, v) in values.iter_mut().enumerate() {
            let a = self.comps[0].values()[i];
            let b = self.comps[1].values()[i];
            let c = self.comps[2].values()[i];
            *v = (a * a + b * b + c * c).sqrt();
        }
        ScalarField::from_values_unchecked(g, values)
    }

    /// Magnitude of the two components transverse to `vertical`; with the
    /// default `vertical = 2` this is the horizontal speed.
    pub fn transverse_magnitude(&self, vertical: usize) -> ScalarField<T> {
        let [h1, h2] = match vertical {
            0 => [1, 2],
            1 => [0, 2],
            _ => [0, 1],
        };
        let g = *self.grid();
        let mut values = vec![T::zero(); g.len()];
        for (i, v) in values.iter_mut().enumerate() {
            let a = self.comps[h1].values()[i];
            let b = self.comps[h2].values()[i];
            *v = (a * a + b * b).sqrt();
        }
        ScalarField::from_values_unchecked(g, values)
    }

    pub fn max_abs(&self) -> T {
        self.comps.iter().fold(T::zero(), |m, c| {
            c.values().iter().fold(m, |m, &v| m.max(v.abs()))
        })
    }

    /// Relabels axes so that `vertical` becomes the third axis, cyclically;
    /// field data and component roles are permuted together, so the result
    /// describes the same flow in relabeled coordinates. Requires a cubic
    /// grid.
    pub fn with_vertical_axis_last(&self, vertical: usize) -> Result<Self> {
        if vertical == 2 {
            return Ok(self.clone());
        }
        let [n1, n2, n3] = self.grid().dims();
        if n1 != n2 || n2 != n3 {
            return Err(Error::InvalidGrid(
                "axis relabeling needs a cubic grid".into(),
            ));
        }
        // Cyclic permutation sigma with sigma(vertical) = 2 preserves
        // orientation, so the relabeled field is again a velocity field.
        let perm: [usize; 3] = match vertical {
            0 => [1, 2, 0],
            1 => [2, 0, 1],
            _ => unreachable!(),
        };
        let g = *self.grid();
        let mut out = [
            vec![T::zero(); g.len()],
            vec![T::zero(); g.len()],
            vec![T::zero(); g.len()],
        ];
        g.for_each_index(|flat, idx| {
            let mut dst = [0usize; 3];
            for a in 0..3 {
                dst[perm[a]] = idx[a];
            }
            let d = g.index(dst);
            for c in 0..3 {
                out[perm[c]][d] = self.comps[c].values()[flat];
            }
        });
        let comps = out.map(|v| ScalarField::from_values_unchecked(g, v));
        Ok(VectorField {
            comps,
            divergence_free: self.divergence_free,
        })
    }
}

/// Fourier coefficients of a real field, full complex storage, C order.
///
/// The forward transform carries the `1/(n1 n2 n3)` factor, so the `k = 0`
/// coefficient is the field mean and coefficients of a real field satisfy
/// `c(-k) = conj(c(k))`.
#[derive(Clone, Debug)]
pub struct SpectralField<T> {
    grid: GridSpec<T>,
    coeffs: Vec<Complex<T>>,
}

impl<T: Scalar> SpectralField<T> {
    pub fn zeros(grid: GridSpec<T>) -> Self {
        SpectralField {
            grid,
            coeffs: vec![Complex::new(T::zero(), T::zero()); grid.len()],
        }
    }

    pub(crate) fn from_coeffs_unchecked(grid: GridSpec<T>, coeffs: Vec<Complex<T>>) -> Self {
        debug_assert_eq!(coeffs.len(), grid.len());
        SpectralField { grid, coeffs }
    }

    pub fn grid(&self) -> &GridSpec<T> {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex<T>] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.coeffs
    }

    fn storage_index(&self, k: [i64; 3]) -> Option<usize> {
        let dims = self.grid.dims();
        let mut idx = [0usize; 3];
        for a in 0..3 {
            let n = dims[a] as i64;
            if k[a] < -n / 2 || k[a] >= n / 2 {
                return None;
            }
            idx[a] = k[a].rem_euclid(n) as usize;
        }
        Some(self.grid.index(idx))
    }

    /// Coefficient at signed integer frequency `k`, zero outside storage.
    pub fn coeff_at(&self, k: [i64; 3]) -> Complex<T> {
        self.storage_index(k)
            .map(|i| self.coeffs[i])
            .unwrap_or_else(|| Complex::new(T::zero(), T::zero()))
    }

    /// Sets `c(k)` and `c(-k) = conj(c(k))` together.
    pub fn set_pair(&mut self, k: [i64; 3], c: Complex<T>) {
        if let Some(i) = self.storage_index(k) {
            self.coeffs[i] = c;
        }
        let neg = [-k[0], -k[1], -k[2]];
        if neg != k {
            if let Some(i) = self.storage_index(neg) {
                self.coeffs[i] = c.conj();
            }
        }
    }

    /// Largest deviation from conjugate symmetry, `max |c(k) - conj(c(-k))|`.
    pub fn hermitian_residual(&self) -> T {
        let dims = self.grid.dims();
        let mut worst = T::zero();
        self.grid.for_each_index(|flat, idx| {
            let neg = [
                (dims[0] - idx[0]) % dims[0],
                (dims[1] - idx[1]) % dims[1],
                (dims[2] - idx[2]) % dims[2],
            ];
            let other = self.coeffs[self.grid.index(neg)];
            let d = self.coeffs[flat] - other.conj();
            worst = worst.max(d.norm());
        });
        worst
    }

    /// `sum_k |c(k)|^2`; Parseval pairs this with `(1/vol) int |f|^2`.
    pub fn l2_power(&self) -> T {
        pairwise_sum(&self.coeffs, |c| c.norm_sqr())
    }

    /// Multiplies every coefficient by `m(|kappa|)`, a radial multiplier.
    pub fn apply_radial(&mut self, m: impl Fn(T) -> T) {
        let g = self.grid;
        g.for_each_index(|flat, idx| {
            let w = m(g.freq_norm(idx));
            self.coeffs[flat] = self.coeffs[flat] * w;
        });
    }

    pub fn max_norm(&self) -> T {
        self.coeffs.iter().fold(T::zero(), |m, c| m.max(c.norm()))
    }
}
