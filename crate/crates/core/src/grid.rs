//! Uniform periodic grid on the cube `[0, L)^3`.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Grid metadata for a C-ordered lattice of shape `n1 x n2 x n3`.
///
/// Index `(i1, i2, i3)` maps to flat offset `(i1*n2 + i2)*n3 + i3` and to the
/// point `x_a = i_a * L / n_a`. Frequencies along each axis are the signed
/// integers `-n_a/2 .. n_a/2 - 1` scaled by `2*pi/L`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec<T> {
    dims: [usize; 3],
    domain_length: T,
}

impl<T: Scalar> GridSpec<T> {
    /// Cubic box with edge `2*pi`, so integer lattice frequencies coincide
    /// with physical wavenumbers.
    pub fn new(dims: [usize; 3]) -> Result<Self> {
        Self::with_length(dims, T::of(2.0) * T::PI())
    }

    pub fn with_length(dims: [usize; 3], domain_length: T) -> Result<Self> {
        for &n in &dims {
            if n < 16 || !n.is_power_of_two() {
                return Err(Error::InvalidGrid(format!(
                    "dims must be powers of two >= 16, got {dims:?}"
                )));
            }
        }
        if !(domain_length.is_finite() && domain_length > T::zero()) {
            return Err(Error::InvalidGrid(format!(
                "domain length must be positive and finite, got {domain_length}"
            )));
        }
        Ok(GridSpec {
            dims,
            domain_length,
        })
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn domain_length(&self) -> T {
        self.domain_length
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn volume(&self) -> T {
        self.domain_length * self.domain_length * self.domain_length
    }

    /// Quadrature weight of one lattice cell.
    pub fn cell_volume(&self) -> T {
        self.volume() / T::of(self.len() as f64)
    }

    /// Grid spacing along `axis`.
    pub fn spacing(&self, axis: usize) -> T {
        self.domain_length / T::of(self.dims[axis] as f64)
    }

    pub fn index(&self, i: [usize; 3]) -> usize {
        (i[0] * self.dims[1] + i[1]) * self.dims[2] + i[2]
    }

    /// Physical coordinate of lattice site `i` along `axis`.
    pub fn coord(&self, axis: usize, i: usize) -> T {
        T::of(i as f64) * self.spacing(axis)
    }

    /// Signed integer frequency for storage index `i` along an axis of
    /// length `n`. The Nyquist bucket `i = n/2` is reported as `-n/2`.
    pub fn signed_freq(n: usize, i: usize) -> i64 {
        if i < n / 2 {
            i as i64
        } else {
            i as i64 - n as i64
        }
    }

    /// `2*pi/L`, the spacing of the physical frequency lattice.
    pub fn freq_unit(&self) -> T {
        T::of(2.0) * T::PI() / self.domain_length
    }

    /// Physical wavenumber along `axis` for storage index `i`.
    pub fn wavenumber(&self, axis: usize, i: usize) -> T {
        T::of(Self::signed_freq(self.dims[axis], i) as f64) * self.freq_unit()
    }

    /// Wavenumber used by spectral differentiation: identical to
    /// [`wavenumber`](Self::wavenumber) except that the unpaired Nyquist
    /// mode is dropped, which keeps derivatives of real fields real.
    pub fn deriv_wavenumber(&self, axis: usize, i: usize) -> T {
        if i == self.dims[axis] / 2 {
            T::zero()
        } else {
            self.wavenumber(axis, i)
        }
    }

    /// Largest axis Nyquist wavenumber, in physical units.
    pub fn nyquist(&self) -> T {
        let n = *self.dims.iter().max().expect("three dims") as f64;
        T::of(n / 2.0) * self.freq_unit()
    }

    /// Euclidean norm of the physical frequency vector at storage
    /// index `(i1, i2, i3)`.
    pub fn freq_norm(&self, i: [usize; 3]) -> T {
        let mut s = T::zero();
        for a in 0..3 {
            let k = self.wavenumber(a, i[a]);
            s += k * k;
        }
        s.sqrt()
    }

    pub fn same_grid(&self, other: &Self) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{self:?} vs {other:?}")))
        }
    }

    /// Visits every lattice index in C order.
    pub fn for_each_index(&self, mut f: impl FnMut(usize, [usize; 3])) {
        let [n1, n2, n3] = self.dims;
        let mut flat = 0;
        for i1 in 0..n1 {
            for i2 in 0..n2 {
                for i3 in 0..n3 {
                    f(flat, [i1, i2, i3]);
                    flat += 1;
                }
            }
        }
    }
}
