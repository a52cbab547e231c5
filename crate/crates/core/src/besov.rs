//! Besov-scale regularity diagnostics: dyadic norms, finite-difference
//! seminorms, tail and oscillation indicators, exponent estimation, and
//! the interpolation inequalities used downstream.
//!
//! Two realizations of the same smoothness scale live here. The dyadic
//! one weights per-shell norms by `2^{j alpha}`; the finite-difference one
//! takes `|y|^-alpha ||f(.+y) - f||_q` over exact lattice shifts, so no
//! interpolation error enters an exponent estimate. Constants relating
//! the two are not pinned by theory at this generality; tests treat
//! cross-checks as bounded-ratio properties, not equalities.

use crate::dyadic::{BlockDecomposition, DyadicPartition};
use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::fit::fit_line;
use crate::grid::GridSpec;
use crate::scalar::Scalar;
use crate::spectral::{derivative, from_spectral, to_spectral};

/// Default tail threshold: the top shells must fall below this fraction
/// of the peak weighted shell norm before a sequence counts as vanishing.
pub const DEFAULT_TAIL_THRESHOLD: f64 = 0.05;

/// Shells kept in the tail view of a report.
const TAIL_LEN: usize = 4;

#[derive(Clone, Debug)]
pub struct BesovReport<T> {
    pub alpha: T,
    pub p: T,
    /// Summation exponent over shells; `infinity` for the sup norm.
    pub q: T,
    /// `2^{j alpha} ||Delta_j f||_p` for every shell `-1..=j_max`.
    pub per_j: Vec<(i32, T)>,
    pub norm_value: T,
    /// The last few entries of `per_j`, highest shells last.
    pub tail: Vec<(i32, T)>,
}

fn weight<T: Scalar>(j: i32, alpha: T) -> T {
    (alpha * T::of(j as f64)).exp2()
}

/// Besov norm from the dyadic decomposition: shell norms in `L^p`,
/// weighted by `2^{j alpha}`, combined in `l^q` over shells.
pub fn dyadic_besov<T: Scalar>(
    f: &ScalarField<T>,
    alpha: T,
    p: T,
    q: T,
    part: &DyadicPartition<T>,
) -> Result<BesovReport<T>> {
    if !(q >= T::one()) {
        return Err(Error::parameter("q", format!("need q >= 1 or inf, got {q}")));
    }
    part.grid().same_grid(f.grid())?;
    let dec = part.decompose(f)?;
    per_shell_report(&dec, alpha, p, q)
}

/// Same report computed from an existing decomposition.
pub fn per_shell_report<T: Scalar>(
    dec: &BlockDecomposition<T>,
    alpha: T,
    p: T,
    q: T,
) -> Result<BesovReport<T>> {
    let mut per_j = Vec::new();
    for (j, b) in dec.iter() {
        per_j.push((j, weight(j, alpha) * b.lp_norm(p)?));
    }
    let norm_value = if q.is_infinite() {
        per_j.iter().map(|&(_, v)| v).fold(T::zero(), T::max)
    } else {
        per_j
            .iter()
            .map(|&(_, v)| v.powf(q))
            .fold(T::zero(), |a, b| a + b)
            .powf(T::one() / q)
    };
    let tail = per_j[per_j.len().saturating_sub(TAIL_LEN)..].to_vec();
    Ok(BesovReport { alpha, p, q, per_j, norm_value, tail })
}

/// Lattice shifts spanning dyadic separations from one cell up to a
/// quarter of the box, axis-aligned and diagonal at every scale.
#[derive(Clone, Debug)]
pub struct ShiftSet {
    shifts: Vec<[i64; 3]>,
}

impl ShiftSet {
    pub fn dyadic<T: Scalar>(grid: &GridSpec<T>) -> Self {
        let n_min = grid.dims().into_iter().min().unwrap();
        let mut shifts = Vec::new();
        let mut m = 1i64;
        while m <= (n_min / 4) as i64 {
            shifts.extend_from_slice(&[
                [m, 0, 0],
                [0, m, 0],
                [0, 0, m],
                [m, m, 0],
                [m, 0, m],
                [0, m, m],
                [m, m, m],
            ]);
            m *= 2;
        }
        ShiftSet { shifts }
    }

    pub fn from_shifts(shifts: Vec<[i64; 3]>) -> Result<Self> {
        if shifts.is_empty() {
            return Err(Error::parameter("shifts", "empty shift set"));
        }
        Ok(ShiftSet { shifts })
    }

    pub fn shifts(&self) -> &[[i64; 3]] {
        &self.shifts
    }
}

/// Physical length of a lattice shift.
fn shift_length<T: Scalar>(grid: &GridSpec<T>, s: [i64; 3]) -> T {
    let mut r2 = T::zero();
    for a in 0..3 {
        let d = T::of(s[a] as f64) * grid.spacing(a);
        r2 += d * d;
    }
    r2.sqrt()
}

/// `max_y |y|^-alpha ||f(.+y) - f||_q` over the shift set.
pub fn finite_difference_seminorm<T: Scalar>(
    f: &ScalarField<T>,
    alpha: T,
    q: T,
    shifts: &ShiftSet,
) -> Result<T> {
    if shifts.shifts.is_empty() {
        return Err(Error::parameter("shifts", "empty shift set"));
    }
    let mut best = T::zero();
    for &s in &shifts.shifts {
        let len = shift_length(f.grid(), s);
        let moved = f.translate([-s[0], -s[1], -s[2]]);
        let diff = moved.sub(f)?.lp_norm(q)?;
        best = best.max(diff / len.powf(alpha));
    }
    Ok(best)
}

#[derive(Clone, Debug)]
pub struct TailReport<T> {
    /// `(j, 2^{j alpha} ||Delta_j f||_p)` for `j >= 0`.
    pub seq: Vec<(i32, T)>,
    pub tau: T,
    /// Average of the top three entries, relative to the peak entry.
    pub tail_fraction: T,
    pub is_cn: bool,
}

/// Vanishing-tail indicator: does `2^{j alpha} ||Delta_j f||_p` die out
/// along the top shells. `tau` is the pass threshold on the tail-to-peak
/// fraction.
pub fn tail_indicator<T: Scalar>(
    f: &ScalarField<T>,
    alpha: T,
    p: T,
    part: &DyadicPartition<T>,
    tau: T,
) -> Result<TailReport<T>> {
    let dec = part.decompose(f)?;
    let mut seq = Vec::new();
    for (j, b) in dec.iter() {
        if j >= 0 {
            seq.push((j, weight(j, alpha) * b.lp_norm(p)?));
        }
    }
    let peak = seq.iter().map(|&(_, v)| v).fold(T::zero(), T::max);
    let top: Vec<T> = seq[seq.len().saturating_sub(3)..].iter().map(|&(_, v)| v).collect();
    let avg = top.iter().fold(T::zero(), |a, &b| a + b) / T::of(top.len() as f64);
    let tail_fraction = if peak > T::zero() { avg / peak } else { T::zero() };
    Ok(TailReport { seq, tau, tail_fraction, is_cn: tail_fraction <= tau })
}

/// Mean local oscillation at radius `eps`, scaled by `eps^-alpha`:
/// for each `eps` the ball average over lattice offsets `0 < |y| <= eps`
/// of `||f(.+y) - f||_q^q`, q-th root, times `eps^-alpha`. Cost grows as
/// `eps^3` times the grid size.
pub fn vmo_indicator<T: Scalar>(
    f: &ScalarField<T>,
    alpha: T,
    q: T,
    eps_list: &[T],
) -> Result<Vec<(T, T)>> {
    let grid = *f.grid();
    let h = (0..3).map(|a| grid.spacing(a)).fold(T::zero(), T::max);
    let quarter = grid.domain_length() / T::of(4.0);
    let mut out = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        if !(eps > h && eps < quarter) {
            return Err(Error::parameter(
                "eps",
                format!("need one cell < eps < domain/4, got {eps:e}"),
            ));
        }
        let reach = (eps / grid.spacing(0)).to_f64x().floor() as i64;
        let mut acc = T::zero();
        let mut count = 0usize;
        for s1 in -reach..=reach {
            for s2 in -reach..=reach {
                for s3 in -reach..=reach {
                    if s1 == 0 && s2 == 0 && s3 == 0 {
                        continue;
                    }
                    let s = [s1, s2, s3];
                    if shift_length(&grid, s) > eps {
                        continue;
                    }
                    let moved = f.translate([-s1, -s2, -s3]);
                    let d = moved.sub(f)?.lp_norm(q)?;
                    acc += d.powf(q);
                    count += 1;
                }
            }
        }
        if count == 0 {
            return Err(Error::parameter("eps", format!("no lattice offsets inside {eps:e}")));
        }
        let mean_osc = (acc / T::of(count as f64)).powf(T::one() / q);
        out.push((eps, mean_osc / eps.powf(alpha)));
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct AlphaEstimate<T> {
    pub alpha_hat: T,
    /// Standard error of the fitted slope.
    pub width: T,
    pub shells_used: usize,
}

/// Regularity exponent from the decay of shell norms: least-squares slope
/// of `log2 ||Delta_j f||_p` against `j` over shells `j >= 0` holding at
/// least `1e-13` of the field's norm.
pub fn estimate_regularity<T: Scalar>(
    f: &ScalarField<T>,
    p: T,
    part: &DyadicPartition<T>,
) -> Result<AlphaEstimate<T>> {
    let floor = T::of(1e-13) * f.lp_norm(p)?;
    let dec = part.decompose(f)?;
    let mut pts = Vec::new();
    for (j, b) in dec.iter() {
        if j < 0 {
            continue;
        }
        let n = b.lp_norm(p)?;
        if n > floor {
            pts.push((j as f64, n.to_f64x().log2()));
        }
    }
    if pts.len() < 4 {
        return Err(Error::InsufficientData {
            what: "active shells for exponent regression",
            need: 4,
            have: pts.len(),
        });
    }
    let fit = fit_line(&pts)?;
    Ok(AlphaEstimate {
        alpha_hat: T::of(-fit.slope),
        width: T::of(fit.slope_stderr),
        shells_used: pts.len(),
    })
}

#[derive(Clone, Debug)]
pub struct RatioReport<T> {
    pub lhs: T,
    pub rhs_shape: T,
    /// `lhs / rhs_shape`; infinite when the right side vanishes.
    pub ratio: T,
}

fn ratio_of<T: Scalar>(lhs: T, rhs: T) -> T {
    if rhs > T::zero() {
        lhs / rhs
    } else if lhs == T::zero() {
        T::zero()
    } else {
        T::infinity()
    }
}

/// `sum_j ||Delta_j f||_q` against the interpolation shape
/// `||f||_2^{(6-q)/2q} ||grad f||_2^{(3q-6)/2q}`, for `2 < q < 6`. The
/// constant is not pinned; callers test boundedness of the ratio across
/// families.
pub fn lemma26_check<T: Scalar>(
    f: &ScalarField<T>,
    q: T,
    part: &DyadicPartition<T>,
) -> Result<RatioReport<T>> {
    if !(q > T::of(2.0) && q < T::of(6.0)) {
        return Err(Error::parameter("q", format!("need 2 < q < 6, got {q}")));
    }
    let dec = part.decompose(f)?;
    let mut lhs = T::zero();
    for (_, b) in dec.iter() {
        lhs += b.lp_norm(q)?;
    }
    let s = to_spectral(f)?;
    let grad_l2 = VectorField::new([
        from_spectral(&derivative(&s, 0)),
        from_spectral(&derivative(&s, 1)),
        from_spectral(&derivative(&s, 2)),
    ])?
    .magnitude()
    .lp_norm(T::of(2.0))?;
    let l2 = f.lp_norm(T::of(2.0))?;
    let e1 = (T::of(6.0) - q) / (T::of(2.0) * q);
    let e2 = (T::of(3.0) * q - T::of(6.0)) / (T::of(2.0) * q);
    let rhs_shape = l2.powf(e1) * grad_l2.powf(e2);
    Ok(RatioReport { lhs, rhs_shape, ratio: ratio_of(lhs, rhs_shape) })
}

/// Per-shell Lebesgue interpolation of `2^{j/3} ||Delta_j f||_3` against
/// `||Delta_j f||_2^{1-p1/3} (2^{j/p1} ||Delta_j f||_m)^{p1/3}` with
/// `m = 2 p1 / (p1 - 1)`. Holder interpolation with constant exactly 1,
/// so every returned ratio is at most `1 + 1e-10`. Shells with no energy
/// are skipped.
pub fn coro13_interpolation_check<T: Scalar>(
    f: &ScalarField<T>,
    p1: T,
    part: &DyadicPartition<T>,
) -> Result<Vec<(i32, T)>> {
    if !(p1 > T::one() && p1 <= T::of(3.0)) {
        return Err(Error::parameter("p1", format!("need 1 < p1 <= 3, got {p1}")));
    }
    let m = T::of(2.0) * p1 / (p1 - T::one());
    let theta = p1 / T::of(3.0);
    let dec = part.decompose(f)?;
    let mut out = Vec::new();
    for (j, b) in dec.iter() {
        let l3 = b.lp_norm(T::of(3.0))?;
        if l3 == T::zero() {
            continue;
        }
        let lhs = weight(j, T::of(3.0).recip()) * l3;
        let l2 = b.lp_norm(T::of(2.0))?;
        let lm = b.lp_norm(m)?;
        let rhs = l2.powf(T::one() - theta) * (weight(j, p1.recip()) * lm).powf(theta);
        out.push((j, ratio_of(lhs, rhs)));
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct GnReport<T> {
    /// One ratio report per velocity component.
    pub per_component: [RatioReport<T>; 3],
}

impl<T: Scalar> GnReport<T> {
    pub fn max_ratio(&self) -> T {
        self.per_component
            .iter()
            .map(|r| r.ratio)
            .fold(T::zero(), T::max)
    }
}

/// Single-slice shape of the first Gagliardo-Nirenberg display:
/// `||f||_4 <= C ||f||_2^{(q-4)/(2q-4)} ||f||_q^{q/(2q-4)}` on the
/// constraint line `2/p + 2/q = 1`, `q >= 4`. Slice-wise this is plain
/// Lebesgue interpolation, constant 1.
pub fn gn1_check<T: Scalar>(u: &VectorField<T>, p: T, q: T) -> Result<GnReport<T>> {
    if !(q >= T::of(4.0)) {
        return Err(Error::parameter("q", format!("need q >= 4, got {q}")));
    }
    let constraint = T::of(2.0) / p + T::of(2.0) / q;
    if (constraint - T::one()).abs() > T::of(1e-9) {
        return Err(Error::parameter("p", format!("need 2/p + 2/q = 1, got {constraint}")));
    }
    let e_low = (q - T::of(4.0)) / (T::of(2.0) * q - T::of(4.0));
    let e_high = q / (T::of(2.0) * q - T::of(4.0));
    let mut per = Vec::with_capacity(3);
    for a in 0..3 {
        let f = u.comp(a);
        let lhs = f.lp_norm(T::of(4.0))?;
        let rhs = f.lp_norm(T::of(2.0))?.powf(e_low) * f.lp_norm(q)?.powf(e_high);
        per.push(RatioReport { lhs, rhs_shape: rhs, ratio: ratio_of(lhs, rhs) });
    }
    Ok(GnReport { per_component: [per[0].clone(), per[1].clone(), per[2].clone()] })
}

/// Single-slice shape of the second display:
/// `||f||_4 <= C ||grad f||_2^{3(4-q)/(2(6-q))} ||f||_q^{q/(2(6-q))}`
/// on `1/p + 3/q = 1`, `3 < q < 4`. Carries the Sobolev constant, so
/// only boundedness of the ratio is meaningful.
pub fn gn2_check<T: Scalar>(u: &VectorField<T>, p: T, q: T) -> Result<GnReport<T>> {
    if !(q > T::of(3.0) && q < T::of(4.0)) {
        return Err(Error::parameter("q", format!("need 3 < q < 4, got {q}")));
    }
    let constraint = p.recip() + T::of(3.0) / q;
    if (constraint - T::one()).abs() > T::of(1e-9) {
        return Err(Error::parameter("p", format!("need 1/p + 3/q = 1, got {constraint}")));
    }
    let denom = T::of(2.0) * (T::of(6.0) - q);
    let e_grad = T::of(3.0) * (T::of(4.0) - q) / denom;
    let e_q = q / denom;
    let mut per = Vec::with_capacity(3);
    for a in 0..3 {
        let f = u.comp(a);
        let s = to_spectral(f)?;
        let grad = VectorField::new([
            from_spectral(&derivative(&s, 0)),
            from_spectral(&derivative(&s, 1)),
            from_spectral(&derivative(&s, 2)),
        ])?
        .magnitude()
        .lp_norm(T::of(2.0))?;
        let lhs = f.lp_norm(T::of(4.0))?;
        let rhs = grad.powf(e_grad) * f.lp_norm(q)?.powf(e_q);
        per.push(RatioReport { lhs, rhs_shape: rhs, ratio: ratio_of(lhs, rhs) });
    }
    Ok(GnReport { per_component: [per[0].clone(), per[1].clone(), per[2].clone()] })
}

/// Discrete `L^p(0,T)` quadrature of per-slice values sampled at uniform
/// spacing `dt`: trapezoid weights on `v^p`, so constants come out as
/// `c * T^(1/p)` with `T = (len - 1) * dt`. `p = inf` takes the max.
/// Aggregates any per-snapshot norm into its trajectory form.
pub fn time_aggregate<T: Scalar>(per_slice: &[T], dt: T, p: T) -> Result<T> {
    if per_slice.is_empty() {
        return Err(Error::InsufficientData { what: "trajectory slices", need: 1, have: 0 });
    }
    if p.is_infinite() {
        return Ok(per_slice.iter().cloned().fold(T::zero(), T::max));
    }
    if !(p >= T::one()) {
        return Err(Error::parameter("p", format!("need p >= 1 or inf, got {p}")));
    }
    let half = T::from(0.5).unwrap();
    let last = per_slice.len() - 1;
    let sum = per_slice
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let w = if i == 0 || i == last { half } else { T::one() };
            w * v.powf(p)
        })
        .fold(T::zero(), |a, b| a + b);
    Ok((sum * dt).powf(p.recip()))
}
