//! The compactly supported smooth bump `exp(-1/(1-t^2))` and shapes built
//! from it: a normalized smooth step (its antiderivative) and the radial
//! low-pass profile used by the dyadic cutoffs.

use std::sync::OnceLock;

/// `exp(-1/(1-t^2))` on `(-1, 1)`, zero outside. All derivatives vanish at
/// the endpoints, which is what makes the assembled cutoffs smooth.
pub fn bump(t: f64) -> f64 {
    let t2 = t * t;
    if t2 >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - t2)).exp()
    }
}

const TABLE_N: usize = 8192;

struct StepTable {
    /// cumulative integral of `bump` at the nodes, normalized to end at 1
    values: Vec<f64>,
    /// normalized integrand at the nodes, the interpolant slope
    slopes: Vec<f64>,
}

fn table() -> &'static StepTable {
    static TABLE: OnceLock<StepTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        let h = 2.0 / TABLE_N as f64;
        let mut raw = Vec::with_capacity(TABLE_N + 1);
        raw.push(0.0);
        let mut acc = 0.0;
        for i in 0..TABLE_N {
            let a = -1.0 + i as f64 * h;
            // Simpson on each interval; the integrand is smooth and flat at
            // the endpoints, so this converges far below measurement noise.
            acc += h / 6.0 * (bump(a) + 4.0 * bump(a + 0.5 * h) + bump(a + h));
            raw.push(acc);
        }
        let total = acc;
        let values = raw.into_iter().map(|v| v / total).collect();
        let slopes = (0..=TABLE_N)
            .map(|i| bump(-1.0 + i as f64 * h) / total)
            .collect();
        StepTable { values, slopes }
    })
}

/// Smooth monotone step: 0 at `x <= -1`, 1 at `x >= 1`, the normalized
/// antiderivative of [`bump`] in between. Cubic Hermite interpolation on a
/// dense table; interpolation error is far below 1e-12.
pub fn smooth_step(x: f64) -> f64 {
    if x <= -1.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let t = table();
    let h = 2.0 / TABLE_N as f64;
    let pos = (x + 1.0) / h;
    let cell = (pos.floor() as usize).min(TABLE_N - 1);
    let s = pos - cell as f64;
    let (y0, y1) = (t.values[cell], t.values[cell + 1]);
    let (d0, d1) = (t.slopes[cell] * h, t.slopes[cell + 1] * h);
    let s2 = s * s;
    let s3 = s2 * s;
    let y = (2.0 * s3 - 3.0 * s2 + 1.0) * y0
        + (s3 - 2.0 * s2 + s) * d0
        + (-2.0 * s3 + 3.0 * s2) * y1
        + (s3 - s2) * d1;
    y.clamp(0.0, 1.0)
}

/// Radius where the radial low-pass profile stops being 1.
pub const PROFILE_ONE: f64 = 0.75;
/// Radius where the radial low-pass profile reaches 0.
pub const PROFILE_ZERO: f64 = 4.0 / 3.0;

/// Radial profile of the dyadic low-pass: identically 1 on
/// `r <= 3/4`, identically 0 on `r >= 4/3`, a smooth monotone descent in
/// between. The difference `profile(r/2) - profile(r)` is then supported on
/// the shell `3/4 <= r <= 8/3`.
pub fn radial_profile(r: f64) -> f64 {
    if r <= PROFILE_ONE {
        1.0
    } else if r >= PROFILE_ZERO {
        0.0
    } else {
        let x = 2.0 * (r - PROFILE_ONE) / (PROFILE_ZERO - PROFILE_ONE) - 1.0;
        1.0 - smooth_step(x)
    }
}
