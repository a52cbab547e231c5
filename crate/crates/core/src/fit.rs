//! Small shared numerics: compensated summation and least-squares lines.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Blocked pairwise summation of `f(x)` over a slice. Error grows like
/// `eps * log n` instead of `eps * n`, which keeps 1e-12 grade identity
/// checks meaningful on multi-million point lattices.
pub fn pairwise_sum<T: Scalar, U>(xs: &[U], f: impl Fn(&U) -> T + Copy) -> T {
    const BLOCK: usize = 128;
    if xs.len() <= BLOCK {
        let mut s = T::zero();
        for x in xs {
            s += f(x);
        }
        s
    } else {
        let mid = xs.len() / 2;
        pairwise_sum(&xs[..mid], f) + pairwise_sum(&xs[mid..], f)
    }
}

/// Ordinary least squares fit `y ~ intercept + slope * x`.
#[derive(Clone, Copy, Debug)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope; zero when the fit is exact or has no
    /// spare degrees of freedom.
    pub slope_stderr: f64,
    pub points: usize,
}

pub fn fit_line(points: &[(f64, f64)]) -> Result<LineFit> {
    let n = points.len();
    if n < 2 {
        return Err(Error::InsufficientData {
            what: "least-squares line",
            need: 2,
            have: n,
        });
    }
    let nf = n as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for &(x, y) in points {
        sxx += (x - mean_x) * (x - mean_x);
        sxy += (x - mean_x) * (y - mean_y);
    }
    if sxx == 0.0 {
        return Err(Error::InsufficientData {
            what: "least-squares line (distinct abscissae)",
            need: 2,
            have: 1,
        });
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let slope_stderr = if n > 2 {
        let ss_res: f64 = points
            .iter()
            .map(|&(x, y)| {
                let r = y - intercept - slope * x;
                r * r
            })
            .sum();
        (ss_res / (nf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(LineFit {
        slope,
        intercept,
        slope_stderr,
        points: n,
    })
}

/// Least-squares slope of `log2 y` against `x`; entries with `y <= floor`
/// are dropped. Used for dyadic decay measurements.
pub fn fit_log2_decay(points: &[(f64, f64)], floor: f64) -> Result<LineFit> {
    let filtered: Vec<(f64, f64)> = points
        .iter()
        .filter(|&&(_, y)| y > floor && y.is_finite())
        .map(|&(x, y)| (x, y.log2()))
        .collect();
    fit_line(&filtered)
}
