use nalgebra::DVector;

use crate::lsq::{self, LeastSquares, LmOptions};
use crate::{Error, Result};

/// Minimum number of samples for the histogram Gaussian fit.
const MIN_GAUSSIAN_SAMPLES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitMethod {
    Gaussian,
    Moments,
    /// All samples identical.
    Degenerate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LifetimeDistribution {
    pub samples: Vec<f64>,
    /// Gaussian-fit centre when `method` is `Gaussian`, else the sample mean.
    pub mean: f64,
    pub std_dev: f64,
    pub best: f64,
    pub sample_mean: f64,
    pub sample_std: f64,
    pub method: FitMethod,
    pub bin_width: f64,
    /// (bin centre, count)
    pub histogram: Vec<(f64, usize)>,
}

struct GaussProblem<'a> {
    x: &'a [f64],
    y: &'a [f64],
}

impl LeastSquares for GaussProblem<'_> {
    // p = [height, mean, ln sigma]
    fn residuals(&self, p: &DVector<f64>) -> DVector<f64> {
        let s = p[2].exp();
        DVector::from_iterator(
            self.x.len(),
            self.x.iter().zip(self.y).map(|(&x, &y)| p[0] * (-0.5 * ((x - p[1]) / s).powi(2)).exp() - y),
        )
    }
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (i, frac) = (pos.floor() as usize, pos.fract());
    if i + 1 < sorted.len() {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    } else {
        sorted[i]
    }
}

/// Summary of repeated lifetime measurements (µs): Gaussian fit to a
/// Freedman-Diaconis histogram, with the sample moments alongside.
pub fn distribution_stats(samples: &[f64]) -> Result<LifetimeDistribution> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!("need >= 2 lifetime samples, got {n}")));
    }
    if samples.iter().any(|s| !s.is_finite()) {
        return Err(Error::Domain("lifetime samples must be finite".into()));
    }
    let sample_mean = samples.iter().sum::<f64>() / n as f64;
    let sample_std = (samples.iter().map(|s| (s - sample_mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    let best = samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out = LifetimeDistribution {
        samples: samples.to_vec(),
        mean: sample_mean,
        std_dev: sample_std,
        best,
        sample_mean,
        sample_std,
        method: FitMethod::Moments,
        bin_width: 0.0,
        histogram: Vec::new(),
    };
    if samples.iter().all(|&s| s == samples[0]) {
        out.mean = samples[0];
        out.std_dev = 0.0;
        out.sample_std = 0.0;
        out.method = FitMethod::Degenerate;
        return Ok(out);
    }
    if n < MIN_GAUSSIAN_SAMPLES {
        return Ok(out);
    }

    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
    let (lo, hi) = (sorted[0], sorted[n - 1]);
    let mut width = 2.0 * iqr / (n as f64).cbrt();
    if !(width > 0.0) {
        width = 3.49 * sample_std / (n as f64).cbrt();
    }
    let bins = (((hi - lo) / width).ceil() as usize).max(1);
    let mut counts = vec![0usize; bins];
    for &s in samples {
        let k = (((s - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    out.bin_width = width;
    out.histogram = counts.iter().enumerate().map(|(k, &c)| (lo + (k as f64 + 0.5) * width, c)).collect();

    if bins >= 4 {
        let x: Vec<f64> = out.histogram.iter().map(|h| h.0).collect();
        let y: Vec<f64> = out.histogram.iter().map(|h| h.1 as f64).collect();
        let height = n as f64 * width / (sample_std * (2.0 * std::f64::consts::PI).sqrt());
        let x0 = DVector::from_vec(vec![height, sample_mean, sample_std.ln()]);
        if let Ok(sol) = lsq::minimize(&GaussProblem { x: &x, y: &y }, x0, LmOptions::default()) {
            let (mu, sigma) = (sol.x[1], sol.x[2].exp());
            if sol.converged && mu.is_finite() && sigma.is_finite() && mu > lo - width && mu < hi + width {
                out.mean = mu;
                out.std_dev = sigma;
                out.method = FitMethod::Gaussian;
            }
        }
    }
    Ok(out)
}

pub(crate) fn argmax(y: &[f64]) -> usize {
    y.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| i).unwrap_or(0)
}

/// Vertex of the parabola through three points.
pub(crate) fn parabolic_vertex(x: &[f64], y: &[f64]) -> f64 {
    let (x0, x1, x2) = (x[0], x[1], x[2]);
    let (y0, y1, y2) = (y[0], y[1], y[2]);
    let num = (x1 - x0).powi(2) * (y1 - y2) - (x1 - x2).powi(2) * (y1 - y0);
    let den = (x1 - x0) * (y1 - y2) - (x1 - x2) * (y1 - y0);
    if den == 0.0 {
        x1
    } else {
        x1 - 0.5 * num / den
    }
}

/// Spectroscopy peak: the largest sample refined by a parabola through its
/// neighbours.
pub fn locate_peak(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(Error::InsufficientData("peak location needs >= 3 matching points".into()));
    }
    let i = argmax(y);
    if i == 0 || i + 1 == x.len() {
        return Ok(x[i]);
    }
    Ok(parabolic_vertex(&x[i - 1..=i + 1], &y[i - 1..=i + 1]))
}
