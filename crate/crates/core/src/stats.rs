//! Sample statistics with standard errors.

use crate::error::{domain, Result};
use crate::sampling::RngStream;

/// Mean and variance of a sample with their standard errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub n: usize,
    pub mean: f64,
    pub se_mean: f64,
    /// Unbiased sample variance.
    pub variance: f64,
    /// Asymptotic standard error of the sample variance,
    /// `sqrt((m4 - (n-3)/(n-1) s^4) / n)`.
    pub se_variance: f64,
}

impl Moments {
    pub fn of(samples: &[f64]) -> Result<Self> {
        let n = samples.len();
        if n < 2 {
            return domain("need at least two samples for moments");
        }
        let nf = n as f64;
        let mean = samples.iter().sum::<f64>() / nf;
        let (mut m2, mut m4) = (0.0, 0.0);
        for &x in samples {
            let d = (x - mean) * (x - mean);
            m2 += d;
            m4 += d * d;
        }
        let variance = m2 / (nf - 1.0);
        m4 /= nf;
        let se_var_sq = (m4 - (nf - 3.0) / (nf - 1.0) * variance * variance) / nf;
        Ok(Self {
            n,
            mean,
            se_mean: (variance / nf).sqrt(),
            variance,
            se_variance: se_var_sq.max(0.0).sqrt(),
        })
    }
}

pub fn mean(samples: &[f64]) -> f64 {
    samples.iter().sum::<f64>() / samples.len() as f64
}

pub fn variance(samples: &[f64]) -> f64 {
    let m = mean(samples);
    samples.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (samples.len() as f64 - 1.0)
}

pub fn skewness(samples: &[f64]) -> f64 {
    let n = samples.len() as f64;
    let m = mean(samples);
    let m2 = samples.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    let m3 = samples.iter().map(|x| (x - m).powi(3)).sum::<f64>() / n;
    m3 / m2.powf(1.5)
}

pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

/// Bootstrap standard error of `statistic` from `resamples` resamples.
pub fn bootstrap_se(samples: &[f64], statistic: impl Fn(&[f64]) -> f64, resamples: usize, seed: u64) -> f64 {
    let n = samples.len();
    let mut stream = RngStream::new(seed, u64::MAX);
    let mut buf = vec![0.0; n];
    let stats: Vec<f64> = (0..resamples)
        .map(|_| {
            for slot in buf.iter_mut() {
                let k = ((stream.uniform() * n as f64) as usize).min(n - 1);
                *slot = samples[k];
            }
            statistic(&buf)
        })
        .collect();
    variance(&stats).sqrt()
}

/// Kolmogorov–Smirnov distance between the empirical CDF of `samples` and `cdf`.
pub fn ks_distance(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Two-sample Kolmogorov–Smirnov distance.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Least-squares line `y = intercept + slope x` with heteroskedasticity-robust
/// (White) standard errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OlsFit {
    pub intercept: f64,
    pub slope: f64,
    pub se_intercept: f64,
    pub se_slope: f64,
}

pub fn ols(x: &[f64], y: &[f64]) -> Result<OlsFit> {
    if x.len() != y.len() || x.len() < 3 {
        return domain("regression needs matching samples of length >= 3");
    }
    let n = x.len() as f64;
    let (mx, my) = (mean(x), mean(y));
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    if !(sxx > 0.0) {
        return domain("regressor has no variation");
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    // sandwich (X'X)^{-1} X' diag(e^2) X (X'X)^{-1} for the design [1, x]
    let (mut s00, mut s01, mut s11) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let e2 = (b - intercept - slope * a).powi(2);
        s00 += e2;
        s01 += e2 * a;
        s11 += e2 * a * a;
    }
    let sx: f64 = x.iter().sum();
    let sxx_raw: f64 = x.iter().map(|v| v * v).sum();
    let det = n * sxx_raw - sx * sx;
    let (i00, i01, i11) = (sxx_raw / det, -sx / det, n / det);
    let var_intercept = i00 * (i00 * s00 + i01 * s01) + i01 * (i00 * s01 + i01 * s11);
    let var_slope = i01 * (i01 * s00 + i11 * s01) + i11 * (i01 * s01 + i11 * s11);
    Ok(OlsFit {
        intercept,
        slope,
        se_intercept: var_intercept.max(0.0).sqrt(),
        se_slope: var_slope.max(0.0).sqrt(),
    })
}
