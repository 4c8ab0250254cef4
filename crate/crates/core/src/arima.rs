//! Sliding-window autoregressive baseline: an ARI(p, d) model refit on the
//! history preceding every sample, with the one-step forecast residual as δ.

use crate::error::{Error, Result};
use crate::signal::{DeltaTrace, Record};

/// Pivots smaller than this fraction of the largest normal-matrix diagonal
/// entry are treated as zero.
const PIVOT_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArimaConfig {
    pub p: usize,
    pub d: usize,
    pub q: usize,
    pub window_len: usize,
}

impl Default for ArimaConfig {
    fn default() -> Self {
        Self {
            p: 3,
            d: 1,
            q: 0,
            window_len: 60,
        }
    }
}

impl ArimaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.p == 0 {
            return Err(Error::Config("arima_p must be >= 1".into()));
        }
        if self.d > 1 {
            return Err(Error::Config("arima_d must be 0 or 1".into()));
        }
        if self.q != 0 {
            return Err(Error::Config(
                "moving-average terms are not supported (q must be 0)".into(),
            ));
        }
        if self.window_len < self.d + self.p + 5 {
            return Err(Error::Config(format!(
                "arima_window {} too short for p={} d={}",
                self.window_len, self.p, self.d
            )));
        }
        Ok(())
    }
}

/// `d`-fold first differencing.
pub fn difference(series: &[f64], d: usize) -> Result<Vec<f64>> {
    if series.len() <= d {
        return Err(Error::Validation(format!(
            "series of length {} cannot be differenced {d} times",
            series.len()
        )));
    }
    let mut out = series.to_vec();
    for _ in 0..d {
        out = out.windows(2).map(|w| w[1] - w[0]).collect();
    }
    Ok(out)
}

/// Conditional least-squares AR fit.
#[derive(Debug, Clone, PartialEq)]
pub struct ArFit {
    pub intercept: f64,
    /// `coefficients[i]` multiplies `y[t - 1 - i]`.
    pub coefficients: Vec<f64>,
    /// Singular design: the fit degenerated to persistence (`y_t = y_{t-1}`).
    pub fallback: bool,
}

impl ArFit {
    fn persistence(p: usize) -> Self {
        let mut coefficients = vec![0.0; p];
        coefficients[0] = 1.0;
        Self {
            intercept: 0.0,
            coefficients,
            fallback: true,
        }
    }

    /// One-step-ahead forecast of the value following `history`.
    pub fn forecast(&self, history: &[f64]) -> f64 {
        let n = history.len();
        self.intercept
            + self
                .coefficients
                .iter()
                .enumerate()
                .map(|(i, a)| a * history[n - 1 - i])
                .sum::<f64>()
    }

    /// In-sample residuals for `t = p..len`.
    pub fn residuals(&self, series: &[f64]) -> Vec<f64> {
        let p = self.coefficients.len();
        (p..series.len())
            .map(|t| series[t] - self.forecast(&series[..t]))
            .collect()
    }
}

/// OLS of `y_t` on `(1, y_{t-1}, ..., y_{t-p})`, solved through the normal
/// equations.
pub fn fit_ar(series: &[f64], p: usize) -> Result<ArFit> {
    if p == 0 {
        return Err(Error::Config("AR order must be >= 1".into()));
    }
    if series.len() < p + 5 {
        return Err(Error::Validation(format!(
            "AR({p}) fit needs at least {} samples, got {}",
            p + 5,
            series.len()
        )));
    }
    let k = p + 1;
    let mut xtx = vec![0.0; k * k];
    let mut xty = vec![0.0; k];
    let mut row = vec![0.0; k];
    for t in p..series.len() {
        row[0] = 1.0;
        for i in 0..p {
            row[i + 1] = series[t - 1 - i];
        }
        for a in 0..k {
            xty[a] += row[a] * series[t];
            for b in 0..k {
                xtx[a * k + b] += row[a] * row[b];
            }
        }
    }
    match solve(&mut xtx, &mut xty, k) {
        Some(beta) => Ok(ArFit {
            intercept: beta[0],
            coefficients: beta[1..].to_vec(),
            fallback: false,
        }),
        None => Ok(ArFit::persistence(p)),
    }
}

/// Gaussian elimination with partial pivoting on a dense `k x k` system.
/// Returns `None` when a pivot falls below the relative tolerance.
fn solve(a: &mut [f64], b: &mut [f64], k: usize) -> Option<Vec<f64>> {
    let scale = (0..k).map(|i| a[i * k + i].abs()).fold(0.0, f64::max);
    if !(scale > 0.0) || !scale.is_finite() {
        return None;
    }
    for col in 0..k {
        let pivot_row = (col..k)
            .max_by(|&r, &s| a[r * k + col].abs().total_cmp(&a[s * k + col].abs()))
            .expect("non-empty pivot range");
        if a[pivot_row * k + col].abs() <= PIVOT_TOLERANCE * scale {
            return None;
        }
        if pivot_row != col {
            for j in 0..k {
                a.swap(col * k + j, pivot_row * k + j);
            }
            b.swap(col, pivot_row);
        }
        let pivot = a[col * k + col];
        for r in col + 1..k {
            let factor = a[r * k + col] / pivot;
            if factor == 0.0 {
                continue;
            }
            for j in col..k {
                a[r * k + j] -= factor * a[col * k + j];
            }
            b[r] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; k];
    for r in (0..k).rev() {
        let tail: f64 = (r + 1..k).map(|j| a[r * k + j] * x[j]).sum();
        x[r] = (b[r] - tail) / a[r * k + r];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// δ trace together with how many per-sample fits fell back to persistence.
#[derive(Debug, Clone, PartialEq)]
pub struct ArimaTrace {
    pub delta: DeltaTrace,
    pub fallbacks: usize,
}

/// Forecast of `x[t]` from the `window_len` samples before it.
pub fn forecast_next(history: &[f64], cfg: &ArimaConfig) -> Result<(f64, bool)> {
    let diffed = difference(history, cfg.d)?;
    let fit = fit_ar(&diffed, cfg.p)?;
    let step = fit.forecast(&diffed);
    let value = if cfg.d == 1 {
        history[history.len() - 1] + step
    } else {
        step
    };
    Ok((value, fit.fallback))
}

/// δ_t = |forecast - x_t| for every `t` whose `window_len` predecessors are
/// all present; other samples are undefined.
pub fn arima_delta_trace_with_report(record: &Record, cfg: &ArimaConfig) -> Result<ArimaTrace> {
    cfg.validate()?;
    let n = record.len();
    let w = cfg.window_len;
    let mut delta = DeltaTrace::undefined(n);
    let mut fallbacks = 0;
    if n <= w {
        return Ok(ArimaTrace { delta, fallbacks });
    }
    // missing_before[i] = number of missing samples in values[..i]
    let mut missing_before = vec![0usize; n + 1];
    for (i, v) in record.values.iter().enumerate() {
        missing_before[i + 1] = missing_before[i] + usize::from(v.is_none());
    }
    let mut history = vec![0.0; w];
    for t in w..n {
        let Some(actual) = record.values[t] else {
            continue;
        };
        if missing_before[t] != missing_before[t - w] {
            continue;
        }
        for (h, v) in history.iter_mut().zip(&record.values[t - w..t]) {
            *h = v.expect("history checked missing-free");
        }
        let (forecast, fell_back) = forecast_next(&history, cfg)?;
        fallbacks += usize::from(fell_back);
        delta.values[t] = Some((forecast - actual).abs());
    }
    Ok(ArimaTrace { delta, fallbacks })
}

pub fn arima_delta_trace(record: &Record, cfg: &ArimaConfig) -> Result<DeltaTrace> {
    Ok(arima_delta_trace_with_report(record, cfg)?.delta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prng::Rng;
    use proptest::prelude::*;

    fn ar1(n: usize, phi: f64, sigma: f64, seed: u64) -> Vec<f64> {
        let mut rng = Rng::new(seed);
        let mut x = vec![0.0; n];
        for t in 1..n {
            x[t] = phi * x[t - 1] + sigma * rng.next_gaussian();
        }
        x
    }

    #[test]
    fn difference_examples() {
        assert_eq!(difference(&[3.0, 5.0, 9.0], 1).unwrap(), vec![2.0, 4.0]);
        assert_eq!(difference(&[3.0, 5.0], 0).unwrap(), vec![3.0, 5.0]);
        let ramp: Vec<f64> = (0..10).map(|i| 2.0 + 0.5 * i as f64).collect();
        assert!(difference(&ramp, 1).unwrap().iter().all(|&v| v == 0.5));
        assert!(difference(&[1.0], 1).is_err());
    }

    #[test]
    fn recovers_ar1_coefficient() {
        let x = ar1(1000, 0.8, 1.0, 3);
        let fit = fit_ar(&x, 1).unwrap();
        assert!(!fit.fallback);
        assert!((fit.coefficients[0] - 0.8).abs() < 0.05, "{:?}", fit);
    }

    #[test]
    fn constant_series_falls_back_with_zero_residuals() {
        let fit = fit_ar(&[0.5; 40], 3).unwrap();
        assert!(fit.fallback);
        assert!(fit.residuals(&[0.5; 40]).iter().all(|&r| r == 0.0));
    }

    #[test]
    fn white_noise_fit_does_not_increase_variance() {
        let mut rng = Rng::new(12);
        let x: Vec<f64> = (0..200).map(|_| rng.next_gaussian()).collect();
        let fit = fit_ar(&x, 3).unwrap();
        let res = fit.residuals(&x);
        let mean = x[3..].iter().sum::<f64>() / res.len() as f64;
        let raw: f64 = x[3..].iter().map(|v| (v - mean).powi(2)).sum();
        let rss: f64 = res.iter().map(|r| r * r).sum();
        assert!(rss <= raw);
    }

    #[test]
    fn fit_matches_brute_force_least_squares() {
        // Perturbing the solution in any coordinate must not reduce the RSS.
        let x = ar1(120, 0.5, 1.0, 8);
        let fit = fit_ar(&x, 3).unwrap();
        let rss = |f: &ArFit| f.residuals(&x).iter().map(|r| r * r).sum::<f64>();
        let base = rss(&fit);
        for i in 0..4 {
            for h in [1e-4, -1e-4] {
                let mut g = fit.clone();
                if i == 0 {
                    g.intercept += h;
                } else {
                    g.coefficients[i - 1] += h;
                }
                assert!(rss(&g) >= base);
            }
        }
    }

    #[test]
    fn linear_record_has_zero_delta() {
        let values: Vec<f64> = (0..200).map(|i| 1.5 - 0.03 * i as f64).collect();
        let r = Record::from_values("lin", &values);
        let d = arima_delta_trace(&r, &ArimaConfig::default()).unwrap();
        assert_eq!(d.defined_count(), 140);
        assert!(d.values[..60].iter().all(Option::is_none));
        for v in d.values.iter().flatten() {
            assert!(*v <= 1e-9, "{v}");
        }
    }

    #[test]
    fn short_record_is_undefined() {
        let r = Record::from_values("s", &[1.0; 60]);
        assert_eq!(
            arima_delta_trace(&r, &ArimaConfig::default())
                .unwrap()
                .defined_count(),
            0
        );
    }

    #[test]
    fn missing_history_leaves_undefined() {
        let mut values: Vec<Option<f64>> = (0..150).map(|i| Some((i as f64 * 0.1).sin())).collect();
        values[100] = None;
        let r = Record::contiguous("m", 0, values);
        let d = arima_delta_trace(&r, &ArimaConfig::default()).unwrap();
        for t in 60..150 {
            let expect = !(100..=160).contains(&t);
            assert_eq!(d.values[t].is_some(), expect, "t={t}");
        }
    }

    #[test]
    fn spike_dominates_outside_its_contaminated_horizon() {
        // Once the spike enters the history it also distorts the next
        // `window_len` forecasts, so only samples outside [t, t + window_len]
        // are guaranteed to stay below it.
        let mut rng = Rng::new(21);
        let smooth: Vec<f64> = (0..300)
            .map(|i| 80.0 + 5.0 * (i as f64 / 40.0).sin() + 0.3 * rng.next_gaussian())
            .collect();
        let t = 200;
        let mut spiked = smooth.clone();
        spiked[t] += 50.0;
        let cfg = ArimaConfig::default();
        let d = arima_delta_trace(&Record::from_values("sp", &spiked), &cfg).unwrap();
        let at_spike = d.values[t].unwrap();
        assert!((at_spike - 50.0).abs() < 2.0, "{at_spike}");
        for (i, v) in d.values.iter().enumerate() {
            if let Some(v) = v {
                if !(t..=t + cfg.window_len).contains(&i) {
                    assert!(*v < at_spike, "i={i}: {v}");
                }
            }
        }
        let clean = arima_delta_trace(&Record::from_values("c", &smooth), &cfg).unwrap();
        assert_eq!(&clean.values[..t], &d.values[..t]);
    }

    #[test]
    fn mean_forecast_error_tracks_innovation_scale() {
        // For Gaussian innovations E|e| = sigma * sqrt(2 / pi).
        let sigma = 1.0;
        let x = ar1(10_000, 0.6, sigma, 5);
        let cfg = ArimaConfig {
            p: 3,
            d: 0,
            q: 0,
            window_len: 60,
        };
        let d = arima_delta_trace(&Record::from_values("ar", &x), &cfg).unwrap();
        let defined: Vec<f64> = d.values.iter().flatten().copied().collect();
        let mean = defined.iter().sum::<f64>() / defined.len() as f64;
        let expected = sigma * (2.0 / std::f64::consts::PI).sqrt();
        assert!(
            (mean - expected).abs() < 0.2 * expected,
            "{mean} vs {expected}"
        );
    }

    #[test]
    fn rejects_bad_config() {
        let bad = [
            ArimaConfig {
                p: 0,
                ..Default::default()
            },
            ArimaConfig {
                d: 2,
                ..Default::default()
            },
            ArimaConfig {
                q: 1,
                ..Default::default()
            },
            ArimaConfig {
                window_len: 6,
                ..Default::default()
            },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err());
        }
    }

    proptest! {
        #[test]
        fn delta_depends_only_on_local_history(seed in 0u64..1000, cut in 61usize..150) {
            let x = ar1(150, 0.7, 1.0, seed);
            let full = arima_delta_trace(&Record::from_values("a", &x), &ArimaConfig::default()).unwrap();
            let part = arima_delta_trace(&Record::from_values("a", &x[..=cut]), &ArimaConfig::default()).unwrap();
            prop_assert_eq!(&full.values[..=cut], &part.values[..]);
        }
    }
}
