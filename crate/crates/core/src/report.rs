//! Monte Carlo estimate records and replication plumbing.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::stream::SeededStream;

/// The universal output record: replication count, sample mean, and the
/// standard error `sample sd / sqrt(n_reps)`.
#[derive(Clone, Debug, Serialize)]
pub struct EstimateReport {
    pub n_reps: u64,
    pub mean: f64,
    pub std_error: f64,
    /// Optional labeled reals (horizon, censoring fractions, ...).
    pub extra: BTreeMap<String, f64>,
}

impl EstimateReport {
    pub fn from_samples(samples: &[f64]) -> Self {
        assert!(samples.len() >= 2, "an estimate needs at least 2 replications");
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        EstimateReport {
            n_reps: samples.len() as u64,
            mean,
            std_error: (var / n).sqrt(),
            extra: BTreeMap::new(),
        }
    }

    /// Ratio-of-means estimate for paired samples, with the delta-method
    /// standard error (covariance term included, since pairs sharing
    /// randomness are strongly correlated).
    pub fn ratio_of_means(numer: &[f64], denom: &[f64]) -> Self {
        assert_eq!(numer.len(), denom.len());
        assert!(numer.len() >= 2);
        let n = numer.len() as f64;
        let m1 = numer.iter().sum::<f64>() / n;
        let m2 = denom.iter().sum::<f64>() / n;
        assert!(m2 != 0.0, "ratio_of_means: denominator mean is zero");
        let mut s11 = 0.0;
        let mut s22 = 0.0;
        let mut s12 = 0.0;
        for (x, y) in numer.iter().zip(denom.iter()) {
            s11 += (x - m1).powi(2);
            s22 += (y - m2).powi(2);
            s12 += (x - m1) * (y - m2);
        }
        s11 /= n - 1.0;
        s22 /= n - 1.0;
        s12 /= n - 1.0;
        let r = m1 / m2;
        let var_r = (s11 - 2.0 * r * s12 + r * r * s22) / (m2 * m2);
        EstimateReport {
            n_reps: numer.len() as u64,
            mean: r,
            std_error: (var_r.max(0.0) / n).sqrt(),
            extra: BTreeMap::new(),
        }
    }

    pub fn with_extra(mut self, key: &str, value: f64) -> Self {
        self.extra.insert(key.to_string(), value);
        self
    }
}

/// Run `n_reps` independent replications in parallel and collect the
/// per-replication values in replication-index order.
///
/// Each replication draws only from `base.substream("rep/{i}")`, so the
/// result is a pure function of `(master_seed, base label, n_reps)`:
/// worker count changes wall time, never output.
pub fn run_replications<F>(base: &SeededStream, n_reps: u64, per_rep: F) -> Vec<f64>
where
    F: Fn(&mut SeededStream) -> f64 + Sync,
{
    (0..n_reps)
        .into_par_iter()
        .map(|i| {
            let mut s = base.substream(format!("rep/{i}"));
            per_rep(&mut s)
        })
        .collect()
}

/// As [`run_replications`] but for replications producing a record type.
pub fn run_replications_map<T, F>(base: &SeededStream, n_reps: u64, per_rep: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut SeededStream) -> T + Sync,
{
    (0..n_reps)
        .into_par_iter()
        .map(|i| {
            let mut s = base.substream(format!("rep/{i}"));
            per_rep(&mut s)
        })
        .collect()
}
