//! Many-trial runs of the balanced detector feeding the spectrum analyzer.
//!
//! Trials run in parallel and each one owns its random streams, so results
//! are merged by trial index and do not depend on scheduling.

use rayon::prelude::*;

use crate::error::Result;
use crate::sim::{mean_and_variance, simulate_balanced_trial, BalancedSetup, PhotocurrentTrace, SimConfig};
use crate::spectral::{average_spectra, NoiseSpectrum, SpectrumConfig, WelchEstimator};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialStatistics {
    pub trial: u64,
    pub mean_j1: f64,
    pub mean_j2: f64,
    pub variance_j_minus: f64,
}

#[derive(Debug, Clone)]
pub struct MonteCarloRun {
    /// Spectrum of `J₋` averaged over all trials.
    pub spectrum: NoiseSpectrum,
    pub trials: Vec<TrialStatistics>,
    /// Leading samples of trial 0, when requested.
    pub excerpt: Option<PhotocurrentTrace>,
}

impl MonteCarloRun {
    /// Mean of the per-trial `J₋` variances and its standard error.
    pub fn variance_estimate(&self) -> (f64, f64) {
        let v: Vec<f64> = self.trials.iter().map(|t| t.variance_j_minus).collect();
        let (mean, var) = mean_and_variance(&v);
        (mean, (var / v.len() as f64).sqrt())
    }
}

/// Runs `cfg.trials` trials (or `spectrum.averaging` when that is smaller and non-zero).
pub fn run_monte_carlo(
    setup: &BalancedSetup,
    cfg: &SimConfig,
    spectrum: &SpectrumConfig,
    excerpt_len: usize,
) -> Result<MonteCarloRun> {
    cfg.validate()?;
    let estimator = WelchEstimator::new(cfg.sample_rate, spectrum)?;
    let trials = match spectrum.averaging {
        0 => cfg.trials,
        a => a.min(cfg.trials),
    };
    log::debug!(
        "monte carlo: {trials} trials x {} samples, window {}, mode {:?}",
        cfg.sample_count(),
        estimator.window_len(),
        setup.resolved_mode(cfg)
    );
    let results: Vec<(NoiseSpectrum, TrialStatistics, Option<PhotocurrentTrace>)> = (0..trials as u64)
        .into_par_iter()
        .map(|trial| {
            let trace = simulate_balanced_trial(setup, cfg, trial)?;
            let spectrum = estimator.estimate(&trace.j_minus)?;
            let (mean_j1, _) = mean_and_variance(&trace.j1);
            let (mean_j2, _) = mean_and_variance(&trace.j2);
            let (_, variance_j_minus) = mean_and_variance(&trace.j_minus);
            let excerpt = (trial == 0 && excerpt_len > 0).then(|| trace.excerpt(excerpt_len));
            Ok((
                spectrum,
                TrialStatistics {
                    trial,
                    mean_j1,
                    mean_j2,
                    variance_j_minus,
                },
                excerpt,
            ))
        })
        .collect::<Result<_>>()?;

    let mut spectra = Vec::with_capacity(results.len());
    let mut stats = Vec::with_capacity(results.len());
    let mut excerpt = None;
    for (s, t, e) in results {
        spectra.push(s);
        stats.push(t);
        if e.is_some() {
            excerpt = e;
        }
    }
    Ok(MonteCarloRun {
        spectrum: average_spectra(&spectra)?,
        trials: stats,
        excerpt,
    })
}
