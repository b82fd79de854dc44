//! Photoevent statistics: inhomogeneous Poisson sampling by thinning and
//! per-interval Poisson counts.

use rand::Rng;
use rand_distr::{Distribution, Exp, Poisson};

use crate::error::{Error, Result};

/// Time-dependent photon arrival rate (s^-1).
pub trait PhotonRate: Sync {
    fn rate(&self, t: f64) -> f64;

    /// `∫_{t0}^{t1} rate dt`. The default is a single Simpson panel.
    fn integral(&self, t0: f64, t1: f64) -> f64 {
        (t1 - t0) / 6.0 * (self.rate(t0) + 4.0 * self.rate(0.5 * (t0 + t1)) + self.rate(t1))
    }

    /// An upper bound of the rate over `[t0, t1]`. The default scans a grid
    /// of step `dt / 4` and adds 1% headroom.
    fn upper_bound(&self, t0: f64, t1: f64, dt: f64) -> f64 {
        let step = dt / 4.0;
        let n = ((t1 - t0) / step).ceil() as usize;
        let max = (0..=n)
            .map(|i| self.rate((t0 + i as f64 * step).min(t1)))
            .fold(0.0f64, f64::max);
        max * 1.01
    }

    /// Fails with the first time on a `dt / 2` grid where the rate is negative.
    fn check_nonnegative(&self, t0: f64, t1: f64, dt: f64) -> Result<()> {
        let step = dt / 2.0;
        let n = ((t1 - t0) / step).ceil() as usize;
        for i in 0..=n {
            let t = (t0 + i as f64 * step).min(t1);
            let r = self.rate(t);
            if !(r >= 0.0) {
                return Err(negative_rate(t, r));
            }
        }
        Ok(())
    }
}

impl<F: Fn(f64) -> f64 + Sync> PhotonRate for F {
    fn rate(&self, t: f64) -> f64 {
        self(t)
    }
}

pub(crate) fn negative_rate(t: f64, r: f64) -> Error {
    Error::Domain(format!("negative photon rate {r:e} s^-1 at t = {t:e} s"))
}

/// Event times of an inhomogeneous Poisson process with intensity
/// `scale · rate(t)` on `[t0, t1)`, by thinning a homogeneous process at
/// `scale · bound`.
pub fn thinning_events<R: Rng + ?Sized>(
    rate: &dyn PhotonRate,
    scale: f64,
    t0: f64,
    t1: f64,
    bound: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let envelope = scale * bound;
    if !(envelope > 0.0) || t1 <= t0 {
        return Ok(Vec::new());
    }
    let gaps = Exp::new(envelope).map_err(|e| Error::domain(e.to_string()))?;
    let mut events = Vec::with_capacity(((t1 - t0) * envelope * 1.05) as usize + 16);
    let mut t = t0;
    loop {
        t += gaps.sample(rng);
        if t >= t1 {
            break;
        }
        let r = rate.rate(t);
        if !(r >= 0.0) {
            return Err(negative_rate(t, r));
        }
        if r > bound {
            return Err(Error::Domain(format!(
                "photon rate {r:e} s^-1 at t = {t:e} s exceeds the thinning bound {bound:e}"
            )));
        }
        if rng.random::<f64>() * bound < r {
            events.push(t);
        }
    }
    Ok(events)
}

/// Draws Poisson counts, reusing the distribution while the mean repeats.
#[derive(Debug, Default)]
pub struct CountSampler {
    cached: Option<(f64, Poisson<f64>)>,
}

impl CountSampler {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn sample<R: Rng + ?Sized>(&mut self, mean: f64, rng: &mut R) -> Result<f64> {
        if mean == 0.0 {
            return Ok(0.0);
        }
        match &self.cached {
            Some((m, dist)) if *m == mean => Ok(dist.sample(rng)),
            _ => {
                let dist = Poisson::new(mean)
                    .map_err(|e| Error::Domain(format!("Poisson mean {mean:e}: {e}")))?;
                let k = dist.sample(rng);
                self.cached = Some((mean, dist));
                Ok(k)
            }
        }
    }
}

/// Counts of `events` in `windows` equal disjoint windows tiling `[t0, t1)`.
pub fn window_counts(events: &[f64], t0: f64, t1: f64, windows: usize) -> Vec<u64> {
    let mut counts = vec![0u64; windows];
    let width = (t1 - t0) / windows as f64;
    for &t in events {
        if t >= t0 && t < t1 {
            let i = (((t - t0) / width) as usize).min(windows - 1);
            counts[i] += 1;
        }
    }
    counts
}

/// Variance-to-mean ratio of window counts.
pub fn fano_factor(counts: &[u64]) -> f64 {
    let n = counts.len() as f64;
    let mean = counts.iter().sum::<u64>() as f64 / n;
    let var = counts
        .iter()
        .map(|&c| (c as f64 - mean).powi(2))
        .sum::<f64>()
        / (n - 1.0);
    var / mean
}
