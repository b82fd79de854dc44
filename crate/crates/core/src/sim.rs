//! Monte Carlo photocurrents of the balanced detector.
//!
//! Each detector sees an inhomogeneous Poisson photoevent stream driven by
//! its output-port intensity. Two event engines are available:
//!
//! * [`EventMode::Thinning`] draws individual event times and samples the
//!   summed pulse train at the grid instants (point samples).
//! * [`EventMode::Binned`] draws the exact Poisson count of each sampling
//!   interval and spreads its charge with the interval-averaged pulse
//!   kernel (integrate-and-dump samples). This is the only practical route
//!   for milliwatt oscillators at ~10^16 photons/s.
//!
//! Random streams are split from the master seed by `(trial, purpose)`
//! through the ChaCha stream counter, so every trial is reproducible on its
//! own regardless of how trials are scheduled.

use std::f64::consts::TAU;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::analytic::{image_band_factor, NoiseModel};
use crate::detector::{DetectorModel, PulseKind};
use crate::error::{Error, Result};
use crate::optics::{warn_if_weak_lo, BeatConfig, FieldSpec, OpticalPath};
use crate::poisson::{negative_rate, thinning_events, CountSampler, PhotonRate};

/// Above this many expected photoevents per trial, `Auto` switches to binned counts.
pub const AUTO_THINNING_LIMIT: f64 = 2.0e7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum EventMode {
    #[default]
    Auto,
    Thinning,
    Binned,
}

impl EventMode {
    pub fn name(&self) -> &'static str {
        match self {
            EventMode::Auto => "auto",
            EventMode::Thinning => "thinning",
            EventMode::Binned => "binned",
        }
    }
}

impl std::str::FromStr for EventMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "auto" => Ok(EventMode::Auto),
            "thinning" => Ok(EventMode::Thinning),
            "binned" => Ok(EventMode::Binned),
            other => Err(Error::domain(format!("unknown event mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    /// Hz
    pub sample_rate: f64,
    /// s
    pub duration: f64,
    pub master_seed: u64,
    pub trials: usize,
    pub event_mode: EventMode,
    /// Full-width LO linewidth (Hz) driving a phase random walk. 0 disables it.
    pub lo_linewidth: f64,
    /// Reserved; must be 0.
    pub dark_rate: f64,
}

impl SimConfig {
    pub fn with_samples(sample_rate: f64, samples: usize, master_seed: u64, trials: usize) -> Self {
        Self {
            sample_rate,
            duration: samples as f64 / sample_rate,
            master_seed,
            trials,
            event_mode: EventMode::Auto,
            lo_linewidth: 0.0,
            dark_rate: 0.0,
        }
    }

    pub fn sample_count(&self) -> usize {
        (self.duration * self.sample_rate).round() as usize
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.sample_rate
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate > 0.0) || !self.sample_rate.is_finite() {
            return Err(Error::domain("sample rate must be positive"));
        }
        if !(self.duration > 0.0) || !self.duration.is_finite() {
            return Err(Error::domain("duration must be positive"));
        }
        if self.trials == 0 {
            return Err(Error::domain("at least one trial is required"));
        }
        let n = self.duration * self.sample_rate;
        if n.round() < 1.0 {
            return Err(Error::domain("duration shorter than one sample"));
        }
        // Three f64 channels per trace.
        if n * 24.0 > isize::MAX as f64 {
            return Err(Error::domain(format!("{n:e} samples do not fit in memory")));
        }
        if !(self.lo_linewidth >= 0.0) {
            return Err(Error::domain("LO linewidth must be non-negative"));
        }
        if self.dark_rate != 0.0 {
            return Err(Error::domain("dark counts are not modelled; dark_rate must be 0"));
        }
        Ok(())
    }
}

/// Random stream roles inside one trial.
#[derive(Debug, Clone, Copy)]
#[repr(u64)]
enum Stream {
    Detector1 = 0,
    Detector2 = 1,
    ImageBand = 2,
    Phase = 3,
    Electronics1 = 4,
    Electronics2 = 5,
}

const STREAMS_PER_TRIAL: u64 = 8;

fn stream_rng(master_seed: u64, trial: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(trial * STREAMS_PER_TRIAL + stream as u64);
    rng
}

/// Sampled `J₁`, `J₂` and `J₋ = J₁ − J₂` (A).
#[derive(Debug, Clone, PartialEq)]
pub struct PhotocurrentTrace {
    pub j1: Vec<f64>,
    pub j2: Vec<f64>,
    pub j_minus: Vec<f64>,
    pub sample_rate: f64,
    pub seed_used: u64,
    pub trial: u64,
}

impl PhotocurrentTrace {
    pub fn from_detectors(
        j1: Vec<f64>,
        j2: Vec<f64>,
        sample_rate: f64,
        seed_used: u64,
        trial: u64,
    ) -> Result<Self> {
        if j1.len() != j2.len() {
            return Err(Error::Shape(format!(
                "detector traces differ in length: {} vs {}",
                j1.len(),
                j2.len()
            )));
        }
        let j_minus = j1.iter().zip(&j2).map(|(a, b)| a - b).collect();
        Ok(Self {
            j1,
            j2,
            j_minus,
            sample_rate,
            seed_used,
            trial,
        })
    }

    pub fn len(&self) -> usize {
        self.j1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.j1.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 / self.sample_rate
    }

    /// First `n` samples.
    pub fn excerpt(&self, n: usize) -> Self {
        let n = n.min(self.len());
        Self {
            j1: self.j1[..n].to_vec(),
            j2: self.j2[..n].to_vec(),
            j_minus: self.j_minus[..n].to_vec(),
            ..*self
        }
    }
}

/// Sample mean and unbiased variance.
pub fn mean_and_variance(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Photon rate at one splitter output:
/// `mean + amplitude · sin(Ωt + φ + φ_walk(t))`.
#[derive(Debug, Clone)]
pub struct PortRate {
    pub mean: f64,
    pub amplitude: f64,
    pub omega: f64,
    pub phase: f64,
    walk: Option<PhaseWalk>,
}

#[derive(Debug, Clone)]
struct PhaseWalk {
    start: f64,
    dt: f64,
    phases: Arc<[f64]>,
}

impl PhaseWalk {
    fn at(&self, t: f64) -> f64 {
        let i = ((t - self.start) / self.dt).floor();
        let i = (i.max(0.0) as usize).min(self.phases.len() - 1);
        self.phases[i]
    }
}

impl PortRate {
    /// Rates of output ports 1 and 2 for the given fields.
    pub fn pair(
        signal: &FieldSpec,
        lo: &FieldSpec,
        beat: &BeatConfig,
        path: &OpticalPath,
    ) -> [PortRate; 2] {
        let mean = 0.5 * (signal.photon_rate() + lo.photon_rate());
        let cross = signal.flux_amplitude * lo.flux_amplitude;
        let port = |amplitude: f64| PortRate {
            mean,
            amplitude,
            omega: beat.het_frequency,
            phase: beat.relative_phase,
            walk: None,
        };
        [port(path.visibility[0] * cross), port(-path.visibility[1] * cross)]
    }

    fn with_walk(mut self, walk: Option<PhaseWalk>) -> Self {
        self.walk = walk;
        self
    }

    fn phase_at(&self, t: f64) -> f64 {
        self.phase + self.walk.as_ref().map_or(0.0, |w| w.at(t))
    }
}

impl PhotonRate for PortRate {
    fn rate(&self, t: f64) -> f64 {
        self.mean + self.amplitude * (self.omega * t + self.phase_at(t)).sin()
    }

    fn integral(&self, t0: f64, t1: f64) -> f64 {
        let phase = self.phase_at(0.5 * (t0 + t1));
        let oscillating = if self.omega == 0.0 {
            phase.sin() * (t1 - t0)
        } else {
            ((self.omega * t0 + phase).cos() - (self.omega * t1 + phase).cos()) / self.omega
        };
        self.mean * (t1 - t0) + self.amplitude * oscillating
    }

    fn upper_bound(&self, _t0: f64, _t1: f64, _dt: f64) -> f64 {
        self.mean + self.amplitude.abs()
    }

    fn check_nonnegative(&self, t0: f64, _t1: f64, _dt: f64) -> Result<()> {
        let floor = self.mean - self.amplitude.abs();
        if floor < 0.0 {
            return Err(negative_rate(t0, floor));
        }
        Ok(())
    }
}

fn resolve_mode(mode: EventMode, expected_events: f64) -> EventMode {
    match mode {
        EventMode::Auto if expected_events <= AUTO_THINNING_LIMIT => EventMode::Thinning,
        EventMode::Auto => EventMode::Binned,
        m => m,
    }
}

/// Mean photoevent counts per sampling interval, starting `warm` intervals before t = 0.
fn interval_means(rate: &dyn PhotonRate, efficiency: f64, n: usize, warm: usize, dt: f64) -> Vec<f64> {
    (0..n + warm)
        .map(|i| {
            let t0 = (i as f64 - warm as f64) * dt;
            (efficiency * rate.integral(t0, t0 + dt)).max(0.0)
        })
        .collect()
}

/// Causal convolution of per-interval counts with the interval kernel,
/// dropping the `kernel.len() - 1` warm-up outputs.
fn convolve_counts(counts: &[f64], kernel: &[f64], n: usize) -> Vec<f64> {
    let warm = kernel.len() - 1;
    (0..n)
        .map(|k| {
            kernel
                .iter()
                .enumerate()
                .map(|(m, h)| h * counts[k + warm - m])
                .sum()
        })
        .collect()
}

fn binned_current<R: Rng + ?Sized>(
    rate: &dyn PhotonRate,
    detector: &DetectorModel,
    n: usize,
    dt: f64,
    noiseless: bool,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let kernel = detector.pulse.bin_kernel(dt);
    let warm = kernel.len() - 1;
    let mut counts = interval_means(rate, detector.efficiency, n, warm, dt);
    if !noiseless {
        let mut sampler = CountSampler::new();
        for c in counts.iter_mut() {
            *c = sampler.sample(*c, rng)?;
        }
    }
    Ok(convolve_counts(&counts, &kernel, n))
}

fn thinned_current<R: Rng + ?Sized>(
    rate: &dyn PhotonRate,
    detector: &DetectorModel,
    n: usize,
    dt: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let pulse = detector.pulse;
    let warm = pulse.support();
    let (t0, t1) = (-warm, n as f64 * dt);
    let bound = rate.upper_bound(t0, t1, dt);
    let events = thinning_events(rate, detector.efficiency, t0, t1, bound, rng)?;
    let mut current = vec![0.0; n];
    for t in events {
        if pulse.kind == PulseKind::Delta {
            let k = (t / dt).floor();
            if k >= 0.0 && (k as usize) < n {
                current[k as usize] += pulse.area / dt;
            }
            continue;
        }
        let mut k = (t / dt).ceil().max(0.0) as usize;
        while k < n {
            let age = k as f64 * dt - t;
            if age >= pulse.support() {
                break;
            }
            current[k] += pulse.current(age)?;
            k += 1;
        }
    }
    Ok(current)
}

fn detector_current<R: Rng + ?Sized>(
    rate: &dyn PhotonRate,
    detector: &DetectorModel,
    n: usize,
    dt: f64,
    mode: EventMode,
    noiseless: bool,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let warm = detector.pulse.support().max(dt);
    rate.check_nonnegative(-warm, n as f64 * dt, dt)?;
    if noiseless {
        return binned_current(rate, detector, n, dt, true, rng);
    }
    match mode {
        EventMode::Thinning => thinned_current(rate, detector, n, dt, rng),
        _ => binned_current(rate, detector, n, dt, false, rng),
    }
}

fn add_white_noise<R: Rng + ?Sized>(x: &mut [f64], one_sided_psd: f64, sample_rate: f64, rng: &mut R) {
    if one_sided_psd <= 0.0 {
        return;
    }
    let sigma = (one_sided_psd * sample_rate / 2.0).sqrt();
    for v in x.iter_mut() {
        let z: f64 = StandardNormal.sample(rng);
        *v += sigma * z;
    }
}

/// Photocurrent samples of one detector driven by `rate`, using the
/// detector-1 stream of trial 0 of `cfg.master_seed`. Electronics noise is
/// included.
pub fn simulate_detector(
    rate: &dyn PhotonRate,
    detector: &DetectorModel,
    cfg: &SimConfig,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    let (n, dt) = (cfg.sample_count(), cfg.dt());
    let expected = detector.efficiency * rate.integral(0.0, cfg.duration);
    let mode = resolve_mode(cfg.event_mode, expected);
    let mut rng = stream_rng(cfg.master_seed, 0, Stream::Detector1);
    let mut current = detector_current(rate, detector, n, dt, mode, false, &mut rng)?;
    let mut noise_rng = stream_rng(cfg.master_seed, 0, Stream::Electronics1);
    add_white_noise(&mut current, detector.electronics_psd, cfg.sample_rate, &mut noise_rng);
    Ok(current)
}

/// Everything needed to run the balanced detector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BalancedSetup {
    pub signal: FieldSpec,
    pub lo: FieldSpec,
    pub beat: BeatConfig,
    pub path: OpticalPath,
    pub detectors: [DetectorModel; 2],
    pub model: NoiseModel,
}

impl BalancedSetup {
    /// Event engine `Auto` resolves to for this setup.
    pub fn resolved_mode(&self, cfg: &SimConfig) -> EventMode {
        let mean_rate = 0.5 * (self.signal.photon_rate() + self.lo.photon_rate());
        let eta: f64 = self.detectors.iter().map(|d| d.efficiency).sum();
        resolve_mode(cfg.event_mode, eta * mean_rate * cfg.duration)
    }

    /// Setup with the oscillator and signal switched off: electronics only.
    pub fn dark(&self) -> Result<Self> {
        Ok(Self {
            signal: FieldSpec::new(self.signal.frequency, 0.0, 0.0)?,
            lo: FieldSpec::new(self.lo.frequency, 0.0, 0.0)?,
            ..*self
        })
    }
}

/// Balanced photocurrents for trial 0.
pub fn simulate_balanced(
    signal: &FieldSpec,
    lo: &FieldSpec,
    beat: &BeatConfig,
    path: &OpticalPath,
    detectors: &[DetectorModel; 2],
    model: NoiseModel,
    cfg: &SimConfig,
) -> Result<PhotocurrentTrace> {
    let setup = BalancedSetup {
        signal: *signal,
        lo: *lo,
        beat: *beat,
        path: *path,
        detectors: *detectors,
        model,
    };
    simulate_balanced_trial(&setup, cfg, 0)
}

/// Balanced photocurrents for one trial. The output depends only on
/// `(setup, cfg, trial)`.
pub fn simulate_balanced_trial(
    setup: &BalancedSetup,
    cfg: &SimConfig,
    trial: u64,
) -> Result<PhotocurrentTrace> {
    cfg.validate()?;
    if 2.0 * setup.beat.beat_hz() >= cfg.sample_rate {
        return Err(Error::Domain(format!(
            "sample rate {} Hz does not resolve the {} Hz beat",
            cfg.sample_rate,
            setup.beat.beat_hz()
        )));
    }
    warn_if_weak_lo(&setup.signal, &setup.lo);
    let (n, dt) = (cfg.sample_count(), cfg.dt());
    let seed = cfg.master_seed;

    let warm_bins = setup
        .detectors
        .iter()
        .map(|d| d.pulse.bin_kernel(dt).len() - 1)
        .max()
        .unwrap_or(0);
    let warm_time = setup
        .detectors
        .iter()
        .map(|d| d.pulse.support())
        .fold(dt, f64::max);
    let walk = if cfg.lo_linewidth > 0.0 {
        let start = -warm_time - dt;
        let steps = n + ((warm_time + dt) / dt).ceil() as usize + 1;
        let step_sd = (TAU * cfg.lo_linewidth * dt).sqrt();
        let normal = Normal::new(0.0, step_sd).map_err(|e| Error::domain(e.to_string()))?;
        let mut rng = stream_rng(seed, trial, Stream::Phase);
        let mut phi = 0.0;
        let phases: Vec<f64> = (0..steps)
            .map(|_| {
                let p = phi;
                phi += normal.sample(&mut rng);
                p
            })
            .collect();
        Some(PhaseWalk {
            start,
            dt,
            phases: phases.into(),
        })
    } else {
        None
    };
    let [p1, p2] = PortRate::pair(&setup.signal, &setup.lo, &setup.beat, &setup.path);
    let ports = [p1.with_walk(walk.clone()), p2.with_walk(walk)];

    let mode = setup.resolved_mode(cfg);
    let noiseless = setup.model == NoiseModel::ClassicalNoiseless;
    let mut currents = Vec::with_capacity(2);
    for (i, (port, det)) in ports.iter().zip(&setup.detectors).enumerate() {
        let stream = if i == 0 { Stream::Detector1 } else { Stream::Detector2 };
        let mut rng = stream_rng(seed, trial, stream);
        currents.push(detector_current(port, det, n, dt, mode, noiseless, &mut rng)?);
    }
    let mut j2 = currents.pop().unwrap();
    let mut j1 = currents.pop().unwrap();

    let excess = image_band_factor(setup.model, &setup.beat, &setup.path);
    if excess > 0.0 {
        // Count-equivalent Gaussian noise entering the ports with opposite signs.
        let eta = 0.5 * (setup.detectors[0].efficiency + setup.detectors[1].efficiency);
        let mu1 = interval_means(&ports[0], setup.detectors[0].efficiency, n, warm_bins, dt);
        let mu2 = interval_means(&ports[1], setup.detectors[1].efficiency, n, warm_bins, dt);
        let mut rng = stream_rng(seed, trial, Stream::ImageBand);
        let g: Vec<f64> = mu1
            .iter()
            .zip(&mu2)
            .map(|(a, b)| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z * (eta * excess * (a + b)).sqrt()
            })
            .collect();
        for (j, det, sign) in [(&mut j1, &setup.detectors[0], 0.5), (&mut j2, &setup.detectors[1], -0.5)] {
            let kernel = det.pulse.bin_kernel(dt);
            let offset = warm_bins - (kernel.len() - 1);
            let shaped = convolve_counts(&g[offset..], &kernel, n);
            for (v, s) in j.iter_mut().zip(shaped) {
                *v += sign * s;
            }
        }
    }

    for (j, det, stream) in [
        (&mut j1, &setup.detectors[0], Stream::Electronics1),
        (&mut j2, &setup.detectors[1], Stream::Electronics2),
    ] {
        let mut rng = stream_rng(seed, trial, stream);
        add_white_noise(j, det.electronics_psd, cfg.sample_rate, &mut rng);
    }

    PhotocurrentTrace::from_detectors(j1, j2, cfg.sample_rate, seed, trial)
}
