//! Spectrum-analyzer emulation on sampled currents.
//!
//! Welch averaging with a periodic Hann window and 50% overlap. The window
//! length is chosen so that the window's equivalent noise bandwidth matches
//! the requested resolution bandwidth; the achieved ENBW is what
//! [`NoiseSpectrum::rbw`] reports, so `bin power = psd · rbw` holds for both
//! noise and centred tones.

use std::f64::consts::TAU;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// 10·log10(2).
pub const THREE_DB: f64 = 3.010_299_956_639_812;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DetectorMode {
    #[default]
    Rms,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumConfig {
    /// Resolution bandwidth (Hz).
    pub rbw: f64,
    /// Analysis span `(f_lo, f_hi)` in Hz.
    pub span: (f64, f64),
    /// Number of trace spectra to average; 0 averages all that are available.
    pub averaging: usize,
    pub detector_mode: DetectorMode,
    /// Power reference for `power_db` (A²).
    pub reference: f64,
}

impl SpectrumConfig {
    pub fn new(rbw: f64, span: (f64, f64)) -> Self {
        Self {
            rbw,
            span,
            averaging: 0,
            detector_mode: DetectorMode::Rms,
            reference: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rbw > 0.0) || !self.rbw.is_finite() {
            return Err(Error::domain("rbw must be positive"));
        }
        let (lo, hi) = self.span;
        if !(lo >= 0.0 && hi > lo) {
            return Err(Error::domain(format!(
                "span must satisfy 0 <= f_lo < f_hi, got ({lo}, {hi})"
            )));
        }
        if self.rbw > (hi - lo) / 10.0 {
            return Err(Error::domain(format!(
                "rbw {} Hz exceeds a tenth of the {} Hz span",
                self.rbw,
                hi - lo
            )));
        }
        if !(self.reference > 0.0) {
            return Err(Error::domain("dB reference must be positive"));
        }
        Ok(())
    }
}

/// One-sided PSD over the analysis span.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpectrum {
    /// Hz, strictly increasing.
    pub freqs: Vec<f64>,
    /// A²/Hz
    pub psd: Vec<f64>,
    /// `10 log10(psd · rbw / reference)`; NaN for invalid bins.
    pub power_db: Vec<f64>,
    /// Equivalent noise bandwidth of one bin (Hz).
    pub rbw: f64,
    /// False where a bin carries no usable estimate.
    pub valid: Vec<bool>,
    /// Number of periodograms averaged.
    pub averages: usize,
    pub reference: f64,
}

impl NoiseSpectrum {
    pub fn from_psd(freqs: Vec<f64>, psd: Vec<f64>, rbw: f64, averages: usize, reference: f64) -> Self {
        let power_db = psd.iter().map(|p| 10.0 * (p * rbw / reference).log10()).collect();
        let valid = vec![true; psd.len()];
        Self {
            freqs,
            psd,
            power_db,
            rbw,
            valid,
            averages,
            reference,
        }
    }

    /// Spectrum of a known PSD function sampled on `freqs`.
    pub fn from_fn(freqs: Vec<f64>, rbw: f64, reference: f64, psd: impl Fn(f64) -> f64) -> Self {
        let values = freqs.iter().map(|&f| psd(f)).collect();
        Self::from_psd(freqs, values, rbw, 0, reference)
    }

    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    /// Bin spacing (Hz).
    pub fn bin_spacing(&self) -> f64 {
        if self.freqs.len() < 2 {
            0.0
        } else {
            self.freqs[1] - self.freqs[0]
        }
    }

    /// `Σ psd · Δf` over the valid bins.
    pub fn integrated_power(&self) -> f64 {
        let df = self.bin_spacing();
        self.psd
            .iter()
            .zip(&self.valid)
            .filter(|(_, v)| **v)
            .map(|(p, _)| p * df)
            .sum()
    }

    fn band_db(&self, exclusions: &[(f64, f64)]) -> Vec<f64> {
        self.freqs
            .iter()
            .zip(&self.power_db)
            .zip(&self.valid)
            .filter(|((f, _), v)| **v && !exclusions.iter().any(|&(a, b)| **f >= a && **f <= b))
            .map(|((_, p), _)| *p)
            .collect()
    }

    fn same_grid(&self, other: &NoiseSpectrum) -> bool {
        self.freqs == other.freqs && self.rbw == other.rbw
    }
}

/// Smallest integer `>= n` with no prime factor above 5.
fn next_smooth(n: usize) -> usize {
    (n.max(1)..)
        .find(|&m| {
            let mut r = m;
            for p in [2, 3, 5] {
                while r % p == 0 {
                    r /= p;
                }
            }
            r == 1
        })
        .unwrap()
}

/// Welch estimator bound to one sample rate and configuration.
pub struct WelchEstimator {
    sample_rate: f64,
    window: Vec<f64>,
    window_power: f64,
    hop: usize,
    fft: Arc<dyn Fft<f64>>,
    bins: std::ops::RangeInclusive<usize>,
    enbw: f64,
    reference: f64,
}

impl std::fmt::Debug for WelchEstimator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("WelchEstimator")
            .field("sample_rate", &self.sample_rate)
            .field("window_len", &self.window.len())
            .field("hop", &self.hop)
            .field("enbw", &self.enbw)
            .finish()
    }
}

impl WelchEstimator {
    pub fn new(sample_rate: f64, cfg: &SpectrumConfig) -> Result<Self> {
        cfg.validate()?;
        let nyquist = sample_rate / 2.0;
        if cfg.span.1 > nyquist {
            return Err(Error::range(format!(
                "span upper edge {} Hz lies above the Nyquist frequency {nyquist} Hz",
                cfg.span.1
            )));
        }
        // Periodic Hann: ENBW = 1.5 bins.
        let n = next_smooth((1.5 * sample_rate / cfg.rbw).ceil() as usize).max(4);
        let window: Vec<f64> = (0..n)
            .map(|i| 0.5 - 0.5 * (TAU * i as f64 / n as f64).cos())
            .collect();
        let sum: f64 = window.iter().sum();
        let window_power: f64 = window.iter().map(|w| w * w).sum();
        let enbw = sample_rate * window_power / (sum * sum);
        let df = sample_rate / n as f64;
        let k_lo = (cfg.span.0 / df).ceil() as usize;
        let k_hi = ((cfg.span.1 / df).floor() as usize).min(n / 2);
        if k_lo > k_hi {
            return Err(Error::range("span contains no frequency bins"));
        }
        let fft = FftPlanner::new().plan_fft_forward(n);
        Ok(Self {
            sample_rate,
            window,
            window_power,
            hop: n / 2,
            fft,
            bins: k_lo..=k_hi,
            enbw,
            reference: cfg.reference,
        })
    }

    pub fn window_len(&self) -> usize {
        self.window.len()
    }

    /// Achieved resolution bandwidth (Hz).
    pub fn rbw(&self) -> f64 {
        self.enbw
    }

    /// Shortest trace giving two overlapping windows.
    pub fn min_samples(&self) -> usize {
        self.window.len() + self.hop
    }

    pub fn segments(&self, samples: usize) -> usize {
        if samples < self.window.len() {
            0
        } else {
            (samples - self.window.len()) / self.hop + 1
        }
    }

    pub fn freqs(&self) -> Vec<f64> {
        let df = self.sample_rate / self.window.len() as f64;
        self.bins.clone().map(|k| k as f64 * df).collect()
    }

    fn load<'a>(&'a self, segment: &'a [f64]) -> impl Iterator<Item = f64> + 'a {
        let mean = segment.iter().sum::<f64>() / segment.len() as f64;
        segment.iter().zip(&self.window).map(move |(x, w)| (x - mean) * w)
    }

    /// Averaged one-sided PSD of `samples`.
    pub fn estimate(&self, samples: &[f64]) -> Result<NoiseSpectrum> {
        let n = self.window.len();
        let segments = self.segments(samples.len());
        if segments < 2 {
            return Err(Error::Range(format!(
                "trace of {} samples is too short: at least {} are needed for rbw {:.4} Hz",
                samples.len(),
                self.min_samples(),
                self.enbw
            )));
        }
        let starts: Vec<usize> = (0..segments).map(|s| s * self.hop).collect();
        let mut acc = vec![0.0f64; n / 2 + 1];
        let mut buf = vec![Complex::new(0.0, 0.0); n];
        let mut scratch = vec![Complex::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];

        // Two real segments per complex transform: z = x + i y.
        for pair in starts.chunks(2) {
            let x = &samples[pair[0]..pair[0] + n];
            match pair.get(1) {
                Some(&s) => {
                    let y = &samples[s..s + n];
                    for ((b, xv), yv) in buf.iter_mut().zip(self.load(x)).zip(self.load(y)) {
                        *b = Complex::new(xv, yv);
                    }
                }
                None => {
                    for (b, xv) in buf.iter_mut().zip(self.load(x)) {
                        *b = Complex::new(xv, 0.0);
                    }
                }
            }
            self.fft.process_with_scratch(&mut buf, &mut scratch);
            for (k, a) in acc.iter_mut().enumerate() {
                let zk = buf[k];
                let zc = buf[(n - k) % n].conj();
                let xk = (zk + zc) * 0.5;
                let yk = (zk - zc) * Complex::new(0.0, -0.5);
                *a += xk.norm_sqr() + yk.norm_sqr();
            }
        }

        let base = 1.0 / (self.sample_rate * self.window_power * segments as f64);
        let freqs = self.freqs();
        let psd = self
            .bins
            .clone()
            .map(|k| {
                let one_sided = if k == 0 || (n.is_multiple_of(2) && k == n / 2) { 1.0 } else { 2.0 };
                one_sided * base * acc[k]
            })
            .collect();
        Ok(NoiseSpectrum::from_psd(freqs, psd, self.enbw, segments, self.reference))
    }
}

/// Averaged-periodogram PSD of one trace.
pub fn estimate_psd(samples: &[f64], sample_rate: f64, cfg: &SpectrumConfig) -> Result<NoiseSpectrum> {
    WelchEstimator::new(sample_rate, cfg)?.estimate(samples)
}

/// Average of spectra on a common grid, weighted by their periodogram counts.
/// The reduction runs in slice order.
pub fn average_spectra(spectra: &[NoiseSpectrum]) -> Result<NoiseSpectrum> {
    let first = spectra
        .first()
        .ok_or_else(|| Error::range("no spectra to average"))?;
    let mut sum = vec![0.0; first.len()];
    let mut valid = vec![true; first.len()];
    let mut weight = 0usize;
    for s in spectra {
        if !s.same_grid(first) {
            return Err(Error::Shape("spectra to average use different grids".into()));
        }
        let w = s.averages.max(1);
        for ((acc, p), (ok, v)) in sum.iter_mut().zip(&s.psd).zip(valid.iter_mut().zip(&s.valid)) {
            *acc += w as f64 * p;
            *ok &= *v;
        }
        weight += w;
    }
    let psd = sum.into_iter().map(|p| p / weight as f64).collect();
    let mut out = NoiseSpectrum::from_psd(first.freqs.clone(), psd, first.rbw, weight, first.reference);
    for (i, ok) in valid.into_iter().enumerate() {
        if !ok {
            out.valid[i] = false;
            out.power_db[i] = f64::NAN;
        }
    }
    Ok(out)
}

/// Median bin power (dB) over valid bins outside the exclusion intervals.
pub fn noise_floor(spectrum: &NoiseSpectrum, exclusions: &[(f64, f64)]) -> Result<f64> {
    let mut band = spectrum.band_db(exclusions);
    if band.is_empty() {
        return Err(Error::range("no bins left after exclusions"));
    }
    band.sort_by(f64::total_cmp);
    let m = band.len();
    Ok(if m % 2 == 1 {
        band[m / 2]
    } else {
        0.5 * (band[m / 2 - 1] + band[m / 2])
    })
}

/// Standard deviation (dB) of bin power over the same band as [`noise_floor`].
pub fn band_flatness_db(spectrum: &NoiseSpectrum, exclusions: &[(f64, f64)]) -> Result<f64> {
    let band = spectrum.band_db(exclusions);
    if band.len() < 2 {
        return Err(Error::range("fewer than two bins left after exclusions"));
    }
    let n = band.len() as f64;
    let mean = band.iter().sum::<f64>() / n;
    Ok((band.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
}

/// What to do with bins where the dark spectrum is not below the total.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum ClampPolicy {
    #[default]
    Invalidate,
    /// Replace the difference by this PSD (A²/Hz).
    Floor(f64),
}

/// Per-bin linear subtraction of an electronics-noise (dark) spectrum.
pub fn subtract_electronics(
    total: &NoiseSpectrum,
    dark: &NoiseSpectrum,
    policy: ClampPolicy,
) -> Result<NoiseSpectrum> {
    if !total.same_grid(dark) {
        return Err(Error::Shape(
            "total and dark spectra use different frequency grids or rbw".into(),
        ));
    }
    let mut out = total.clone();
    for i in 0..out.len() {
        let diff = total.psd[i] - dark.psd[i];
        let ok = total.valid[i] && dark.valid[i];
        if ok && (diff > 0.0 || (diff == 0.0 && dark.psd[i] == 0.0)) {
            out.psd[i] = diff;
        } else {
            match policy {
                ClampPolicy::Floor(f) if ok => out.psd[i] = f,
                _ => {
                    out.valid[i] = false;
                    out.psd[i] = f64::NAN;
                }
            }
        }
        out.power_db[i] = if out.valid[i] {
            10.0 * (out.psd[i] * out.rbw / out.reference).log10()
        } else {
            f64::NAN
        };
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftCheck {
    pub floor_a_db: f64,
    pub floor_b_db: f64,
    /// `floor(b) − floor(a)`
    pub difference_db: f64,
    pub pass: bool,
}

/// Compares two floors against the 3.01 dB step expected from doubling the oscillator power.
pub fn check_3db_shift(
    a: &NoiseSpectrum,
    b: &NoiseSpectrum,
    exclusions: &[(f64, f64)],
    tolerance_db: f64,
) -> Result<ShiftCheck> {
    let floor_a_db = noise_floor(a, exclusions)?;
    let floor_b_db = noise_floor(b, exclusions)?;
    let difference_db = floor_b_db - floor_a_db;
    Ok(ShiftCheck {
        floor_a_db,
        floor_b_db,
        difference_db,
        pass: (difference_db - THREE_DB).abs() <= tolerance_db,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn gaussian(n: usize, sigma: f64, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = Normal::new(0.0, sigma).unwrap();
        (0..n).map(|_| d.sample(&mut rng)).collect()
    }

    #[test]
    fn smooth_sizes() {
        assert_eq!(next_smooth(100_000), 100_000);
        assert_eq!(next_smooth(104_858), 104_976);
        assert_eq!(next_smooth(7), 8);
    }

    #[test]
    fn single_tone_calibration() {
        let fs = 1e6;
        let cfg = SpectrumConfig::new(1500.0, (0.0, 5e5));
        let est = WelchEstimator::new(fs, &cfg).unwrap();
        // Put the tone on a bin centre.
        let df = fs / est.window_len() as f64;
        let f0 = 100.0 * df;
        let amp = 0.3;
        let x: Vec<f64> = (0..40_000).map(|k| amp * (TAU * f0 * k as f64 / fs + 0.2).sin()).collect();
        let s = est.estimate(&x).unwrap();
        let i = s.freqs.iter().position(|&f| (f - f0).abs() < 1e-6).unwrap();
        assert_relative_eq!(s.psd[i] * s.rbw, amp * amp / 2.0, max_relative = 1e-6);
    }

    #[test]
    fn white_noise_level_and_parseval() {
        let fs = 1e5;
        let sigma = 2.5;
        let x = gaussian(400_000, sigma, 3);
        let cfg = SpectrumConfig::new(200.0, (0.0, fs / 2.0));
        let s = estimate_psd(&x, fs, &cfg).unwrap();
        assert!(s.averages >= 16);
        let expected = 2.0 * sigma * sigma / fs;
        let mean_psd = s.psd[1..s.len() - 1].iter().sum::<f64>() / (s.len() - 2) as f64;
        assert_relative_eq!(mean_psd, expected, max_relative = 0.01);
        let (_, var) = crate::sim::mean_and_variance(&x);
        assert_relative_eq!(s.integrated_power(), var, max_relative = 0.01);
    }

    #[test]
    fn rbw_halving_keeps_psd_and_shifts_bin_power() {
        let fs = 1e5;
        let x = gaussian(1 << 20, 1.0, 4);
        let span = (1e4, 4e4);
        let a = estimate_psd(&x, fs, &SpectrumConfig::new(200.0, span)).unwrap();
        let b = estimate_psd(&x, fs, &SpectrumConfig::new(100.0, span)).unwrap();
        let mean = |s: &NoiseSpectrum| s.psd.iter().sum::<f64>() / s.len() as f64;
        assert_relative_eq!(mean(&a), mean(&b), max_relative = 0.01);
        let shift = noise_floor(&a, &[]).unwrap() - noise_floor(&b, &[]).unwrap();
        let expected = 10.0 * (a.rbw / b.rbw).log10();
        assert!((shift - expected).abs() < 0.05, "{shift} vs {expected}");
    }

    #[test]
    fn too_short_trace() {
        let cfg = SpectrumConfig::new(300.0, (1e5, 5e6));
        let err = estimate_psd(&vec![0.0; 1000], 2e7, &cfg).unwrap_err();
        assert!(matches!(err, Error::Range(ref m) if m.contains("at least")), "{err}");
    }

    #[test]
    fn config_rejections() {
        assert!(SpectrumConfig::new(0.0, (0.0, 1e6)).validate().is_err());
        assert!(SpectrumConfig::new(1e3, (1e6, 1e6)).validate().is_err());
        assert!(SpectrumConfig::new(2e5, (0.0, 1e6)).validate().is_err());
        assert!(WelchEstimator::new(1e6, &SpectrumConfig::new(100.0, (0.0, 6e5))).is_err());
    }

    fn flat(db: f64, n: usize) -> NoiseSpectrum {
        let freqs: Vec<f64> = (0..n).map(|i| i as f64 * 10.0).collect();
        NoiseSpectrum::from_fn(freqs, 1.0, 1.0, |_| 10f64.powf(db / 10.0))
    }

    #[test]
    fn floor_of_flat_spectrum() {
        let s = flat(-90.0, 101);
        assert_relative_eq!(noise_floor(&s, &[]).unwrap(), -90.0, epsilon = 1e-9);
        assert!(band_flatness_db(&s, &[]).unwrap() < 1e-9);
    }

    #[test]
    fn excluded_tone_does_not_move_floor() {
        let base = flat(-90.0, 101);
        let mut toned = base.clone();
        toned.psd[50] = 1e-3;
        toned.power_db[50] = -30.0;
        let excl = [(495.0, 505.0)];
        assert_eq!(noise_floor(&toned, &excl).unwrap(), noise_floor(&base, &excl).unwrap());
        assert!(matches!(noise_floor(&base, &[(0.0, 1e4)]), Err(Error::Range(_))));
    }

    #[test]
    fn electronics_subtraction() {
        let total = flat(-90.0, 11);
        let zero = NoiseSpectrum::from_fn(total.freqs.clone(), 1.0, 1.0, |_| 0.0);
        assert_eq!(subtract_electronics(&total, &zero, ClampPolicy::Invalidate).unwrap(), total);

        let dark = NoiseSpectrum::from_fn(total.freqs.clone(), 1.0, 1.0, |_| 0.5e-9);
        let out = subtract_electronics(&total, &dark, ClampPolicy::Invalidate).unwrap();
        for (o, d) in out.psd.iter().zip(&dark.psd) {
            assert_relative_eq!(o, d, max_relative = 1e-12);
        }
        assert_relative_eq!(
            noise_floor(&total, &[]).unwrap() - noise_floor(&out, &[]).unwrap(),
            THREE_DB,
            epsilon = 1e-9
        );

        let mut hot = dark.clone();
        hot.psd[3] = 2e-9;
        let out = subtract_electronics(&total, &hot, ClampPolicy::Invalidate).unwrap();
        assert!(!out.valid[3]);
        assert_eq!(out.valid.iter().filter(|v| !**v).count(), 1);
        let floored = subtract_electronics(&total, &hot, ClampPolicy::Floor(1e-20)).unwrap();
        assert!(floored.valid[3]);
        assert_eq!(floored.psd[3], 1e-20);

        let other = flat(-90.0, 12);
        assert!(matches!(
            subtract_electronics(&total, &other, ClampPolicy::Invalidate),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn three_db_check() {
        let freqs: Vec<f64> = (1..200).map(|i| i as f64 * 1e4).collect();
        let a = NoiseSpectrum::from_fn(freqs.clone(), 300.0, 1.0, |_| 1.1e-21);
        let b = NoiseSpectrum::from_fn(freqs, 300.0, 1.0, |_| 2.2e-21);
        let c = check_3db_shift(&a, &b, &[], 0.01).unwrap();
        assert!(c.pass);
        assert_relative_eq!(c.difference_db, THREE_DB, epsilon = 1e-9);
        let same = check_3db_shift(&a, &a, &[], 0.1).unwrap();
        assert_eq!(same.difference_db, 0.0);
        assert!(!same.pass);
    }

    #[test]
    fn averaging_is_weighted_and_checks_grids() {
        let a = NoiseSpectrum { averages: 1, ..flat(-90.0, 5) };
        let mut b = NoiseSpectrum { averages: 3, ..flat(-80.0, 5) };
        let avg = average_spectra(&[a.clone(), b.clone()]).unwrap();
        assert_relative_eq!(avg.psd[0], (1e-9 + 3e-8) / 4.0, max_relative = 1e-12);
        assert_eq!(avg.averages, 4);
        b.rbw = 2.0;
        assert!(average_spectra(&[a, b]).is_err());
    }
}
