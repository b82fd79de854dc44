//! Closed-form noise of the balanced detector.
//!
//! The per-detector autocorrelation is the shot term
//! `η ⟨I_i⟩ ∫ j(t') j(t'+τ) dt'` plus a normally ordered intensity term
//! `η² ∫∫ λ_i j j`. For coherent inputs every normally ordered field
//! fluctuation vanishes, so `λ_i = 0` and the detectors are uncorrelated.
//! With `⟨I_i⟩ ≈ E_l²/2` the variance of `J₋ = J₁ − J₂` is
//! `(η E_l² / 2) Σ_i ∫ j_i²`, with no dependence on the beat frequency.
//!
//! [`NoiseModel::ImageBand`] is the competing hypothesis in which a vacuum
//! image-band mode beats with the oscillator whenever `Ω ≠ 0`. It is
//! realized as a delta-correlated `λ_i` with weight `η_c V̄² ⟨I_i⟩ / 2` that
//! is anticorrelated between the ports, so `J₋` gains `η η_c V̄²` times its
//! shot noise and `J₁ + J₂` gains nothing.

use crate::detector::DetectorModel;
use crate::error::{Error, Result};
use crate::optics::{BeatConfig, FieldSpec, OpticalPath};
use crate::sim::PhotocurrentTrace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NoiseModel {
    /// Glauber coherence: normally ordered correlations of coherent light vanish.
    Coherence,
    /// Image-band vacuum mode adds noise to heterodyne detection only.
    ImageBand,
    /// No photon-number fluctuations at all.
    ClassicalNoiseless,
}

impl NoiseModel {
    pub fn name(&self) -> &'static str {
        match self {
            NoiseModel::Coherence => "coherence",
            NoiseModel::ImageBand => "imageband",
            NoiseModel::ClassicalNoiseless => "classical-noiseless",
        }
    }
}

impl std::str::FromStr for NoiseModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "coherence" => Ok(NoiseModel::Coherence),
            "imageband" | "image-band" => Ok(NoiseModel::ImageBand),
            "classical-noiseless" | "classical" | "noiseless" => Ok(NoiseModel::ClassicalNoiseless),
            other => Err(Error::domain(format!("unknown noise model '{other}'"))),
        }
    }
}

impl std::fmt::Display for NoiseModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Fraction of the shot-noise power that the image-band mode adds to `J₋`
/// per unit detector efficiency. Zero for homodyne and for the other models.
pub fn image_band_factor(model: NoiseModel, beat: &BeatConfig, path: &OpticalPath) -> f64 {
    match model {
        NoiseModel::ImageBand if !beat.is_homodyne() => {
            let v = path.mean_visibility();
            path.collection_efficiency * v * v
        }
        _ => 0.0,
    }
}

/// Normally ordered intensity autocorrelation `λ_i(t, ι)` (photons²/s²).
///
/// All models are stationary and at most delta-correlated in `ι`; the return
/// value is the weight of the `δ(ι)` component at `ι = 0` and zero elsewhere.
/// Coherence and ClassicalNoiseless give exactly zero.
pub fn lambda_autocorr(
    model: NoiseModel,
    _signal: &FieldSpec,
    lo: &FieldSpec,
    beat: &BeatConfig,
    path: &OpticalPath,
    _t: f64,
    iota: f64,
) -> f64 {
    if iota != 0.0 {
        return 0.0;
    }
    let mean_intensity = 0.5 * lo.photon_rate();
    0.5 * image_band_factor(model, beat, path) * mean_intensity
}

/// `⟨ΔJ_i(t) ΔJ_i(t+τ)⟩` for one detector (A²).
pub fn detector_autocorr(
    model: NoiseModel,
    lo: &FieldSpec,
    beat: &BeatConfig,
    path: &OpticalPath,
    detector: &DetectorModel,
    tau: f64,
) -> Result<f64> {
    if model == NoiseModel::ClassicalNoiseless {
        return Ok(0.0);
    }
    let eta = detector.efficiency;
    let pulse_corr = detector.pulse.autocorrelation(tau)?;
    let shot = eta * 0.5 * lo.photon_rate() * pulse_corr;
    let lambda = 0.5 * image_band_factor(model, beat, path) * 0.5 * lo.photon_rate();
    Ok(shot + eta * eta * lambda * pulse_corr)
}

/// Variance of the differenced photocurrent, `(η E_l²/2) Σ_i ∫ j_i²` (A²).
///
/// The per-detector efficiencies are applied individually, which reduces to
/// the usual expression for identical detectors.
pub fn shot_variance(lo: &FieldSpec, detectors: &[DetectorModel; 2]) -> Result<f64> {
    let half_rate = 0.5 * lo.photon_rate();
    let mut total = 0.0;
    for d in detectors {
        total += d.efficiency * half_rate * d.pulse.energy()?;
    }
    Ok(total)
}

/// One-sided shot-noise PSD of `J₋` at frequency `f` (A²/Hz):
/// `Σ_i η_i E_l² |ĵ_i(f)|²`.
pub fn shot_psd(lo: &FieldSpec, detectors: &[DetectorModel; 2], f: f64) -> f64 {
    let rate = lo.photon_rate();
    detectors
        .iter()
        .map(|d| d.efficiency * rate * d.pulse.spectrum_sq(f))
        .sum()
}

/// Quantum-noise floor of `J₋` under `model` (A²/Hz), electronics excluded.
pub fn floor_psd(
    model: NoiseModel,
    lo: &FieldSpec,
    beat: &BeatConfig,
    path: &OpticalPath,
    detectors: &[DetectorModel; 2],
    f: f64,
) -> f64 {
    match model {
        NoiseModel::ClassicalNoiseless => 0.0,
        NoiseModel::Coherence => shot_psd(lo, detectors, f),
        NoiseModel::ImageBand => {
            let rate = lo.photon_rate();
            let excess = image_band_factor(model, beat, path);
            detectors
                .iter()
                .map(|d| {
                    let eta = d.efficiency;
                    eta * rate * d.pulse.spectrum_sq(f) * (1.0 + eta * excess)
                })
                .sum()
        }
    }
}

/// Electronics contribution to the `J₋` PSD (A²/Hz).
pub fn electronics_psd(detectors: &[DetectorModel; 2]) -> f64 {
    detectors.iter().map(|d| d.electronics_psd).sum()
}

/// `⟨ΔJ₁(t) ΔJ₂(t+τ)⟩` (A²). Zero unless the image-band mode is active.
pub fn cross_correlation(
    model: NoiseModel,
    lo: &FieldSpec,
    beat: &BeatConfig,
    path: &OpticalPath,
    detectors: &[DetectorModel; 2],
    tau: f64,
) -> Result<f64> {
    let factor = image_band_factor(model, beat, path);
    if factor == 0.0 {
        return Ok(0.0);
    }
    let lambda = 0.5 * factor * 0.5 * lo.photon_rate();
    let pulse = detectors[0].pulse.cross_correlation(&detectors[1].pulse, tau)?;
    Ok(-detectors[0].efficiency * detectors[1].efficiency * lambda * pulse)
}

/// Predicted heterodyne-minus-homodyne floor difference (dB) for unit
/// detector efficiency, with the optical losses carried by `path`.
pub fn floor_difference_db(model: NoiseModel, path: &OpticalPath) -> f64 {
    match model {
        NoiseModel::ImageBand => {
            let v = path.mean_visibility();
            10.0 * (1.0 + path.collection_efficiency * v * v).log10()
        }
        NoiseModel::Coherence | NoiseModel::ClassicalNoiseless => 0.0,
    }
}

/// The four terms of `⟨ΔJ₋(t) ΔJ₋(t+τ)⟩` at one lag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AutocorrDecomposition {
    pub lag: usize,
    /// `⟨ΔJ₁(t) ΔJ₁(t+τ)⟩`
    pub auto_11: f64,
    /// `⟨ΔJ₂(t) ΔJ₂(t+τ)⟩`
    pub auto_22: f64,
    /// `⟨ΔJ₁(t) ΔJ₂(t+τ)⟩`
    pub cross_12: f64,
    /// `⟨ΔJ₂(t) ΔJ₁(t+τ)⟩`
    pub cross_21: f64,
    /// Autocorrelation of `J₋` computed directly.
    pub direct: f64,
}

impl AutocorrDecomposition {
    pub fn sum(&self) -> f64 {
        self.auto_11 + self.auto_22 - self.cross_12 - self.cross_21
    }

    /// `|sum − direct|` relative to the magnitude of the terms.
    pub fn relative_mismatch(&self) -> f64 {
        let scale = self.direct.abs().max(
            self.auto_11.abs() + self.auto_22.abs() + self.cross_12.abs() + self.cross_21.abs(),
        );
        if scale == 0.0 {
            0.0
        } else {
            (self.sum() - self.direct).abs() / scale
        }
    }
}

fn centered(x: &[f64]) -> Vec<f64> {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let mut out: Vec<f64> = x.iter().map(|v| v - mean).collect();
    // Second pass removes the rounding residue of the first mean.
    let residue = out.iter().sum::<f64>() / n;
    out.iter_mut().for_each(|v| *v -= residue);
    out
}

fn lagged_covariance(a: &[f64], b: &[f64], lag: usize) -> f64 {
    let n = a.len() - lag;
    a[..n].iter().zip(&b[lag..]).map(|(x, y)| x * y).sum::<f64>() / n as f64
}

/// Splits the `J₋` autocorrelation at lag `tau` (s) into detector auto- and
/// cross-correlations. The lag is rounded to the nearest sample.
pub fn autocorr_decomposition(trace: &PhotocurrentTrace, tau: f64) -> Result<AutocorrDecomposition> {
    let n = trace.len();
    let lag_f = (tau.abs() * trace.sample_rate).round();
    if n == 0 || lag_f >= n as f64 {
        return Err(Error::range(format!(
            "lag of {lag_f} samples does not fit in a trace of {n} samples"
        )));
    }
    let lag = lag_f as usize;
    let d1 = centered(&trace.j1);
    let d2 = centered(&trace.j2);
    let dm = centered(&trace.j_minus);
    Ok(AutocorrDecomposition {
        lag,
        auto_11: lagged_covariance(&d1, &d1, lag),
        auto_22: lagged_covariance(&d2, &d2, lag),
        cross_12: lagged_covariance(&d1, &d2, lag),
        cross_21: lagged_covariance(&d2, &d1, lag),
        direct: lagged_covariance(&dm, &dm, lag),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::{PulseShape, ELECTRON_CHARGE};
    use crate::optics::{photon_rate_from_power, SPEED_OF_LIGHT};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::TAU;

    const OMEGA: f64 = TAU * SPEED_OF_LIGHT / 1064e-9;

    fn lo(rate: f64) -> FieldSpec {
        FieldSpec::new(OMEGA, rate.sqrt(), 0.0).unwrap()
    }

    fn pair(pulse: PulseShape) -> [DetectorModel; 2] {
        let d = DetectorModel::new(1.0, pulse, 0.0).unwrap();
        [d, d]
    }

    fn het() -> BeatConfig {
        BeatConfig::heterodyne(TAU * 3e6, 0.0)
    }

    #[test]
    fn coherent_lambda_vanishes() {
        let sig = lo(5e7);
        for model in [NoiseModel::Coherence, NoiseModel::ClassicalNoiseless] {
            for (t, iota) in [(0.0, 0.0), (1e-3, 2e-9), (0.5, 0.0)] {
                for beat in [het(), BeatConfig::homodyne(0.3)] {
                    assert_eq!(
                        lambda_autocorr(model, &sig, &lo(1e16), &beat, &OpticalPath::ideal(), t, iota),
                        0.0
                    );
                }
            }
        }
    }

    #[test]
    fn image_band_lambda_only_for_heterodyne() {
        let path = OpticalPath::ideal();
        let l = lambda_autocorr(NoiseModel::ImageBand, &lo(1.0), &lo(4e6), &het(), &path, 0.0, 0.0);
        // Half the per-detector mean intensity E_l²/2.
        assert_eq!(l, 1e6);
        let hom = BeatConfig::homodyne(0.0);
        assert_eq!(
            lambda_autocorr(NoiseModel::ImageBand, &lo(1.0), &lo(4e6), &hom, &path, 0.0, 0.0),
            0.0
        );
        assert_eq!(
            lambda_autocorr(NoiseModel::ImageBand, &lo(1.0), &lo(4e6), &het(), &path, 0.0, 1e-9),
            0.0
        );
    }

    #[test]
    fn shot_variance_examples() {
        let pulse = PulseShape::rectangular(ELECTRON_CHARGE, 1e-8).unwrap();
        assert_eq!(shot_variance(&lo(0.0), &pair(pulse)).unwrap(), 0.0);
        let v = shot_variance(&lo(1e6), &pair(pulse)).unwrap();
        let q = ELECTRON_CHARGE;
        assert_relative_eq!(v, 1e6 * q * q * 1e8, max_relative = 1e-14);
        let doubled = shot_variance(&lo(2e6), &pair(pulse)).unwrap();
        assert_relative_eq!(doubled, 2.0 * v, max_relative = 1e-14);
        assert_relative_eq!(10.0 * (doubled / v).log10(), 3.0103, epsilon = 1e-4);
        assert!(matches!(
            shot_variance(&lo(1e6), &pair(PulseShape::delta(q).unwrap())),
            Err(Error::UsePsdForm)
        ));
    }

    #[test]
    fn shot_psd_examples() {
        let q = ELECTRON_CHARGE;
        let delta = pair(PulseShape::delta(q).unwrap());
        assert_eq!(shot_psd(&lo(0.0), &delta, 1e6), 0.0);
        let four = FieldSpec::from_power(4e-3, 1064e-9, 0.0).unwrap();
        let eight = FieldSpec::from_power(8e-3, 1064e-9, 0.0).unwrap();
        let ratio = shot_psd(&eight, &delta, 1e5) / shot_psd(&four, &delta, 1e5);
        assert_relative_eq!(ratio, 2.0, max_relative = 1e-15);
        let r4 = photon_rate_from_power(4e-3, 1064e-9).unwrap();
        assert_relative_eq!(shot_psd(&four, &delta, 0.0), 2.0 * r4 * q * q, max_relative = 1e-12);

        let rect = pair(PulseShape::rectangular(q, 1e-8).unwrap());
        assert!(shot_psd(&lo(1e6), &rect, 1e8) < 1e-20 * shot_psd(&lo(1e6), &rect, 0.0));
    }

    #[test]
    fn cross_correlation_zero_for_coherent_light() {
        let d = pair(PulseShape::default());
        for tau in [0.0, 3e-9, -4e-9, 1.0] {
            for model in [NoiseModel::Coherence, NoiseModel::ClassicalNoiseless] {
                assert_eq!(
                    cross_correlation(model, &lo(1e16), &het(), &OpticalPath::ideal(), &d, tau).unwrap(),
                    0.0
                );
            }
        }
    }

    #[test]
    fn image_band_correlations_give_full_penalty() {
        let d = pair(PulseShape::default());
        let path = OpticalPath::ideal();
        let l = lo(1e12);
        let cross =
            cross_correlation(NoiseModel::ImageBand, &l, &het(), &path, &d, 0.0).unwrap();
        assert!(cross < 0.0);
        let auto =
            detector_autocorr(NoiseModel::ImageBand, &l, &het(), &path, &d[0], 0.0).unwrap();
        let var_minus = 2.0 * auto - 2.0 * cross;
        let shot = shot_variance(&l, &d).unwrap();
        assert_relative_eq!(var_minus / shot, 2.0, max_relative = 1e-12);
        // J₁ + J₂ carries shot noise only.
        assert_relative_eq!((2.0 * auto + 2.0 * cross) / shot, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn floor_difference_examples() {
        assert_eq!(floor_difference_db(NoiseModel::Coherence, &OpticalPath::ideal()), 0.0);
        let lab = OpticalPath::new(0.70, [0.98, 0.99]).unwrap();
        assert_eq!(floor_difference_db(NoiseModel::Coherence, &lab), 0.0);
        assert_relative_eq!(
            floor_difference_db(NoiseModel::ImageBand, &OpticalPath::ideal()),
            10.0 * 2f64.log10(),
            epsilon = 1e-12
        );
        let lab_mean = OpticalPath::new(0.70, [0.985, 0.985]).unwrap();
        let d = floor_difference_db(NoiseModel::ImageBand, &lab_mean);
        assert!((d - 2.25).abs() < 0.01, "{d}");
        assert_eq!(floor_difference_db(NoiseModel::ImageBand, &lab), d);
    }

    #[test]
    fn floor_psd_ratio_matches_floor_difference() {
        let lab = OpticalPath::new(0.70, [0.98, 0.99]).unwrap();
        let d = pair(PulseShape::default());
        let l = lo(2e16);
        let ratio = floor_psd(NoiseModel::ImageBand, &l, &het(), &lab, &d, 1e6)
            / floor_psd(NoiseModel::ImageBand, &l, &BeatConfig::homodyne(0.0), &lab, &d, 1e6);
        assert_relative_eq!(
            10.0 * ratio.log10(),
            floor_difference_db(NoiseModel::ImageBand, &lab),
            epsilon = 1e-12
        );
    }

    fn trace(j1: Vec<f64>, j2: Vec<f64>) -> PhotocurrentTrace {
        PhotocurrentTrace::from_detectors(j1, j2, 1.0, 0, 0).unwrap()
    }

    #[test]
    fn decomposition_of_constant_traces() {
        let t = trace(vec![3.0; 64], vec![-1.25; 64]);
        let d = autocorr_decomposition(&t, 2.0).unwrap();
        assert_eq!((d.auto_11, d.auto_22, d.cross_12, d.cross_21), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn decomposition_with_dark_second_detector() {
        let j1: Vec<f64> = (0..500).map(|k| ((k * 37 % 101) as f64).sqrt()).collect();
        let t = trace(j1, vec![0.0; 500]);
        let d = autocorr_decomposition(&t, 3.0).unwrap();
        assert_eq!(d.auto_22, 0.0);
        assert_eq!(d.cross_12, 0.0);
        assert_eq!(d.cross_21, 0.0);
        assert_relative_eq!(d.sum(), d.auto_11, max_relative = 1e-15);
        assert_relative_eq!(d.direct, d.auto_11, max_relative = 1e-12);
    }

    #[test]
    fn decomposition_of_sine_and_cosine() {
        let n = 1000;
        let j1: Vec<f64> = (0..n).map(|k| (k as f64 * 0.05).sin()).collect();
        let j2: Vec<f64> = (0..n).map(|k| (k as f64 * 0.05).cos()).collect();
        // Oracle: sample variance of J₁ − J₂ computed directly (population form).
        let diff: Vec<f64> = j1.iter().zip(&j2).map(|(a, b)| a - b).collect();
        let mean = diff.iter().sum::<f64>() / n as f64;
        let var = diff.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        let d = autocorr_decomposition(&trace(j1, j2), 0.0).unwrap();
        assert_relative_eq!(d.sum(), var, max_relative = 1e-12);
    }

    #[test]
    fn decomposition_lag_out_of_range() {
        let t = trace(vec![1.0; 10], vec![0.0; 10]);
        assert!(matches!(autocorr_decomposition(&t, 10.0), Err(Error::Range(_))));
    }

    proptest! {
        #[test]
        fn heterodyne_equals_homodyne_under_coherence(rate in 1.0..1e17f64, omega in 1.0..1e9f64,
                                                      phi in 0.0..TAU, f in 0.0..5e7f64) {
            let d = pair(PulseShape::default());
            let path = OpticalPath::new(0.7, [0.98, 0.99]).unwrap();
            let a = floor_psd(NoiseModel::Coherence, &lo(rate), &BeatConfig::homodyne(phi), &path, &d, f);
            let b = floor_psd(NoiseModel::Coherence, &lo(rate), &BeatConfig::heterodyne(omega, phi), &path, &d, f);
            prop_assert_eq!(a.to_bits(), b.to_bits());
            let va = detector_autocorr(NoiseModel::Coherence, &lo(rate), &BeatConfig::homodyne(phi), &path, &d[0], 0.0).unwrap();
            let vb = detector_autocorr(NoiseModel::Coherence, &lo(rate), &BeatConfig::heterodyne(omega, phi), &path, &d[0], 0.0).unwrap();
            prop_assert_eq!(va.to_bits(), vb.to_bits());
        }

        #[test]
        fn lo_power_linearity(rate in 1.0..1e16f64, k in 0.01..100.0f64) {
            let d = pair(PulseShape::default());
            let a = shot_variance(&lo(rate), &d).unwrap();
            let b = shot_variance(&lo(k * rate), &d).unwrap();
            prop_assert!((b - k * a).abs() <= 1e-12 * b);
        }

        #[test]
        fn image_band_never_below_coherence(eta_c in 0.0..=1.0f64, v1 in 0.0..=1.0f64, v2 in 0.0..=1.0f64) {
            let path = OpticalPath::new(eta_c, [v1, v2]).unwrap();
            let d = floor_difference_db(NoiseModel::ImageBand, &path);
            let v = path.mean_visibility();
            prop_assert!(d >= 0.0);
            prop_assert_eq!(d == 0.0, eta_c * v * v == 0.0);
        }

        #[test]
        fn image_band_monotone(eta_c in 0.0..0.99f64, v in 0.0..0.99f64, step in 0.001..0.01f64) {
            let at = |e: f64, vis: f64| floor_difference_db(NoiseModel::ImageBand, &OpticalPath::new(e, [vis, vis]).unwrap());
            prop_assert!(at(eta_c + step, v) >= at(eta_c, v));
            prop_assert!(at(eta_c, v + step) >= at(eta_c, v));
        }

        #[test]
        fn decomposition_identity(seed in any::<u64>(), n in 32usize..400, lag in 0usize..16) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let j1: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1e-3)).collect();
            let j2: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1e-3)).collect();
            let d = autocorr_decomposition(&trace(j1, j2), lag as f64).unwrap();
            prop_assert!(d.relative_mismatch() <= 1e-12, "{}", d.relative_mismatch());
        }
    }
}
