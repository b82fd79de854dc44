//! Signal and local-oscillator fields at a 50/50 beamsplitter.
//!
//! Field amplitudes are carried in photon-flux units: `|E|^2` is a photon
//! rate in s^-1. Optical power only enters through [`photon_rate_from_power`].

use std::f64::consts::TAU;

use crate::error::{Error, Result};

/// Planck constant (J s), exact SI value.
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Speed of light in vacuum (m/s), exact SI value.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Below this LO/signal photon-rate ratio the strong-oscillator expansion is
/// questionable and a warning is logged.
pub const STRONG_LO_RATIO: f64 = 100.0;

/// A monochromatic coherent field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSpec {
    /// Optical angular frequency (rad/s).
    pub frequency: f64,
    /// Square root of the photon rate (s^-1/2).
    pub flux_amplitude: f64,
    /// Phase in radians, wrapped to `[0, 2π)`.
    pub phase: f64,
}

impl FieldSpec {
    pub fn new(frequency: f64, flux_amplitude: f64, phase: f64) -> Result<Self> {
        if !(frequency > 0.0) || !frequency.is_finite() {
            return Err(Error::domain(format!(
                "optical frequency must be positive, got {frequency}"
            )));
        }
        if !(flux_amplitude >= 0.0) || !flux_amplitude.is_finite() {
            return Err(Error::domain(format!(
                "flux amplitude must be non-negative, got {flux_amplitude}"
            )));
        }
        Ok(Self {
            frequency,
            flux_amplitude,
            phase: phase.rem_euclid(TAU),
        })
    }

    /// Field carrying `power` watts at vacuum `wavelength` metres.
    pub fn from_power(power: f64, wavelength: f64, phase: f64) -> Result<Self> {
        let rate = photon_rate_from_power(power, wavelength)?;
        Self::new(TAU * SPEED_OF_LIGHT / wavelength, rate.sqrt(), phase)
    }

    /// Photon rate `|E|^2` (s^-1).
    pub fn photon_rate(&self) -> f64 {
        self.flux_amplitude * self.flux_amplitude
    }

    /// Same field with the optical frequency shifted by `delta` rad/s.
    pub fn shifted(&self, delta: f64) -> Result<Self> {
        Self::new(self.frequency + delta, self.flux_amplitude, self.phase)
    }
}

/// Beat between signal and oscillator. `het_frequency == 0` is homodyne.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeatConfig {
    /// Ω = ω_s − ω_l (rad/s).
    pub het_frequency: f64,
    /// Relative phase φ (rad).
    pub relative_phase: f64,
}

impl BeatConfig {
    pub fn homodyne(relative_phase: f64) -> Self {
        Self {
            het_frequency: 0.0,
            relative_phase,
        }
    }

    pub fn heterodyne(het_frequency: f64, relative_phase: f64) -> Self {
        Self {
            het_frequency,
            relative_phase,
        }
    }

    /// Beat implied by two fields: frequency difference and phase difference.
    pub fn from_fields(signal: &FieldSpec, lo: &FieldSpec) -> Self {
        Self {
            het_frequency: signal.frequency - lo.frequency,
            relative_phase: (signal.phase - lo.phase).rem_euclid(TAU),
        }
    }

    pub fn is_homodyne(&self) -> bool {
        self.het_frequency == 0.0
    }

    /// Beat frequency in Hz (non-negative).
    pub fn beat_hz(&self) -> f64 {
        self.het_frequency.abs() / TAU
    }
}

/// Optical losses and mode matching between the splitter and the detectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpticalPath {
    /// Overall photon collection efficiency, including detector quantum efficiency.
    pub collection_efficiency: f64,
    /// Fringe visibility seen by detector 1 and detector 2.
    pub visibility: [f64; 2],
}

impl OpticalPath {
    pub fn new(collection_efficiency: f64, visibility: [f64; 2]) -> Result<Self> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::domain(format!("{name} must lie in [0, 1], got {v}")))
            }
        };
        unit("collection efficiency", collection_efficiency)?;
        unit("visibility of detector 1", visibility[0])?;
        unit("visibility of detector 2", visibility[1])?;
        Ok(Self {
            collection_efficiency,
            visibility,
        })
    }

    pub fn ideal() -> Self {
        Self {
            collection_efficiency: 1.0,
            visibility: [1.0, 1.0],
        }
    }

    pub fn mean_visibility(&self) -> f64 {
        0.5 * (self.visibility[0] + self.visibility[1])
    }
}

/// Heterodyne beat note carried by the cross terms: `e1 cos(Ωt) + e2 sin(Ωt)`.
pub fn beat_signal(e1: f64, e2: f64, omega: f64, t: f64) -> f64 {
    let (s, c) = (omega * t).sin_cos();
    e1 * c + e2 * s
}

/// Photon rates at the two splitter outputs under the strong-oscillator
/// approximation:
///
/// `I_{1,2}(t) = ½ [E_s² + E_l² ± 2 V_{1,2} E_l E_s sin(Ωt + φ)]`
pub fn output_intensities(
    signal: &FieldSpec,
    lo: &FieldSpec,
    beat: &BeatConfig,
    path: &OpticalPath,
    t: f64,
) -> Result<(f64, f64)> {
    if signal.flux_amplitude < 0.0 || lo.flux_amplitude < 0.0 {
        return Err(Error::domain("field amplitudes must be non-negative"));
    }
    warn_if_weak_lo(signal, lo);
    let (es, el) = (signal.flux_amplitude, lo.flux_amplitude);
    let dc = es * es + el * el;
    let fringe = el * es * (beat.het_frequency * t + beat.relative_phase).sin();
    let i1 = 0.5 * (dc + 2.0 * path.visibility[0] * fringe);
    let i2 = 0.5 * (dc - 2.0 * path.visibility[1] * fringe);
    Ok((i1, i2))
}

pub(crate) fn warn_if_weak_lo(signal: &FieldSpec, lo: &FieldSpec) {
    let s = signal.photon_rate();
    if s > 0.0 && lo.photon_rate() / s < STRONG_LO_RATIO {
        log::warn!(
            "LO/signal photon-rate ratio {:.3e} is below {STRONG_LO_RATIO}; strong-LO approximation is poor",
            lo.photon_rate() / s
        );
    }
}

/// Photon rate (s^-1) of a beam of `power` watts at vacuum `wavelength` metres.
pub fn photon_rate_from_power(power: f64, wavelength: f64) -> Result<f64> {
    if !(wavelength > 0.0) {
        return Err(Error::domain(format!(
            "wavelength must be positive, got {wavelength}"
        )));
    }
    if !(power >= 0.0) {
        return Err(Error::domain(format!(
            "optical power must be non-negative, got {power}"
        )));
    }
    Ok(power * wavelength / (PLANCK * SPEED_OF_LIGHT))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};

    const OMEGA_1064: f64 = TAU * SPEED_OF_LIGHT / 1064e-9;

    fn field(amp: f64) -> FieldSpec {
        FieldSpec::new(OMEGA_1064, amp, 0.0).unwrap()
    }

    #[test]
    fn beat_signal_examples() {
        assert_eq!(beat_signal(1.0, 0.0, 0.0, 17.3), 1.0);
        assert_eq!(beat_signal(0.0, 0.0, 5.0, 0.3), 0.0);
        assert_relative_eq!(beat_signal(1.0, 1.0, TAU, 0.125), SQRT_2, epsilon = 1e-15);
    }

    #[test]
    fn vacuum_signal_splits_lo_equally() {
        let beat = BeatConfig::heterodyne(TAU * 3e6, 0.4);
        let (i1, i2) =
            output_intensities(&field(0.0), &field(1e3), &beat, &OpticalPath::ideal(), 1.7e-7)
                .unwrap();
        assert_eq!((i1, i2), (5e5, 5e5));
    }

    #[test]
    fn full_fringe_at_quadrature_phase() {
        let beat = BeatConfig::homodyne(FRAC_PI_2);
        let (i1, i2) =
            output_intensities(&field(1.0), &field(1.0), &beat, &OpticalPath::ideal(), 3.0)
                .unwrap();
        assert_relative_eq!(i1, 2.0, epsilon = 1e-15);
        assert_relative_eq!(i2, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn heterodyne_quarter_cycle() {
        let omega = TAU * 1e6;
        let beat = BeatConfig::heterodyne(omega, 0.0);
        let t = FRAC_PI_2 / omega;
        let (i1, i2) =
            output_intensities(&field(1.0), &field(1e3), &beat, &OpticalPath::ideal(), t)
                .unwrap();
        assert_relative_eq!(i1, 0.5 * (1.0 + 1e6) + 1e3, max_relative = 1e-14);
        assert_relative_eq!(i2, 0.5 * (1.0 + 1e6) - 1e3, max_relative = 1e-14);
    }

    #[test]
    fn photon_rates_for_lab_powers() {
        assert_eq!(photon_rate_from_power(0.0, 1064e-9).unwrap(), 0.0);
        let four = photon_rate_from_power(4e-3, 1064e-9).unwrap();
        assert_relative_eq!(four, 2.142e16, max_relative = 5e-4);
        let eight = photon_rate_from_power(8e-3, 1064e-9).unwrap();
        assert_eq!(eight, 2.0 * four);
        assert!(matches!(
            photon_rate_from_power(1e-3, 0.0),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            photon_rate_from_power(1e-3, -1.0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn field_invariants_rejected() {
        assert!(FieldSpec::new(OMEGA_1064, -1.0, 0.0).is_err());
        assert!(FieldSpec::new(0.0, 1.0, 0.0).is_err());
        assert!(OpticalPath::new(1.2, [1.0, 1.0]).is_err());
        assert!(OpticalPath::new(0.7, [0.98, -0.1]).is_err());
        let f = FieldSpec::new(OMEGA_1064, 1.0, -PI).unwrap();
        assert_relative_eq!(f.phase, PI);
    }

    #[test]
    fn beat_from_fields() {
        let lo = FieldSpec::new(OMEGA_1064, 1e3, 0.25).unwrap();
        let sig = lo.shifted(TAU * 3e6).unwrap();
        let beat = BeatConfig::from_fields(&sig, &lo);
        assert!(!beat.is_homodyne());
        assert_relative_eq!(beat.beat_hz(), 3e6, max_relative = 1e-6);
        assert!(BeatConfig::from_fields(&lo, &lo).is_homodyne());
    }

    proptest! {
        #[test]
        fn energy_conservation(es in 0.0..50.0f64, el in 0.0..1e4f64,
                               omega in -1e8..1e8f64, phi in 0.0..TAU, t in 0.0..1e-3f64) {
            let beat = BeatConfig::heterodyne(omega, phi);
            let (i1, i2) = output_intensities(&field(es), &field(el), &beat, &OpticalPath::ideal(), t).unwrap();
            let total = es * es + el * el;
            prop_assert!((i1 + i2 - total).abs() <= 4.0 * f64::EPSILON * total);
        }

        #[test]
        fn port_difference_is_interference_only(es in 0.0..50.0f64, el in 0.0..1e4f64,
                                                v in 0.0..=1.0f64, phi in 0.0..TAU, t in 0.0..1e-3f64) {
            let beat = BeatConfig::heterodyne(TAU * 3e6, phi);
            let path = OpticalPath::new(1.0, [v, v]).unwrap();
            let (i1, i2) = output_intensities(&field(es), &field(el), &beat, &path, t).unwrap();
            let fringe = 2.0 * v * el * es * (beat.het_frequency * t + phi).sin();
            let scale = es * es + el * el;
            prop_assert!((i1 - i2 - fringe).abs() <= 8.0 * f64::EPSILON * scale);
        }

        #[test]
        fn homodyne_matches_frozen_heterodyne_phase(es in 0.0..50.0f64, el in 0.0..1e4f64,
                                                    phi in 0.0..TAU, t in 0.0..1.0f64) {
            let hom = output_intensities(&field(es), &field(el), &BeatConfig::homodyne(phi), &OpticalPath::ideal(), t).unwrap();
            let het = output_intensities(&field(es), &field(el), &BeatConfig::heterodyne(2.0e7, phi), &OpticalPath::ideal(), 0.0).unwrap();
            prop_assert_eq!(hom, het);
        }

        #[test]
        fn amplitude_scaling_is_quadratic(es in 0.0..50.0f64, el in 1.0..1e4f64,
                                          k in 0.1..10.0f64, phi in 0.0..TAU) {
            let beat = BeatConfig::homodyne(phi);
            let (a1, a2) = output_intensities(&field(es), &field(el), &beat, &OpticalPath::ideal(), 0.0).unwrap();
            let (b1, b2) = output_intensities(&field(k * es), &field(k * el), &beat, &OpticalPath::ideal(), 0.0).unwrap();
            let scale = k * k * (es * es + el * el);
            prop_assert!((b1 - k * k * a1).abs() <= 1e-12 * scale);
            prop_assert!((b2 - k * k * a2).abs() <= 1e-12 * scale);
        }
    }
}
