//! Photodetector response: quantum efficiency, single-photoelectron current
//! pulse, and additive electronics noise.

use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};

/// Elementary charge (C), exact SI value.
pub const ELECTRON_CHARGE: f64 = 1.602_176_634e-19;

/// Exponential pulses are truncated after this many time constants.
const EXP_TRUNCATION: f64 = 40.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PulseKind {
    Delta,
    Rectangular,
    /// `j(t) = (q/τ) exp(-t/τ)` for `t >= 0`, with `τ` the pulse width.
    Exponential,
}

impl PulseKind {
    pub fn name(&self) -> &'static str {
        match self {
            PulseKind::Delta => "delta",
            PulseKind::Rectangular => "rectangular",
            PulseKind::Exponential => "exponential",
        }
    }
}

impl std::str::FromStr for PulseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "delta" => Ok(PulseKind::Delta),
            "rectangular" | "rect" => Ok(PulseKind::Rectangular),
            "exponential" | "one-sided-exponential" | "exp" => Ok(PulseKind::Exponential),
            other => Err(Error::domain(format!("unknown pulse kind '{other}'"))),
        }
    }
}

/// Causal current pulse `j(t)` produced by one photoelectron.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseShape {
    pub kind: PulseKind,
    /// Charge per photoevent, `∫ j dt` (C).
    pub area: f64,
    /// Duration (rectangular) or time constant (exponential), s. Ignored for delta.
    pub width: f64,
}

impl Default for PulseShape {
    fn default() -> Self {
        Self {
            kind: PulseKind::Rectangular,
            area: ELECTRON_CHARGE,
            width: 10e-9,
        }
    }
}

impl PulseShape {
    pub fn new(kind: PulseKind, area: f64, width: f64) -> Result<Self> {
        if !(area > 0.0) || !area.is_finite() {
            return Err(Error::domain(format!("pulse area must be positive, got {area}")));
        }
        if kind != PulseKind::Delta && !(width > 0.0 && width.is_finite()) {
            return Err(Error::domain(format!(
                "{} pulse width must be positive, got {width}",
                kind.name()
            )));
        }
        Ok(Self { kind, area, width })
    }

    pub fn delta(area: f64) -> Result<Self> {
        Self::new(PulseKind::Delta, area, 0.0)
    }

    pub fn rectangular(area: f64, width: f64) -> Result<Self> {
        Self::new(PulseKind::Rectangular, area, width)
    }

    pub fn exponential(area: f64, time_constant: f64) -> Result<Self> {
        Self::new(PulseKind::Exponential, area, time_constant)
    }

    /// Current `j(t)` in amperes. Delta pulses have no point value.
    pub fn current(&self, t: f64) -> Result<f64> {
        if t < 0.0 {
            return Ok(0.0);
        }
        match self.kind {
            PulseKind::Delta => Err(Error::UsePsdForm),
            PulseKind::Rectangular => Ok(if t < self.width {
                self.area / self.width
            } else {
                0.0
            }),
            PulseKind::Exponential => Ok(self.area / self.width * (-t / self.width).exp()),
        }
    }

    /// Time after the photoevent beyond which `j` is treated as zero.
    pub fn support(&self) -> f64 {
        match self.kind {
            PulseKind::Delta => 0.0,
            PulseKind::Rectangular => self.width,
            PulseKind::Exponential => EXP_TRUNCATION * self.width,
        }
    }

    /// `∫ j(t)^2 dt` (A² s).
    pub fn energy(&self) -> Result<f64> {
        self.autocorrelation(0.0)
    }

    /// `∫ j(t) j(t+τ) dt`.
    pub fn autocorrelation(&self, tau: f64) -> Result<f64> {
        let (q, w, tau) = (self.area, self.width, tau.abs());
        match self.kind {
            PulseKind::Delta => Err(Error::UsePsdForm),
            PulseKind::Rectangular => Ok((q / w).powi(2) * (w - tau).max(0.0)),
            PulseKind::Exponential => Ok(q * q / (2.0 * w) * (-tau / w).exp()),
        }
    }

    /// `∫ j_a(t) j_b(t+τ) dt` for two possibly different pulses.
    pub fn cross_correlation(&self, other: &PulseShape, tau: f64) -> Result<f64> {
        if self == other {
            return self.autocorrelation(tau);
        }
        if self.kind == PulseKind::Delta || other.kind == PulseKind::Delta {
            return Err(Error::UsePsdForm);
        }
        // Composite Simpson over the support of `self`.
        let upper = self.support().max(other.support() - tau).max(0.0);
        let lower = (-tau).max(0.0);
        if upper <= lower {
            return Ok(0.0);
        }
        let n = 20_000usize;
        let h = (upper - lower) / n as f64;
        let f = |t: f64| -> Result<f64> { Ok(self.current(t)? * other.current(t + tau)?) };
        let mut acc = f(lower)? + f(upper)?;
        for i in 1..n {
            let weight = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += weight * f(lower + i as f64 * h)?;
        }
        Ok(acc * h / 3.0)
    }

    /// `|ĵ(f)|²`, the squared magnitude of the pulse Fourier transform.
    pub fn spectrum_sq(&self, f: f64) -> f64 {
        let q2 = self.area * self.area;
        match self.kind {
            PulseKind::Delta => q2,
            PulseKind::Rectangular => {
                let x = PI * f * self.width;
                let sinc = if x == 0.0 { 1.0 } else { x.sin() / x };
                q2 * sinc * sinc
            }
            PulseKind::Exponential => {
                let x = TAU * f * self.width;
                q2 / (1.0 + x * x)
            }
        }
    }

    /// Charge delivered into each sampling interval of length `dt` by one
    /// photoevent at the start of interval 0, divided by `dt`: the
    /// interval-averaged current kernel.
    pub fn bin_kernel(&self, dt: f64) -> Vec<f64> {
        let charge_before = |t: f64| -> f64 {
            if t <= 0.0 {
                return 0.0;
            }
            match self.kind {
                PulseKind::Delta => self.area,
                PulseKind::Rectangular => self.area * (t / self.width).min(1.0),
                PulseKind::Exponential => self.area * -(-t / self.width).exp_m1(),
            }
        };
        let len = ((self.support() / dt).ceil() as usize).max(1);
        let mut kernel: Vec<f64> = (0..len)
            .map(|m| (charge_before((m + 1) as f64 * dt) - charge_before(m as f64 * dt)) / dt)
            .collect();
        if self.kind == PulseKind::Exponential {
            // Fold the truncated tail into the last interval so charge is conserved.
            let tail = self.area / dt - kernel.iter().sum::<f64>();
            if let Some(last) = kernel.last_mut() {
                *last += tail;
            }
        }
        kernel
    }
}

/// One photodetector channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorModel {
    /// Quantum efficiency η.
    pub efficiency: f64,
    pub pulse: PulseShape,
    /// One-sided white current-noise PSD of the electronics (A²/Hz).
    pub electronics_psd: f64,
}

impl Default for DetectorModel {
    fn default() -> Self {
        Self {
            efficiency: 1.0,
            pulse: PulseShape::default(),
            electronics_psd: 0.0,
        }
    }
}

impl DetectorModel {
    pub fn new(efficiency: f64, pulse: PulseShape, electronics_psd: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&efficiency) {
            return Err(Error::domain(format!(
                "quantum efficiency must lie in [0, 1], got {efficiency}"
            )));
        }
        if !(electronics_psd >= 0.0) {
            return Err(Error::domain(format!(
                "electronics PSD must be non-negative, got {electronics_psd}"
            )));
        }
        Ok(Self {
            efficiency,
            pulse,
            electronics_psd,
        })
    }
}
