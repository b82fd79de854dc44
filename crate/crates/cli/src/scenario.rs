//! Scenario files: sectioned TOML with units in the key names.
//!
//! Loading goes through an all-optional raw form so that missing required
//! keys can be listed together and every default is filled in. A loaded
//! [`Scenario`] serializes back to a file with all defaults spelled out.

use std::f64::consts::TAU;
use std::fmt;
use std::path::Path;

use hetnoise_core::spectral::WelchEstimator;
use hetnoise_core::{
    BalancedSetup, BeatConfig, DetectorModel, EventMode, FieldSpec, NoiseModel, OpticalPath, PulseKind, PulseShape,
    SimConfig, SpectrumConfig, ELECTRON_CHARGE,
};
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{CliError, Result};

pub const REQUIRED_FIELDS: [&str; 2] = ["name", "experiment"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    /// Noise floor of one configuration.
    Floors,
    /// Floor difference between the base configuration and `[variant]`.
    Compare,
    /// Closed-form heterodyne-minus-homodyne floor difference, optionally
    /// checked against an observed difference.
    Prediction,
    /// Visibility recovery from a synthetic fringe scan.
    Fringe,
}

impl Experiment {
    pub const ALL: [Experiment; 4] = [
        Experiment::Floors,
        Experiment::Compare,
        Experiment::Prediction,
        Experiment::Fringe,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Floors => "floors",
            Experiment::Compare => "compare",
            Experiment::Prediction => "prediction",
            Experiment::Fringe => "fringe",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.name() == s)
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Optics {
    pub wavelength_nm: f64,
    pub lo_power_mw: f64,
    pub signal_power_pw: f64,
    /// Net frequency offset of the signal relative to the oscillator; 0 is homodyne.
    pub net_offset_mhz: f64,
    pub relative_phase_rad: f64,
    pub collection_efficiency: f64,
    pub visibility_1: f64,
    pub visibility_2: f64,
    pub lo_linewidth_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Detector {
    pub efficiency: f64,
    pub pulse: String,
    pub pulse_width_ns: f64,
    pub pulse_area_c: f64,
    pub electronics_psd_a2_per_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Model {
    pub kind: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sim {
    pub sample_rate_mhz: f64,
    pub samples: usize,
    /// 0 skips the Monte Carlo pipeline.
    pub trials: usize,
    pub seed: u64,
    pub mode: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spectrum {
    pub rbw_khz: f64,
    pub span_lo_mhz: f64,
    pub span_hi_mhz: f64,
    pub averaging: usize,
    pub reference_a2: f64,
    /// Half-width of the band around the beat note left out of floor estimates.
    pub beat_exclusion_khz: f64,
}

/// Overrides applied to the base configuration for `compare` experiments.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Variant {
    pub label: String,
    pub lo_power_mw: f64,
    pub net_offset_mhz: f64,
    pub relative_phase_rad: f64,
    pub kind: String,
}

/// A measured floor difference that a prediction is held against.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Observation {
    pub difference_db: f64,
    pub tolerance_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fringe {
    pub points: usize,
    pub periods: f64,
    pub noise_fraction: f64,
    pub mean_intensity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Expectation {
    pub metric: String,
    pub target: f64,
    pub tolerance: f64,
}

impl Expectation {
    pub fn holds(&self, value: f64) -> bool {
        (value - self.target).abs() <= self.tolerance
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    pub name: String,
    pub experiment: Experiment,
    pub description: String,
    pub optics: Optics,
    pub detector: Detector,
    pub model: Model,
    pub sim: Sim,
    pub spectrum: Spectrum,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variant: Option<Variant>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub observation: Option<Observation>,
    pub fringe: Fringe,
    pub expect: Vec<Expectation>,
}

fn opt_f64<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<f64>, D::Error> {
    struct V;
    impl serde::de::Visitor<'_> for V {
        type Value = f64;
        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            f.write_str("a number")
        }
        fn visit_f64<E>(self, v: f64) -> std::result::Result<f64, E> {
            Ok(v)
        }
        fn visit_i64<E>(self, v: i64) -> std::result::Result<f64, E> {
            Ok(v as f64)
        }
        fn visit_u64<E>(self, v: u64) -> std::result::Result<f64, E> {
            Ok(v as f64)
        }
    }
    struct Wrapper(f64);
    impl<'de> Deserialize<'de> for Wrapper {
        fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
            d.deserialize_any(V).map(Wrapper)
        }
    }
    Ok(Option::<Wrapper>::deserialize(d)?.map(|w| w.0))
}

mod raw {
    use super::opt_f64;
    use serde::Deserialize;

    #[derive(Debug, Default, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct Scenario {
        pub name: Option<String>,
        pub experiment: Option<String>,
        pub description: Option<String>,
        #[serde(default)]
        pub optics: Optics,
        #[serde(default)]
        pub detector: Detector,
        #[serde(default)]
        pub model: Model,
        #[serde(default)]
        pub sim: Sim,
        #[serde(default)]
        pub spectrum: Spectrum,
        pub variant: Option<Variant>,
        pub observation: Option<Observation>,
        #[serde(default)]
        pub fringe: Fringe,
        #[serde(default)]
        pub expect: Vec<Expectation>,
    }

    #[derive(Debug, Default, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct Optics {
        #[serde(default, deserialize_with = "opt_f64")]
        pub wavelength_nm: Option<f64>,
        #[serde(default, deserialize_with = "opt_f64")]
        pub lo_power_mw: Option<f64>,
        #[serde(default, deserialize_with = "opt_f64")]
        pub signal_power_pw: Option<f64>,
        #[serde(default, deserialize_with = "opt_f64")]
        pub net_offset_mhz: Option<f64>,
        #[serde(default, deserialize_with = "opt_f64")]
        pub relative_phase_rad: Option<f64>,
        #[serde(default, deserialize_with = "opt_f64")]
        pub collection_efficiency: Option<f64>,
        #[serde(default, deserialize_with = "opt_f64")]
        pub visibility_1: Option<f64>,
        #[serde(default, deserialize_with = "opt_f64")]
        pub visibility_2: Option<f64>,
        #[serde(default, deserialize_with = "opt_f64")]
        pub lo_linewidth_hz: Option<f64>,
    }

    #[derive(Debug, Default, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct Detector {
        #[serde(default, deserialize_with = "opt_f64")]
        pub efficiency: Option<f64>,
        pub pulse: Option<String>,
        #[serde(default, deserialize_with = "opt_f64")]
        pub pulse_width_ns: Option<f64>,
        #[serde(default, deserialize_with = "opt_f64")]
        pub pulse_area_c: Option<f64>,
        #[serde(default, deserialize_with = "opt_f64")]
        pub electronics_psd_a2_per_hz: Option<f64>,
    }

    #[derive(Debug, Default, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct Model {
        pub kind: Option<String>,
    }

    #[derive(Debug, Default, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct Sim {
        #[serde(default, deserialize_with = "opt_f64")]
        pub sample_rate_mhz: Option<f64>,
        pub samples: Option<usize>,
        pub trials: Option<usize>,
        pub seed: Option<u64>,
        pub mode: Option<String>,
    }

    #[derive(Debug, Default, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct Spectrum {
        #[serde(default, deserialize_with = "opt_f64")]
        pub rbw_khz: Option<f64>,
        #[serde(default, deserialize_with = "opt_f64")]
        pub span_lo_mhz: Option<f64>,
        #[serde(default, deserialize_with = "opt_f64")]
        pub span_hi_mhz: Option<f64>,
        pub averaging: Option<usize>,
        #[serde(default, deserialize_with = "opt_f64")]
        pub reference_a2: Option<f64>,
        #[serde(default, deserialize_with = "opt_f64")]
        pub beat_exclusion_khz: Option<f64>,
    }

    #[derive(Debug, Default, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct Variant {
        pub label: Option<String>,
        #[serde(default, deserialize_with = "opt_f64")]
        pub lo_power_mw: Option<f64>,
        #[serde(default, deserialize_with = "opt_f64")]
        pub net_offset_mhz: Option<f64>,
        #[serde(default, deserialize_with = "opt_f64")]
        pub relative_phase_rad: Option<f64>,
        pub kind: Option<String>,
    }

    #[derive(Debug, Default, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct Observation {
        #[serde(default, deserialize_with = "opt_f64")]
        pub difference_db: Option<f64>,
        #[serde(default, deserialize_with = "opt_f64")]
        pub tolerance_db: Option<f64>,
    }

    #[derive(Debug, Default, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct Fringe {
        pub points: Option<usize>,
        #[serde(default, deserialize_with = "opt_f64")]
        pub periods: Option<f64>,
        #[serde(default, deserialize_with = "opt_f64")]
        pub noise_fraction: Option<f64>,
        #[serde(default, deserialize_with = "opt_f64")]
        pub mean_intensity: Option<f64>,
    }

    #[derive(Debug, Default, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct Expectation {
        pub metric: Option<String>,
        #[serde(default, deserialize_with = "opt_f64")]
        pub target: Option<f64>,
        #[serde(default, deserialize_with = "opt_f64")]
        pub tolerance: Option<f64>,
    }
}

/// Parses and validates scenario text. `path` is used in error messages.
pub fn parse_scenario(text: &str, path: &Path) -> Result<Scenario> {
    let raw: raw::Scenario = toml::from_str(text).map_err(|e| {
        let line = e
            .span()
            .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
            .unwrap_or(1);
        CliError::Parse {
            path: path.to_path_buf(),
            line,
            message: e.message().to_string(),
        }
    })?;
    Scenario::from_raw(raw)
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Input {
        path: path.to_path_buf(),
        source,
    })?;
    parse_scenario(&text, path)
}

struct Problems(Vec<String>);

impl Problems {
    fn require(&mut self, ok: bool, field: &str, message: impl fmt::Display) {
        if !ok {
            self.0.push(format!("{field}: {message}"));
        }
    }
}

impl Scenario {
    /// Scenario with every optional key at its default.
    pub fn with_defaults(name: &str, experiment: Experiment) -> Self {
        Self::from_raw(raw::Scenario {
            name: Some(name.into()),
            experiment: Some(experiment.name().into()),
            ..Default::default()
        })
        .expect("defaults are valid")
    }

    fn from_raw(r: raw::Scenario) -> Result<Self> {
        let missing: Vec<&str> = REQUIRED_FIELDS
            .iter()
            .zip([r.name.is_none(), r.experiment.is_none()])
            .filter(|(_, m)| *m)
            .map(|(f, _)| *f)
            .collect();
        let name = r.name.clone().unwrap_or_default();
        if !missing.is_empty() {
            return Err(CliError::Validation {
                name,
                problems: vec![format!("missing required fields: {}", missing.join(", "))],
            });
        }
        let experiment_text = r.experiment.unwrap_or_default();
        let experiment = Experiment::parse(&experiment_text).ok_or_else(|| CliError::Validation {
            name: name.clone(),
            problems: vec![format!(
                "experiment: unknown experiment '{experiment_text}', expected one of {}",
                Experiment::ALL.map(|e| e.name()).join(", ")
            )],
        })?;

        let o = r.optics;
        let optics = Optics {
            wavelength_nm: o.wavelength_nm.unwrap_or(1064.0),
            lo_power_mw: o.lo_power_mw.unwrap_or(4.0),
            signal_power_pw: o.signal_power_pw.unwrap_or(20.0),
            net_offset_mhz: o.net_offset_mhz.unwrap_or(0.0),
            relative_phase_rad: o.relative_phase_rad.unwrap_or(0.0),
            collection_efficiency: o.collection_efficiency.unwrap_or(1.0),
            visibility_1: o.visibility_1.unwrap_or(1.0),
            visibility_2: o.visibility_2.unwrap_or(1.0),
            lo_linewidth_hz: o.lo_linewidth_hz.unwrap_or(0.0),
        };
        let d = r.detector;
        let detector = Detector {
            efficiency: d.efficiency.unwrap_or(1.0),
            pulse: d.pulse.unwrap_or_else(|| "rectangular".into()),
            pulse_width_ns: d.pulse_width_ns.unwrap_or(10.0),
            pulse_area_c: d.pulse_area_c.unwrap_or(ELECTRON_CHARGE),
            electronics_psd_a2_per_hz: d.electronics_psd_a2_per_hz.unwrap_or(0.0),
        };
        let model = Model {
            kind: r.model.kind.unwrap_or_else(|| "coherence".into()),
        };
        let s = r.sim;
        let sim = Sim {
            sample_rate_mhz: s.sample_rate_mhz.unwrap_or(20.0),
            samples: s.samples.unwrap_or(1 << 20),
            trials: s.trials.unwrap_or(100),
            seed: s.seed.unwrap_or(1),
            mode: s.mode.unwrap_or_else(|| "auto".into()),
        };
        let sp = r.spectrum;
        let spectrum = Spectrum {
            rbw_khz: sp.rbw_khz.unwrap_or(0.3),
            span_lo_mhz: sp.span_lo_mhz.unwrap_or(0.5),
            span_hi_mhz: sp.span_hi_mhz.unwrap_or(5.0),
            averaging: sp.averaging.unwrap_or(0),
            reference_a2: sp.reference_a2.unwrap_or(1.0),
            beat_exclusion_khz: sp.beat_exclusion_khz.unwrap_or(50.0),
        };
        let variant = r.variant.map(|v| Variant {
            label: v.label.unwrap_or_else(|| "variant".into()),
            lo_power_mw: v.lo_power_mw.unwrap_or(optics.lo_power_mw),
            net_offset_mhz: v.net_offset_mhz.unwrap_or(optics.net_offset_mhz),
            relative_phase_rad: v.relative_phase_rad.unwrap_or(optics.relative_phase_rad),
            kind: v.kind.unwrap_or_else(|| model.kind.clone()),
        });
        let observation = r.observation.map(|ob| Observation {
            difference_db: ob.difference_db.unwrap_or(0.0),
            tolerance_db: ob.tolerance_db.unwrap_or(0.1),
        });
        let f = r.fringe;
        let fringe = Fringe {
            points: f.points.unwrap_or(1000),
            periods: f.periods.unwrap_or(3.0),
            noise_fraction: f.noise_fraction.unwrap_or(0.01),
            mean_intensity: f.mean_intensity.unwrap_or(1.0),
        };
        let mut expect = Vec::with_capacity(r.expect.len());
        let mut problems = Problems(Vec::new());
        for (i, e) in r.expect.into_iter().enumerate() {
            problems.require(e.metric.is_some(), &format!("expect[{i}].metric"), "is required");
            problems.require(e.target.is_some(), &format!("expect[{i}].target"), "is required");
            expect.push(Expectation {
                metric: e.metric.unwrap_or_default(),
                target: e.target.unwrap_or(f64::NAN),
                tolerance: e.tolerance.unwrap_or(0.0),
            });
        }

        let scenario = Scenario {
            name,
            experiment,
            description: r.description.unwrap_or_default(),
            optics,
            detector,
            model,
            sim,
            spectrum,
            variant,
            observation,
            fringe,
            expect,
        };
        scenario.check(problems)?;
        Ok(scenario)
    }

    /// Re-runs validation, e.g. after command-line overrides.
    pub fn validate(&self) -> Result<()> {
        self.check(Problems(Vec::new()))
    }

    fn check(&self, mut p: Problems) -> Result<()> {
        p.require(!self.name.trim().is_empty(), "name", "must not be empty");
        p.require(
            self.name.chars().all(|c| c.is_ascii_alphanumeric() || "_-.".contains(c)),
            "name",
            "may only contain ASCII letters, digits, '_', '-' and '.'",
        );

        let o = &self.optics;
        p.require(o.wavelength_nm > 0.0, "optics.wavelength_nm", "wavelength must be positive");
        p.require(o.lo_power_mw > 0.0, "optics.lo_power_mw", "oscillator power must be positive");
        p.require(o.signal_power_pw >= 0.0, "optics.signal_power_pw", "signal power must be non-negative");
        p.require(o.net_offset_mhz.is_finite(), "optics.net_offset_mhz", "offset must be finite");
        p.require(o.relative_phase_rad.is_finite(), "optics.relative_phase_rad", "phase must be finite");
        p.require(
            o.collection_efficiency > 0.0 && o.collection_efficiency <= 1.0,
            "optics.collection_efficiency",
            "must lie in (0, 1]",
        );
        for (field, v) in [("optics.visibility_1", o.visibility_1), ("optics.visibility_2", o.visibility_2)] {
            p.require((0.0..=1.0).contains(&v), field, "visibility must lie in [0, 1]");
        }
        p.require(o.lo_linewidth_hz >= 0.0, "optics.lo_linewidth_hz", "linewidth must be non-negative");

        let d = &self.detector;
        p.require(d.efficiency > 0.0 && d.efficiency <= 1.0, "detector.efficiency", "must lie in (0, 1]");
        let pulse = d.pulse.parse::<PulseKind>();
        p.require(pulse.is_ok(), "detector.pulse", format!("unknown pulse kind '{}'", d.pulse));
        if pulse.is_ok_and(|k| k != PulseKind::Delta) {
            p.require(d.pulse_width_ns > 0.0, "detector.pulse_width_ns", "pulse width must be positive");
        }
        p.require(d.pulse_area_c > 0.0, "detector.pulse_area_c", "pulse area must be positive");
        p.require(
            d.electronics_psd_a2_per_hz >= 0.0,
            "detector.electronics_psd_a2_per_hz",
            "electronics noise must be non-negative",
        );

        p.require(
            self.model.kind.parse::<NoiseModel>().is_ok(),
            "model.kind",
            format!("unknown noise model '{}'", self.model.kind),
        );

        let s = &self.sim;
        p.require(s.sample_rate_mhz > 0.0, "sim.sample_rate_mhz", "sample rate must be positive");
        p.require(s.samples >= 2, "sim.samples", "at least two samples are required");
        p.require(s.seed <= i64::MAX as u64, "sim.seed", "seed must fit in a signed 64-bit integer");
        p.require(
            s.mode.parse::<EventMode>().is_ok(),
            "sim.mode",
            format!("unknown event mode '{}'", s.mode),
        );

        let sp = &self.spectrum;
        p.require(sp.rbw_khz > 0.0, "spectrum.rbw_khz", "rbw must be positive");
        p.require(
            sp.beat_exclusion_khz >= 0.0,
            "spectrum.beat_exclusion_khz",
            "exclusion half-width must be non-negative",
        );
        if sp.rbw_khz > 0.0 {
            if let Err(e) = self.spectrum_config().validate() {
                p.require(false, "spectrum", e);
            } else if s.sample_rate_mhz > 0.0 && self.uses_monte_carlo() {
                match WelchEstimator::new(s.sample_rate_mhz * 1e6, &self.spectrum_config()) {
                    Ok(est) => p.require(
                        s.samples >= est.min_samples(),
                        "sim.samples",
                        format!(
                            "{} samples are fewer than the {} one averaged periodogram needs at this rbw",
                            s.samples,
                            est.min_samples()
                        ),
                    ),
                    Err(e) => p.require(false, "spectrum.span_hi_mhz", e),
                }
            }
        }

        if let Some(v) = &self.variant {
            p.require(v.lo_power_mw > 0.0, "variant.lo_power_mw", "oscillator power must be positive");
            p.require(v.net_offset_mhz.is_finite(), "variant.net_offset_mhz", "offset must be finite");
            p.require(
                v.kind.parse::<NoiseModel>().is_ok(),
                "variant.kind",
                format!("unknown noise model '{}'", v.kind),
            );
        }
        p.require(
            self.experiment != Experiment::Compare || self.variant.is_some(),
            "variant",
            "a compare experiment needs a [variant] section",
        );
        if let Some(ob) = &self.observation {
            p.require(ob.difference_db.is_finite(), "observation.difference_db", "must be finite");
            p.require(ob.tolerance_db >= 0.0, "observation.tolerance_db", "must be non-negative");
        }

        let f = &self.fringe;
        p.require(f.points >= 16, "fringe.points", "at least 16 points are required");
        p.require(f.periods >= 1.0, "fringe.periods", "at least one fringe period is required");
        p.require(f.noise_fraction >= 0.0, "fringe.noise_fraction", "must be non-negative");
        p.require(f.mean_intensity > 0.0, "fringe.mean_intensity", "must be positive");

        let metrics = self.metric_names();
        for (i, e) in self.expect.iter().enumerate() {
            if e.metric.is_empty() {
                continue;
            }
            p.require(
                metrics.contains(&e.metric.as_str()),
                &format!("expect[{i}].metric"),
                format!(
                    "'{}' is not produced by this {} experiment (available: {})",
                    e.metric,
                    self.experiment,
                    metrics.join(", ")
                ),
            );
            p.require(e.target.is_finite(), &format!("expect[{i}].target"), "must be finite");
            p.require(e.tolerance >= 0.0, &format!("expect[{i}].tolerance"), "must be non-negative");
        }

        if p.0.is_empty() {
            Ok(())
        } else {
            Err(CliError::Validation {
                name: self.name.clone(),
                problems: p.0,
            })
        }
    }

    pub fn uses_monte_carlo(&self) -> bool {
        self.sim.trials > 0 && matches!(self.experiment, Experiment::Floors | Experiment::Compare)
    }

    /// Metrics a run of this scenario reports.
    pub fn metric_names(&self) -> Vec<&'static str> {
        let mc = self.uses_monte_carlo();
        let mut m = Vec::new();
        match self.experiment {
            Experiment::Floors => {
                m.extend(["floor_db_analytic", "shot_variance_a2"]);
                if mc {
                    m.extend(["floor_db_mc", "floor_error_db", "flatness_db_mc", "variance_a2_mc"]);
                }
            }
            Experiment::Compare => {
                m.extend(["floor_db_analytic", "floor_db_analytic_variant", "difference_db_analytic"]);
                if mc {
                    m.extend(["floor_db_mc", "floor_db_mc_variant", "difference_db_mc", "flatness_db_mc"]);
                }
            }
            Experiment::Prediction => {
                m.push("prediction_db");
                if self.observation.is_some() {
                    m.extend(["observed_difference_db", "falsified"]);
                }
            }
            Experiment::Fringe => m.extend(["visibility_1", "visibility_2", "visibility_error_max"]),
        }
        m
    }

    pub fn noise_model(&self) -> NoiseModel {
        self.model.kind.parse().unwrap_or(NoiseModel::Coherence)
    }

    pub fn path(&self) -> Result<OpticalPath> {
        let o = &self.optics;
        OpticalPath::new(o.collection_efficiency, [o.visibility_1, o.visibility_2])
            .map_err(|e| CliError::core("optical path", e))
    }

    fn detectors(&self) -> Result<[DetectorModel; 2]> {
        let d = &self.detector;
        let kind: PulseKind = d.pulse.parse().map_err(|e| CliError::core("detector pulse", e))?;
        let pulse = PulseShape::new(kind, d.pulse_area_c, d.pulse_width_ns * 1e-9)
            .map_err(|e| CliError::core("detector pulse", e))?;
        let det = DetectorModel::new(d.efficiency, pulse, d.electronics_psd_a2_per_hz)
            .map_err(|e| CliError::core("detector", e))?;
        Ok([det; 2])
    }

    fn build_setup(&self, lo_power_mw: f64, offset_mhz: f64, phase: f64, model: NoiseModel) -> Result<BalancedSetup> {
        let wl = self.optics.wavelength_nm * 1e-9;
        let ctx = |e| CliError::core("optical fields", e);
        let lo = FieldSpec::from_power(lo_power_mw * 1e-3, wl, 0.0).map_err(ctx)?;
        let signal = FieldSpec::from_power(self.optics.signal_power_pw * 1e-12, wl, phase)
            .and_then(|s| s.shifted(TAU * offset_mhz * 1e6))
            .map_err(ctx)?;
        Ok(BalancedSetup {
            signal,
            lo,
            beat: BeatConfig::from_fields(&signal, &lo),
            path: self.path()?,
            detectors: self.detectors()?,
            model,
        })
    }

    /// Physical setup described by the base configuration.
    pub fn setup(&self) -> Result<BalancedSetup> {
        let o = &self.optics;
        self.build_setup(o.lo_power_mw, o.net_offset_mhz, o.relative_phase_rad, self.noise_model())
    }

    /// Setup with the `[variant]` overrides applied, if there is a variant.
    pub fn variant_setup(&self) -> Result<Option<BalancedSetup>> {
        self.variant
            .as_ref()
            .map(|v| {
                let model = v.kind.parse().map_err(|e| CliError::core("variant model", e))?;
                self.build_setup(v.lo_power_mw, v.net_offset_mhz, v.relative_phase_rad, model)
            })
            .transpose()
    }

    pub fn sim_config(&self) -> SimConfig {
        let s = &self.sim;
        SimConfig {
            event_mode: s.mode.parse().unwrap_or_default(),
            lo_linewidth: self.optics.lo_linewidth_hz,
            ..SimConfig::with_samples(s.sample_rate_mhz * 1e6, s.samples, s.seed, s.trials)
        }
    }

    pub fn spectrum_config(&self) -> SpectrumConfig {
        let sp = &self.spectrum;
        SpectrumConfig {
            averaging: sp.averaging,
            reference: sp.reference_a2,
            ..SpectrumConfig::new(sp.rbw_khz * 1e3, (sp.span_lo_mhz * 1e6, sp.span_hi_mhz * 1e6))
        }
    }

    /// Band around a beat note at `beat_hz` to leave out of floor estimates.
    pub fn beat_exclusion(&self, beat_hz: f64) -> Option<(f64, f64)> {
        let half = self.spectrum.beat_exclusion_khz * 1e3;
        (beat_hz > 0.0 && half > 0.0).then_some((beat_hz - half, beat_hz + half))
    }

    /// Serializes with every default spelled out.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario fields are always representable in TOML")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Scenario> {
        parse_scenario(text, Path::new("test.toml"))
    }

    #[test]
    fn integers_are_accepted_for_float_keys() {
        let s = parse("name = \"a\"\nexperiment = \"floors\"\n[optics]\nlo_power_mw = 8\n").unwrap();
        assert_eq!(s.optics.lo_power_mw, 8.0);
    }

    #[test]
    fn expectation_tolerance_is_inclusive() {
        let e = Expectation {
            metric: "x".into(),
            target: 3.0,
            tolerance: 0.5,
        };
        assert!(e.holds(3.5));
        assert!(!e.holds(3.5000001));
    }

    #[test]
    fn beat_exclusion_skips_homodyne() {
        let s = parse("name = \"a\"\nexperiment = \"floors\"\n").unwrap();
        assert_eq!(s.beat_exclusion(0.0), None);
        assert_eq!(s.beat_exclusion(3e6), Some((2.95e6, 3.05e6)));
    }
}
