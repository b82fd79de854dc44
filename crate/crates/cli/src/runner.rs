//! Executes a scenario: closed-form pipeline, Monte Carlo pipeline when
//! trials are requested, metric evaluation and artifact files.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use hetnoise_core::analytic::{electronics_psd, floor_psd};
use hetnoise_core::fringe::synthetic_fringe_scan;
use hetnoise_core::io::{write_fringe_scan, write_spectrum, write_trace};
use hetnoise_core::spectral::{band_flatness_db, WelchEstimator};
use hetnoise_core::{
    floor_difference_db, fringe_visibility, noise_floor, run_monte_carlo, shot_variance, subtract_electronics,
    BalancedSetup, ClampPolicy, MonteCarloRun, NoiseSpectrum, SimConfig,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{CliError, Result};
use crate::scenario::{Experiment, Scenario};

/// Samples of trial 0 written as the trace artifact.
pub const TRACE_EXCERPT: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct ExpectationOutcome {
    pub metric: String,
    pub target: f64,
    pub tolerance: f64,
    pub value: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub scenario: String,
    pub experiment: String,
    pub master_seed: u64,
    pub trials: usize,
    pub samples: usize,
    pub metrics: BTreeMap<String, f64>,
    pub expectations: Vec<ExpectationOutcome>,
    pub notes: Vec<String>,
    pub artifacts: Vec<PathBuf>,
}

impl RunReport {
    pub fn failed(&self) -> usize {
        self.expectations.iter().filter(|e| !e.pass).count()
    }

    pub fn all_passed(&self) -> bool {
        self.failed() == 0
    }
}

/// Offset between the master seed and the seed of the dark (electronics-only)
/// run, so the two runs draw independent electronics noise.
const DARK_SEED_OFFSET: u64 = 0x9e37_79b9_7f4a_7c15;

struct Arm {
    analytic: NoiseSpectrum,
    mc: Option<MonteCarloRun>,
    /// Simulated spectrum with the dark spectrum subtracted when there is electronics noise.
    floor: Option<NoiseSpectrum>,
    dark: Option<NoiseSpectrum>,
}

fn run_arm(s: &Scenario, setup: &BalancedSetup, label: &str) -> Result<Arm> {
    let cfg = s.sim_config();
    let spectrum_cfg = s.spectrum_config();
    let est = WelchEstimator::new(cfg.sample_rate, &spectrum_cfg).map_err(|e| CliError::core("spectrum analyzer", e))?;
    let analytic = NoiseSpectrum::from_fn(est.freqs(), est.rbw(), spectrum_cfg.reference, |f| {
        floor_psd(setup.model, &setup.lo, &setup.beat, &setup.path, &setup.detectors, f)
    });
    if !s.uses_monte_carlo() {
        return Ok(Arm {
            analytic,
            mc: None,
            floor: None,
            dark: None,
        });
    }
    log::info!("{}: {label} arm, {} trials", s.name, cfg.trials);
    let context = |what: &str| format!("{} ({label} {what})", s.name);
    let mc = run_monte_carlo(setup, &cfg, &spectrum_cfg, TRACE_EXCERPT).map_err(|e| CliError::core(context("arm"), e))?;
    let (floor, dark) = if electronics_psd(&setup.detectors) > 0.0 {
        let dark_setup = setup.dark().map_err(|e| CliError::core(context("dark run"), e))?;
        let dark_cfg = SimConfig {
            master_seed: cfg.master_seed.wrapping_add(DARK_SEED_OFFSET) & (i64::MAX as u64),
            ..cfg
        };
        let dark = run_monte_carlo(&dark_setup, &dark_cfg, &spectrum_cfg, 0)
            .map_err(|e| CliError::core(context("dark run"), e))?
            .spectrum;
        let floor = subtract_electronics(&mc.spectrum, &dark, ClampPolicy::Invalidate)
            .map_err(|e| CliError::core(context("electronics subtraction"), e))?;
        (floor, Some(dark))
    } else {
        (mc.spectrum.clone(), None)
    };
    Ok(Arm {
        analytic,
        mc: Some(mc),
        floor: Some(floor),
        dark,
    })
}

fn floor_db(spectrum: &NoiseSpectrum, exclusions: &[(f64, f64)], what: &str) -> Result<f64> {
    noise_floor(spectrum, exclusions).map_err(|e| CliError::core(what.to_string(), e))
}

fn flatness(spectrum: &NoiseSpectrum, exclusions: &[(f64, f64)]) -> Result<f64> {
    band_flatness_db(spectrum, exclusions).map_err(|e| CliError::core("flatness", e))
}

/// Collects artifact files under an optional output directory.
struct Artifacts<'a> {
    dir: Option<&'a Path>,
    scenario: &'a Scenario,
    written: Vec<PathBuf>,
}

impl Artifacts<'_> {
    fn echo(&self) -> Vec<(String, String)> {
        let s = self.scenario;
        vec![
            ("scenario".into(), s.name.clone()),
            ("master_seed".into(), s.sim.seed.to_string()),
            ("model".into(), s.model.kind.clone()),
        ]
    }

    fn write(
        &mut self,
        suffix: &str,
        f: impl FnOnce(&mut BufWriter<File>, &[(String, String)]) -> hetnoise_core::Result<()>,
    ) -> Result<()> {
        let Some(dir) = self.dir else { return Ok(()) };
        std::fs::create_dir_all(dir)?;
        let path = dir.join(format!("{}_{suffix}.tsv", self.scenario.name));
        let mut out = BufWriter::new(File::create(&path)?);
        f(&mut out, &self.echo()).map_err(|e| CliError::core(format!("writing {}", path.display()), e))?;
        self.written.push(path);
        Ok(())
    }

    fn arm(&mut self, arm: &Arm, label: &str) -> Result<()> {
        self.write(&format!("{label}analytic_spectrum"), |w, e| write_spectrum(w, &arm.analytic, e))?;
        if let Some(floor) = &arm.floor {
            self.write(&format!("{label}spectrum"), |w, e| write_spectrum(w, floor, e))?;
        }
        if let Some(dark) = &arm.dark {
            self.write(&format!("{label}dark_spectrum"), |w, e| write_spectrum(w, dark, e))?;
        }
        if let Some(mc) = &arm.mc {
            if let Some(trace) = &mc.excerpt {
                self.write(&format!("{label}trace"), |w, e| write_trace(w, trace, e))?;
            }
        }
        Ok(())
    }
}

/// Runs `s` and evaluates its expectations. Artifacts go to `out_dir` when given.
pub fn run_scenario(s: &Scenario, out_dir: Option<&Path>) -> Result<RunReport> {
    s.validate()?;
    let mut metrics = BTreeMap::new();
    let mut notes = Vec::new();
    let mut artifacts = Artifacts {
        dir: out_dir,
        scenario: s,
        written: Vec::new(),
    };

    match s.experiment {
        Experiment::Floors => {
            let setup = s.setup()?;
            let exclusions: Vec<_> = s.beat_exclusion(setup.beat.beat_hz()).into_iter().collect();
            let arm = run_arm(s, &setup, "base")?;
            let analytic = floor_db(&arm.analytic, &exclusions, "analytic floor")?;
            metrics.insert("floor_db_analytic".into(), analytic);
            match shot_variance(&setup.lo, &setup.detectors) {
                Ok(v) => {
                    metrics.insert("shot_variance_a2".into(), v);
                }
                Err(e) => notes.push(format!("shot variance unavailable: {e}")),
            }
            if let (Some(mc), Some(spectrum)) = (&arm.mc, &arm.floor) {
                let floor = floor_db(spectrum, &exclusions, "simulated floor")?;
                metrics.insert("floor_db_mc".into(), floor);
                metrics.insert("floor_error_db".into(), floor - analytic);
                metrics.insert("flatness_db_mc".into(), flatness(spectrum, &exclusions)?);
                metrics.insert("variance_a2_mc".into(), mc.variance_estimate().0);
            }
            artifacts.arm(&arm, "")?;
        }
        Experiment::Compare => {
            let base = s.setup()?;
            let variant = s.variant_setup()?.expect("validated compare scenario has a variant");
            let label = s.variant.as_ref().map_or("variant", |v| v.label.as_str());
            // Both floors are taken over the same bins.
            let exclusions: Vec<_> = [base.beat.beat_hz(), variant.beat.beat_hz()]
                .into_iter()
                .filter_map(|f| s.beat_exclusion(f))
                .collect();
            let a = run_arm(s, &base, "base")?;
            let b = run_arm(s, &variant, label)?;
            let fa = floor_db(&a.analytic, &exclusions, "analytic floor")?;
            let fb = floor_db(&b.analytic, &exclusions, "analytic floor")?;
            metrics.insert("floor_db_analytic".into(), fa);
            metrics.insert("floor_db_analytic_variant".into(), fb);
            metrics.insert("difference_db_analytic".into(), fb - fa);
            if let (Some(ma), Some(mb)) = (&a.floor, &b.floor) {
                let fa = floor_db(ma, &exclusions, "simulated floor")?;
                let fb = floor_db(mb, &exclusions, "simulated floor")?;
                metrics.insert("floor_db_mc".into(), fa);
                metrics.insert("floor_db_mc_variant".into(), fb);
                metrics.insert("difference_db_mc".into(), fb - fa);
                let flat = flatness(ma, &exclusions)?.max(flatness(mb, &exclusions)?);
                metrics.insert("flatness_db_mc".into(), flat);
            }
            artifacts.arm(&a, "")?;
            artifacts.arm(&b, &format!("{label}_"))?;
        }
        Experiment::Prediction => {
            let model = s.noise_model();
            let prediction = floor_difference_db(model, &s.path()?);
            metrics.insert("prediction_db".into(), prediction);
            if let Some(ob) = &s.observation {
                let falsified = (prediction - ob.difference_db).abs() > ob.tolerance_db;
                metrics.insert("observed_difference_db".into(), ob.difference_db);
                metrics.insert("falsified".into(), if falsified { 1.0 } else { 0.0 });
                notes.push(format!(
                    "{} model predicts a heterodyne-minus-homodyne floor difference of {prediction:.3} dB; \
                     observed {} +/- {} dB: {}",
                    model,
                    ob.difference_db,
                    ob.tolerance_db,
                    if falsified {
                        "falsified by the observed data"
                    } else {
                        "consistent with the observed data"
                    }
                ));
            }
        }
        Experiment::Fringe => {
            let o = &s.optics;
            let f = &s.fringe;
            let truth = [o.visibility_1, o.visibility_2];
            let mut rng = ChaCha8Rng::seed_from_u64(s.sim.seed);
            let scan = synthetic_fringe_scan(&truth, f.mean_intensity, f.periods, f.points, f.noise_fraction, &mut rng)
                .map_err(|e| CliError::core("fringe scan", e))?;
            let fitted = fringe_visibility(&scan).map_err(|e| CliError::core("fringe fit", e))?;
            metrics.insert("visibility_1".into(), fitted[0]);
            metrics.insert("visibility_2".into(), fitted[1]);
            let worst = fitted.iter().zip(truth).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            metrics.insert("visibility_error_max".into(), worst);
            artifacts.write("fringe", |w, e| write_fringe_scan(w, &scan, e))?;
        }
    }

    let expectations = s
        .expect
        .iter()
        .map(|e| {
            let value = metrics.get(&e.metric).copied().unwrap_or(f64::NAN);
            ExpectationOutcome {
                metric: e.metric.clone(),
                target: e.target,
                tolerance: e.tolerance,
                value,
                pass: e.holds(value),
            }
        })
        .collect();

    Ok(RunReport {
        scenario: s.name.clone(),
        experiment: s.experiment.name().into(),
        master_seed: s.sim.seed,
        trials: if s.uses_monte_carlo() { s.sim.trials } else { 0 },
        samples: s.sim.samples,
        metrics,
        expectations,
        notes,
        artifacts: artifacts.written,
    })
}
