//! Command-line surface.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use hetnoise_core::io::{read_fringe_scan, read_trace, write_spectrum, write_trace};
use hetnoise_core::sim::mean_and_variance;
use hetnoise_core::spectral::band_flatness_db;
use hetnoise_core::{
    estimate_psd, floor_difference_db, floor_psd, fringe_visibility, noise_floor, shot_variance,
    simulate_balanced_trial,
};

use crate::bundled;
use crate::error::{exit, CliError, Result};
use crate::report::{emit_report, Format};
use crate::runner::{run_scenario, RunReport};
use crate::scenario::{Experiment, Scenario};

#[derive(Debug, Parser)]
#[command(name = "hetnoise", version, about = "Quantum-noise floors of balanced homodyne and heterodyne detection")]
pub struct Cli {
    /// Master seed; overrides the scenario's.
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(0..=i64::MAX as u64))]
    pub seed: Option<u64>,
    /// Monte Carlo trials; overrides the scenario's (0 runs closed forms only).
    #[arg(long, global = true)]
    pub trials: Option<usize>,
    /// Directory for output files.
    #[arg(long, global = true, env = "HETNOISE_OUT_DIR", default_value = "hetnoise-out")]
    pub out_dir: PathBuf,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form noise metrics for one configuration.
    Analytic {
        #[command(flatten)]
        optics: OpticsArgs,
        #[command(flatten)]
        spectrum: SpectrumArgs,
        #[arg(long, default_value_t = 20.0)]
        sample_rate_mhz: f64,
    },
    /// Simulate one trial of balanced photocurrents and write the trace.
    Simulate {
        #[command(flatten)]
        optics: OpticsArgs,
        #[arg(long, default_value_t = 20.0)]
        sample_rate_mhz: f64,
        #[arg(long, default_value_t = 1 << 16)]
        samples: usize,
        /// auto, thinning or binned.
        #[arg(long, default_value = "auto")]
        mode: String,
        #[arg(long, default_value_t = 0)]
        trial: u64,
    },
    /// Averaged power spectrum of a trace file.
    Spectrum {
        trace: PathBuf,
        #[command(flatten)]
        spectrum: SpectrumArgs,
        /// Trace column to analyze.
        #[arg(long, default_value = "jminus_a")]
        column: String,
        /// Beat note to leave out of the floor estimate.
        #[arg(long)]
        beat_mhz: Option<f64>,
        #[arg(long, default_value_t = 50.0)]
        beat_exclusion_khz: f64,
    },
    /// Fringe visibility of each detector column in a scan file.
    Fringe { scan: PathBuf },
    #[command(subcommand)]
    Scenario(ScenarioCommand),
}

#[derive(Debug, Subcommand)]
pub enum ScenarioCommand {
    /// Run a scenario file or a bundled scenario by name.
    Run { scenario: String },
    /// List bundled scenarios.
    List,
    /// Print a scenario with all defaults filled in.
    Show { scenario: String },
}

#[derive(Debug, Args)]
pub struct OpticsArgs {
    #[arg(long, default_value_t = 1064.0)]
    pub wavelength_nm: f64,
    #[arg(long, default_value_t = 4.0)]
    pub lo_power_mw: f64,
    #[arg(long, default_value_t = 20.0)]
    pub signal_power_pw: f64,
    /// Signal frequency offset from the oscillator; 0 is homodyne.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub offset_mhz: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub phase_rad: f64,
    #[arg(long, default_value_t = 1.0)]
    pub collection_efficiency: f64,
    /// Fringe visibility for both detectors.
    #[arg(long, default_value_t = 1.0)]
    pub visibility: f64,
    /// coherence, imageband or classical-noiseless.
    #[arg(long, default_value = "coherence")]
    pub model: String,
    #[arg(long, default_value_t = 1.0)]
    pub efficiency: f64,
    /// delta, rectangular or exponential.
    #[arg(long, default_value = "rectangular")]
    pub pulse: String,
    #[arg(long, default_value_t = 10.0)]
    pub pulse_width_ns: f64,
    #[arg(long, default_value_t = 0.0)]
    pub electronics_psd_a2_per_hz: f64,
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    #[arg(long, default_value_t = 0.3)]
    pub rbw_khz: f64,
    #[arg(long, default_value_t = 0.5)]
    pub span_lo_mhz: f64,
    #[arg(long, default_value_t = 5.0)]
    pub span_hi_mhz: f64,
    #[arg(long, default_value_t = 1.0)]
    pub reference_a2: f64,
}

impl OpticsArgs {
    fn apply(&self, s: &mut Scenario) {
        let o = &mut s.optics;
        o.wavelength_nm = self.wavelength_nm;
        o.lo_power_mw = self.lo_power_mw;
        o.signal_power_pw = self.signal_power_pw;
        o.net_offset_mhz = self.offset_mhz;
        o.relative_phase_rad = self.phase_rad;
        o.collection_efficiency = self.collection_efficiency;
        o.visibility_1 = self.visibility;
        o.visibility_2 = self.visibility;
        s.model.kind = self.model.clone();
        s.detector.efficiency = self.efficiency;
        s.detector.pulse = self.pulse.clone();
        s.detector.pulse_width_ns = self.pulse_width_ns;
        s.detector.electronics_psd_a2_per_hz = self.electronics_psd_a2_per_hz;
    }
}

impl SpectrumArgs {
    fn apply(&self, s: &mut Scenario) {
        s.spectrum.rbw_khz = self.rbw_khz;
        s.spectrum.span_lo_mhz = self.span_lo_mhz;
        s.spectrum.span_hi_mhz = self.span_hi_mhz;
        s.spectrum.reference_a2 = self.reference_a2;
    }
}

fn metrics_report(name: &str, kind: &str, seed: u64, metrics: BTreeMap<String, f64>) -> RunReport {
    RunReport {
        scenario: name.into(),
        experiment: kind.into(),
        master_seed: seed,
        trials: 0,
        samples: 0,
        metrics,
        expectations: Vec::new(),
        notes: Vec::new(),
        artifacts: Vec::new(),
    }
}

fn output_file(dir: &Path, name: &str) -> Result<(PathBuf, BufWriter<File>)> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let file = File::create(&path)?;
    Ok((path, BufWriter::new(file)))
}

fn require_input(path: &Path) -> Result<()> {
    std::fs::metadata(path).map(|_| ()).map_err(|source| CliError::Input {
        path: path.to_path_buf(),
        source,
    })
}

fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| "trace".into(), |s| s.to_string_lossy().into_owned())
}

/// Runs a parsed command line and returns the exit status.
pub fn execute(cli: &Cli) -> Result<u8> {
    let seed = cli.seed.unwrap_or(1);
    let report = match &cli.command {
        Command::Analytic {
            optics,
            spectrum,
            sample_rate_mhz,
        } => {
            let mut s = Scenario::with_defaults("analytic", Experiment::Floors);
            optics.apply(&mut s);
            spectrum.apply(&mut s);
            s.sim.sample_rate_mhz = *sample_rate_mhz;
            s.sim.trials = 0;
            s.validate()?;
            let setup = s.setup()?;
            let mut report = run_scenario(&s, None)?;
            let f_mid = 0.5 * (spectrum.span_lo_mhz + spectrum.span_hi_mhz) * 1e6;
            let m = &mut report.metrics;
            m.insert("lo_photon_rate_hz".into(), setup.lo.photon_rate());
            m.insert("beat_hz".into(), setup.beat.beat_hz());
            m.insert(
                "floor_psd_a2_per_hz".into(),
                floor_psd(setup.model, &setup.lo, &setup.beat, &setup.path, &setup.detectors, f_mid),
            );
            m.insert("het_minus_hom_db".into(), floor_difference_db(setup.model, &setup.path));
            if shot_variance(&setup.lo, &setup.detectors).is_err() {
                report.notes = vec!["delta pulses have no finite variance; see floor_psd_a2_per_hz".into()];
            }
            report.master_seed = seed;
            report.experiment = "analytic".into();
            report
        }
        Command::Simulate {
            optics,
            sample_rate_mhz,
            samples,
            mode,
            trial,
        } => {
            let mut s = Scenario::with_defaults("simulate", Experiment::Floors);
            optics.apply(&mut s);
            s.sim.sample_rate_mhz = *sample_rate_mhz;
            s.sim.samples = *samples;
            s.sim.mode = mode.clone();
            s.sim.seed = seed;
            s.sim.trials = 0;
            s.validate()?;
            let setup = s.setup()?;
            let cfg = hetnoise_core::SimConfig {
                trials: 1,
                ..s.sim_config()
            };
            let trace = simulate_balanced_trial(&setup, &cfg, *trial).map_err(|e| CliError::core("simulate", e))?;
            let (path, mut out) = output_file(&cli.out_dir, "trace.tsv")?;
            let echo = [
                ("lo_power_mw".to_string(), optics.lo_power_mw.to_string()),
                ("offset_mhz".to_string(), optics.offset_mhz.to_string()),
                ("model".to_string(), optics.model.clone()),
            ];
            write_trace(&mut out, &trace, &echo).map_err(|e| CliError::core("writing trace", e))?;
            let mut m = BTreeMap::new();
            m.insert("mean_j1_a".into(), mean_and_variance(&trace.j1).0);
            m.insert("mean_j2_a".into(), mean_and_variance(&trace.j2).0);
            m.insert("variance_jminus_a2".into(), mean_and_variance(&trace.j_minus).1);
            let mut r = metrics_report("simulate", "simulate", seed, m);
            r.samples = trace.len();
            r.artifacts.push(path);
            r
        }
        Command::Spectrum {
            trace,
            spectrum,
            column,
            beat_mhz,
            beat_exclusion_khz,
        } => {
            let mut s = Scenario::with_defaults("spectrum", Experiment::Floors);
            spectrum.apply(&mut s);
            s.sim.trials = 0;
            s.validate()?;
            require_input(trace)?;
            let tr = read_trace(trace).map_err(|e| CliError::core(format!("reading {}", trace.display()), e))?;
            let samples = match column.as_str() {
                "j1_a" => &tr.j1,
                "j2_a" => &tr.j2,
                "jminus_a" => &tr.j_minus,
                other => {
                    return Err(CliError::Validation {
                        name: "spectrum".into(),
                        problems: vec![format!("column: unknown trace column '{other}'")],
                    })
                }
            };
            let estimated = estimate_psd(samples, tr.sample_rate, &s.spectrum_config())
                .map_err(|e| CliError::core("spectrum", e))?;
            let exclusions: Vec<_> = beat_mhz
                .map(|f| (f * 1e6 - beat_exclusion_khz * 1e3, f * 1e6 + beat_exclusion_khz * 1e3))
                .into_iter()
                .collect();
            let (path, mut out) = output_file(&cli.out_dir, &format!("{}_spectrum.tsv", stem(trace)))?;
            let echo = [("source".to_string(), trace.display().to_string()), ("column".to_string(), column.clone())];
            write_spectrum(&mut out, &estimated, &echo).map_err(|e| CliError::core("writing spectrum", e))?;
            let mut m = BTreeMap::new();
            m.insert("floor_db".into(), noise_floor(&estimated, &exclusions).map_err(|e| CliError::core("floor", e))?);
            m.insert(
                "flatness_db".into(),
                band_flatness_db(&estimated, &exclusions).map_err(|e| CliError::core("flatness", e))?,
            );
            m.insert("rbw_hz".into(), estimated.rbw);
            m.insert("averages".into(), estimated.averages as f64);
            let mut r = metrics_report(&stem(trace), "spectrum", tr.seed_used, m);
            r.samples = tr.len();
            r.artifacts.push(path);
            r
        }
        Command::Fringe { scan } => {
            require_input(scan)?;
            let sc = read_fringe_scan(scan).map_err(|e| CliError::core(format!("reading {}", scan.display()), e))?;
            let v = fringe_visibility(&sc).map_err(|e| CliError::core("fringe fit", e))?;
            let m = v.iter().enumerate().map(|(i, v)| (format!("visibility_{}", i + 1), *v)).collect();
            metrics_report(&stem(scan), "fringe", seed, m)
        }
        Command::Scenario(ScenarioCommand::List) => {
            for name in bundled::names() {
                let s = bundled::load_bundled(name).expect("bundled name")?;
                println!("{name:<24} {:<11} {}", s.experiment.name(), s.description);
            }
            return Ok(exit::OK);
        }
        Command::Scenario(ScenarioCommand::Show { scenario }) => {
            print!("{}", bundled::resolve(scenario)?.to_toml());
            return Ok(exit::OK);
        }
        Command::Scenario(ScenarioCommand::Run { scenario }) => {
            let mut s = bundled::resolve(scenario)?;
            if let Some(seed) = cli.seed {
                s.sim.seed = seed;
            }
            if let Some(trials) = cli.trials {
                s.sim.trials = trials;
            }
            let report = run_scenario(&s, Some(&cli.out_dir))?;
            let text = emit_report(&report, cli.format);
            std::fs::create_dir_all(&cli.out_dir)?;
            let path = cli.out_dir.join(format!("{}_report.{}", s.name, cli.format.extension()));
            std::fs::write(&path, &text)?;
            print!("{text}");
            return Ok(if report.all_passed() { exit::OK } else { exit::EXPECTATION });
        }
    };
    print!("{}", emit_report(&report, cli.format));
    Ok(exit::OK)
}
