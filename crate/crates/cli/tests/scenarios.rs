use std::path::Path;

use hetnoise_cli::bundled::{self, load_bundled};
use hetnoise_cli::{parse_scenario, CliError, Experiment, Scenario};
use hetnoise_core::photon_rate_from_power;
use proptest::prelude::*;

fn parse(text: &str) -> Result<Scenario, CliError> {
    parse_scenario(text, Path::new("case.toml"))
}

fn problems(err: CliError) -> Vec<String> {
    match err {
        CliError::Validation { problems, .. } => problems,
        other => panic!("expected a validation error, got {other:?}"),
    }
}

#[test]
fn every_bundled_scenario_loads() {
    let names: Vec<_> = bundled::names().collect();
    for required in [
        "fig3_homodyne_4mW",
        "fig3_homodyne_8mW",
        "fig3_heterodyne_4mW",
        "fig3_heterodyne_8mW",
        "fig4_fringes",
        "imageband_ideal",
        "imageband_prediction",
        "lo_doubling",
        "het_vs_hom_coherence",
    ] {
        assert!(names.contains(&required), "{required} missing");
    }
    for name in names {
        let s = load_bundled(name).unwrap().unwrap();
        assert_eq!(s.name, name);
        assert!(!s.expect.is_empty(), "{name} asserts nothing");
    }
}

#[test]
fn homodyne_4mw_is_homodyne_at_4mw() {
    let s = load_bundled("fig3_homodyne_4mW").unwrap().unwrap();
    let setup = s.setup().unwrap();
    assert!(setup.beat.is_homodyne());
    let expected = photon_rate_from_power(4e-3, 1064e-9).unwrap();
    // The field stores the flux amplitude, so squaring it back can be off by an ulp.
    assert!((setup.lo.photon_rate() / expected - 1.0).abs() < 4.0 * f64::EPSILON);
    assert_eq!(s.spectrum.rbw_khz, 0.3);
}

#[test]
fn heterodyne_scenarios_beat_at_3mhz() {
    for name in ["fig3_heterodyne_4mW", "fig3_heterodyne_8mW"] {
        let setup = load_bundled(name).unwrap().unwrap().setup().unwrap();
        assert!((setup.beat.beat_hz() - 3e6).abs() < 1.0, "{name}");
    }
}

#[test]
fn empty_file_lists_required_fields() {
    let p = problems(parse("").unwrap_err());
    assert_eq!(p.len(), 1);
    assert!(p[0].contains("name") && p[0].contains("experiment"), "{p:?}");
}

#[test]
fn zero_rbw_is_rejected_by_name() {
    let p = problems(parse("name = \"x\"\nexperiment = \"floors\"\n[spectrum]\nrbw_khz = 0\n").unwrap_err());
    assert!(p.iter().any(|m| m.contains("rbw must be positive")), "{p:?}");
}

#[test]
fn parse_errors_report_the_line() {
    let text = "name = \"x\"\nexperiment = \"floors\"\n\n[optics]\nlo_power_mw = 4\nlo_powr_mw = 8\n";
    match parse(text) {
        Err(CliError::Parse { line, message, .. }) => {
            assert_eq!(line, 6);
            assert!(message.contains("lo_powr_mw"), "{message}");
        }
        other => panic!("{other:?}"),
    }
    assert!(matches!(parse("name = \n"), Err(CliError::Parse { line: 1, .. })));
}

#[test]
fn expectations_must_name_defined_metrics() {
    let text = "name = \"x\"\nexperiment = \"fringe\"\n[[expect]]\nmetric = \"floor_db_mc\"\ntarget = 0\n";
    let p = problems(parse(text).unwrap_err());
    assert!(p.iter().any(|m| m.starts_with("expect[0].metric")), "{p:?}");
}

#[test]
fn monte_carlo_metrics_need_trials() {
    let mut s = load_bundled("het_vs_hom_coherence").unwrap().unwrap();
    s.sim.trials = 0;
    let p = problems(s.validate().unwrap_err());
    assert!(p.iter().any(|m| m.contains("difference_db_mc")), "{p:?}");
}

#[test]
fn compare_needs_a_variant() {
    let p = problems(parse("name = \"x\"\nexperiment = \"compare\"\n").unwrap_err());
    assert!(p.iter().any(|m| m.starts_with("variant")), "{p:?}");
}

#[test]
fn too_few_samples_for_the_rbw() {
    let p = problems(parse("name = \"x\"\nexperiment = \"floors\"\n[sim]\nsamples = 1000\n").unwrap_err());
    assert!(p.iter().any(|m| m.starts_with("sim.samples")), "{p:?}");
}

#[test]
fn several_problems_are_reported_together() {
    let text = "name = \"x\"\nexperiment = \"floors\"\n[optics]\nvisibility_1 = 1.5\n[detector]\nefficiency = 0\n";
    let p = problems(parse(text).unwrap_err());
    assert!(p.iter().any(|m| m.starts_with("optics.visibility_1")));
    assert!(p.iter().any(|m| m.starts_with("detector.efficiency")));
}

#[test]
fn bundled_scenarios_round_trip() {
    for name in bundled::names() {
        let s = load_bundled(name).unwrap().unwrap();
        let again = parse(&s.to_toml()).unwrap();
        assert_eq!(again, s, "{name}");
    }
}

#[test]
fn defaults_are_echoed() {
    let s = parse("name = \"x\"\nexperiment = \"prediction\"\n").unwrap();
    let text = s.to_toml();
    for key in ["wavelength_nm", "pulse_width_ns", "rbw_khz", "seed", "kind"] {
        assert!(text.contains(key), "{key} not echoed");
    }
    assert_eq!(s.experiment, Experiment::Prediction);
}

proptest! {
    #[test]
    fn random_scenarios_round_trip(
        lo in 0.1..50.0f64,
        offset in -8.0..8.0f64,
        eta in 0.01..1.0f64,
        v1 in 0.0..=1.0f64,
        v2 in 0.0..=1.0f64,
        seed in 0..i64::MAX as u64,
        target in -10.0..10.0f64,
    ) {
        let text = format!(
            "name = \"p\"\nexperiment = \"compare\"\n[optics]\nlo_power_mw = {lo:?}\n\
             collection_efficiency = {eta:?}\nvisibility_1 = {v1:?}\nvisibility_2 = {v2:?}\n\
             [sim]\nseed = {seed}\n[variant]\nnet_offset_mhz = {offset:?}\n\
             [[expect]]\nmetric = \"difference_db_analytic\"\ntarget = {target:?}\ntolerance = 0.5\n"
        );
        let s = parse(&text).unwrap();
        prop_assert_eq!(s.optics.lo_power_mw, lo);
        prop_assert_eq!(parse(&s.to_toml()).unwrap(), s);
    }
}
