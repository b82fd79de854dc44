//! Scenario files compiled into the binary.

use std::path::{Path, PathBuf};

use crate::error::{CliError, Result};
use crate::scenario::{load_scenario, parse_scenario, Scenario};

macro_rules! bundled {
    ($($name:literal),* $(,)?) => {
        &[$(($name, include_str!(concat!("../scenarios/", $name, ".toml")))),*]
    };
}

pub const BUNDLED: &[(&str, &str)] = bundled!(
    "fig3_homodyne_4mW",
    "fig3_homodyne_8mW",
    "fig3_heterodyne_4mW",
    "fig3_heterodyne_8mW",
    "het_vs_hom_coherence",
    "lo_doubling",
    "imageband_ideal",
    "imageband_prediction",
    "fig4_fringes",
);

pub fn names() -> impl Iterator<Item = &'static str> {
    BUNDLED.iter().map(|(n, _)| *n)
}

pub fn text(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

pub fn load_bundled(name: &str) -> Option<Result<Scenario>> {
    let t = text(name)?;
    Some(parse_scenario(t, &PathBuf::from(format!("<bundled>/{name}.toml"))))
}

/// Loads `arg` as a file when it exists, otherwise as a bundled scenario name.
pub fn resolve(arg: &str) -> Result<Scenario> {
    let path = Path::new(arg);
    if path.exists() {
        return load_scenario(path);
    }
    load_bundled(arg).unwrap_or_else(|| {
        Err(CliError::Input {
            path: path.to_path_buf(),
            source: std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!("no such file or bundled scenario (bundled: {})", names().collect::<Vec<_>>().join(", ")),
            ),
        })
    })
}
