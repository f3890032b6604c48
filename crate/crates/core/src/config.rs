//! INI-style `key = value` configuration.
//!
//! Section headers are accepted and ignored; `#` and `;` start comments.
//! Unknown keys are rejected.

use std::path::Path;

use crate::charges::PositionLaw;
use crate::coupling::{CouplingConstants, MHZ_PER_GHZ};
use crate::error::{Error, Result};

/// Simulation settings that may come from a config file. `None` means the
/// key was absent.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunSettings {
    pub radius_nm: Option<f64>,
    pub eps_r: Option<f64>,
    pub exclusion_nm: Option<f64>,
    pub lattice_a_nm: Option<f64>,
    pub interlayer_nm: Option<f64>,
    pub n_configs: Option<usize>,
    pub linewidth_mhz: Option<f64>,
    pub position_law: Option<PositionLaw>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    pub constants: CouplingConstants,
    pub run: RunSettings,
}

pub fn parse_position_law(s: &str) -> Result<PositionLaw> {
    match s {
        "uniform-ball" => Ok(PositionLaw::UniformBall),
        "gaussian-scaled" => Ok(PositionLaw::GaussianScaled),
        other => Err(Error::Config(format!(
            "unknown position law '{other}' (expected uniform-ball or gaussian-scaled)"
        ))),
    }
}

fn number(key: &str, value: &str, line: usize) -> Result<f64> {
    let v: f64 = value
        .parse()
        .map_err(|_| Error::Config(format!("line {line}: {key}: '{value}' is not a number")))?;
    if !v.is_finite() {
        return Err(Error::Config(format!("line {line}: {key} must be finite")));
    }
    Ok(v)
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split(['#', ';']).next().unwrap_or("").trim();
            if line.is_empty() || (line.starts_with('[') && line.ends_with(']')) {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", idx + 1)))?;
            pairs.push((idx + 1, key.trim().to_string(), value.trim().to_string()));
        }

        let mut cfg = ConfigFile::default();
        // a preset sets the baseline; explicit keys override it wherever they appear
        if let Some((line, _, v)) = pairs.iter().rev().find(|(_, k, _)| k == "preset") {
            cfg.constants = CouplingConstants::preset(v)
                .ok_or_else(|| Error::Config(format!("line {line}: unknown preset '{v}'")))?;
        }
        let k = &mut cfg.constants;
        let run = &mut cfg.run;
        for (line, key, value) in &pairs {
            let line = *line;
            let num = || number(key, value, line);
            match key.as_str() {
                "preset" => {}
                "d0_mhz" => k.d0_mhz = num()?,
                "g1_ghz_per_strain" => k.g1 = num()? * MHZ_PER_GHZ,
                "g2_ghz_per_strain" => k.g2 = num()? * MHZ_PER_GHZ,
                "g2p_ghz_per_strain" => k.g2p = num()? * MHZ_PER_GHZ,
                "g3_ghz_per_strain" => k.g3 = num()? * MHZ_PER_GHZ,
                "g3p_ghz_per_strain" => k.g3p = num()? * MHZ_PER_GHZ,
                "dperp_hz_cm_per_v" => k.d_perp = num()?,
                "a_hf_mhz" => k.a_hf_mhz = num()?,
                "c11_gpa" => k.c11_gpa = num()?,
                "c12_gpa" => k.c12_gpa = num()?,
                "radius_nm" => run.radius_nm = Some(num()?),
                "eps_r" => run.eps_r = Some(num()?),
                "exclusion_nm" => run.exclusion_nm = Some(num()?),
                "lattice_a_nm" => run.lattice_a_nm = Some(num()?),
                "interlayer_nm" => run.interlayer_nm = Some(num()?),
                "linewidth_mhz" => run.linewidth_mhz = Some(num()?),
                "n_configs" => {
                    run.n_configs = Some(value.parse().map_err(|_| {
                        Error::Config(format!("line {line}: n_configs: '{value}' is not a count"))
                    })?)
                }
                "position_law" => run.position_law = Some(parse_position_law(value)?),
                other => return Err(Error::Config(format!("line {line}: unknown key '{other}'"))),
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }
}
