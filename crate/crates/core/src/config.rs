//! Flat `key = value` experiment configuration.
//!
//! Lines starting with `#` and blank lines are ignored. Unknown keys and
//! repeated keys are errors. Command line overrides use the same keys and are
//! applied after the file.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::optim::OptimConfig;
use crate::problem::ProblemParams;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub problem: ProblemParams,
    pub optim: OptimConfig,
    pub output_dir: PathBuf,
    /// Write a VTK snapshot of the final state every `vtk_every` time steps; 0 disables.
    pub vtk_every: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            problem: ProblemParams::default(),
            optim: OptimConfig::default(),
            output_dir: PathBuf::from("output"),
            vtk_every: 0,
        }
    }
}

pub const KEYS: &[&str] = &[
    "lambda_yosida",
    "delta_smooth",
    "epsilon_hardening",
    "hardening_scale",
    "gamma_yield",
    "youngs_modulus",
    "poisson_ratio",
    "alpha",
    "T_end",
    "n_t",
    "n_x",
    "n_y",
    "offset_scale",
    "psi_quadrature",
    "tol_gradient",
    "max_iter",
    "armijo_c1",
    "backtrack_factor",
    "initial_step",
    "max_backtracks",
    "newton_tol",
    "newton_max_iter",
    "fd_tau",
    "output_dir",
    "vtk_every",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| Error::Config(format!("{key}: cannot parse '{value}': {e}")))
}

impl ExperimentConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let p = &mut self.problem;
        let o = &mut self.optim;
        match key {
            "lambda_yosida" => p.lambda_yosida = parse(key, value)?,
            "delta_smooth" => p.delta_smooth = parse(key, value)?,
            "epsilon_hardening" => p.epsilon_hardening = parse(key, value)?,
            "hardening_scale" => p.hardening_scale = parse(key, value)?,
            "gamma_yield" => p.gamma_yield = parse(key, value)?,
            "youngs_modulus" => p.youngs_modulus = parse(key, value)?,
            "poisson_ratio" => p.poisson_ratio = parse(key, value)?,
            "alpha" => p.alpha = parse(key, value)?,
            "T_end" => p.t_end = parse(key, value)?,
            "n_t" => p.n_t = parse(key, value)?,
            "n_x" => p.n_x = parse(key, value)?,
            "n_y" => p.n_y = parse(key, value)?,
            "offset_scale" => p.offset_scale = parse(key, value)?,
            "psi_quadrature" => p.psi_quadrature = value.parse()?,
            "tol_gradient" => o.tol_gradient = parse(key, value)?,
            "max_iter" => o.max_iter = parse(key, value)?,
            "armijo_c1" => o.armijo_c1 = parse(key, value)?,
            "backtrack_factor" => o.backtrack_factor = parse(key, value)?,
            "initial_step" => o.initial_step = parse(key, value)?,
            "max_backtracks" => o.max_backtracks = parse(key, value)?,
            "newton_tol" => {
                let tol = parse(key, value)?;
                p.newton.abs_tol = tol;
                p.newton.rel_tol = tol;
            }
            "newton_max_iter" => p.newton.max_iter = parse(key, value)?,
            "fd_tau" => o.fd_tau = parse(key, value)?,
            "output_dir" => self.output_dir = PathBuf::from(value),
            "vtk_every" => self.vtk_every = parse(key, value)?,
            other => {
                return Err(Error::Config(format!(
                    "unknown key '{other}' (known keys: {})",
                    KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }

    /// Parse config text on top of the defaults.
    pub fn parse_str(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        let mut seen = std::collections::HashSet::new();
        for (number, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = split_assignment(line)
                .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value', got '{line}'", number + 1)))?;
            if !seen.insert(key.to_string()) {
                return Err(Error::Config(format!("line {}: key '{key}' given twice", number + 1)));
            }
            cfg.set(key, value)
                .map_err(|e| Error::Config(format!("line {}: {}", number + 1, strip_prefix(&e))))?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse_str(&text)
    }

    /// Apply `key=value` overrides in order.
    pub fn apply_overrides<'a>(&mut self, overrides: impl IntoIterator<Item = &'a str>) -> Result<()> {
        for item in overrides {
            let (key, value) = split_assignment(item)
                .ok_or_else(|| Error::Config(format!("override '{item}' is not of the form key=value")))?;
            self.set(key, value)?;
        }
        Ok(())
    }

    /// Parameter checks that do not need any assembly.
    pub fn validate(&self) -> Result<()> {
        let p = &self.problem;
        if p.n_t == 0 || p.n_x == 0 || p.n_y == 0 {
            return Err(Error::Config("n_t, n_x and n_y must be positive".into()));
        }
        if !(p.alpha > 0.0) {
            return Err(Error::Config("alpha must be positive".into()));
        }
        self.optim.validate().map_err(|e| Error::Config(strip_prefix(&e)))?;
        p.newton.validate().map_err(|e| Error::Config(strip_prefix(&e)))
    }

    /// The config written back in the file format.
    pub fn to_config_string(&self) -> String {
        let p = &self.problem;
        let o = &self.optim;
        let quadrature = match p.psi_quadrature {
            crate::control::PsiQuadrature::Nodal => "nodal",
            crate::control::PsiQuadrature::Interpolant => "interpolant",
        };
        // one key drives both Newton tolerances
        let newton_tol = format!("{:e}", p.newton.abs_tol.max(p.newton.rel_tol));
        let rows: Vec<(&str, String)> = vec![
            ("lambda_yosida", format!("{:e}", p.lambda_yosida)),
            ("delta_smooth", format!("{:e}", p.delta_smooth)),
            ("epsilon_hardening", format!("{:e}", p.epsilon_hardening)),
            ("hardening_scale", format!("{:e}", p.hardening_scale)),
            ("gamma_yield", format!("{}", p.gamma_yield)),
            ("youngs_modulus", format!("{}", p.youngs_modulus)),
            ("poisson_ratio", format!("{}", p.poisson_ratio)),
            ("alpha", format!("{:e}", p.alpha)),
            ("T_end", format!("{}", p.t_end)),
            ("n_t", p.n_t.to_string()),
            ("n_x", p.n_x.to_string()),
            ("n_y", p.n_y.to_string()),
            ("offset_scale", format!("{}", p.offset_scale)),
            ("psi_quadrature", quadrature.to_string()),
            ("tol_gradient", format!("{:e}", o.tol_gradient)),
            ("max_iter", o.max_iter.to_string()),
            ("armijo_c1", format!("{:e}", o.armijo_c1)),
            ("backtrack_factor", format!("{}", o.backtrack_factor)),
            ("initial_step", format!("{}", o.initial_step)),
            ("max_backtracks", o.max_backtracks.to_string()),
            ("newton_tol", newton_tol),
            ("newton_max_iter", p.newton.max_iter.to_string()),
            ("fd_tau", format!("{:e}", o.fd_tau)),
            ("output_dir", self.output_dir.display().to_string()),
            ("vtk_every", self.vtk_every.to_string()),
        ];
        rows.into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

fn split_assignment(line: &str) -> Option<(&str, &str)> {
    let (key, value) = line.split_once('=')?;
    let (key, value) = (key.trim(), value.trim());
    let value = value.split_once(" #").map_or(value, |(v, _)| v.trim());
    (!key.is_empty() && !value.is_empty()).then_some((key, value))
}

fn strip_prefix(e: &Error) -> String {
    match e {
        Error::Config(msg) | Error::Parameter(msg) => msg.clone(),
        other => other.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::PsiQuadrature;

    #[test]
    fn defaults_match_the_reference_setting() {
        let cfg = ExperimentConfig::parse_str("").unwrap();
        assert_eq!(cfg.problem.delta_smooth, 1e-8);
        assert_eq!(cfg.problem.epsilon_hardening, 0.0);
        assert_eq!(cfg.problem.gamma_yield, 0.45);
        assert_eq!(cfg.problem.youngs_modulus, 210.0);
        assert_eq!(cfg.problem.poisson_ratio, 0.3);
        assert_eq!(cfg.problem.alpha, 1e-4);
        assert_eq!(cfg.problem.t_end, 1.0);
        assert_eq!(cfg.optim.tol_gradient, 5e-4);
        assert_eq!(cfg.optim.max_iter, 100);
        assert_eq!(cfg.optim.fd_tau, 1e-8);
        assert_eq!(cfg.problem.newton.abs_tol, 1e-10);
    }

    #[test]
    fn parses_keys_and_comments() {
        let text = "# run\nlambda_yosida = 0.1\nn_t=32 # coarse\n\n  psi_quadrature = interpolant\noutput_dir = out/a\nnewton_tol = 1e-11\n";
        let cfg = ExperimentConfig::parse_str(text).unwrap();
        assert_eq!(cfg.problem.lambda_yosida, 0.1);
        assert_eq!(cfg.problem.n_t, 32);
        assert_eq!(cfg.problem.psi_quadrature, PsiQuadrature::Interpolant);
        assert_eq!(cfg.output_dir, PathBuf::from("out/a"));
        assert_eq!(cfg.problem.newton.rel_tol, 1e-11);
    }

    #[test]
    fn rejects_bad_input() {
        for text in ["lambda = 1", "n_t = 1.5", "n_x", "alpha = 1\nalpha = 2", "n_t ="] {
            assert!(matches!(ExperimentConfig::parse_str(text), Err(Error::Config(_))), "{text}");
        }
        let err = ExperimentConfig::parse_str("alpha = 1e-4\nfoo = 3").unwrap_err();
        assert!(err.to_string().contains("line 2"));
    }

    #[test]
    fn overrides_win_over_file() {
        let mut cfg = ExperimentConfig::parse_str("n_t = 16\nalpha = 1").unwrap();
        cfg.apply_overrides(["n_t=64", "max_iter = 3"]).unwrap();
        assert_eq!(cfg.problem.n_t, 64);
        assert_eq!(cfg.problem.alpha, 1.0);
        assert_eq!(cfg.optim.max_iter, 3);
        assert!(cfg.apply_overrides(["n_t"]).is_err());
    }

    #[test]
    fn round_trip() {
        let mut cfg = ExperimentConfig::default();
        cfg.apply_overrides(["lambda_yosida=0.01", "n_x=32", "psi_quadrature=interpolant", "vtk_every=8"])
            .unwrap();
        let back = ExperimentConfig::parse_str(&cfg.to_config_string()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn validation() {
        assert!(ExperimentConfig::default().validate().is_ok());
        let mut cfg = ExperimentConfig::default();
        cfg.set("backtrack_factor", "2").unwrap();
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }
}
