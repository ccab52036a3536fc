//! Run configuration: every tunable of the pipeline with its default, a
//! line-based `key = value` file loader, and flag overrides that win over
//! file values. The echoed form is itself a loadable config file.

use std::fmt::Write as _;
use std::path::Path;

use tagparse_core::graph::{BandwidthRule, EigMethod};
use tagparse_core::pipeline::SceneConfig;
use tagparse_core::solver::SolverParams;

use crate::error::{with_path, CliError, Result};

/// Every pipeline tunable. Paths stay on the subcommands; this is the part a
/// config file or the report's echo can carry.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Neighbors per region in the k-NN graph.
    pub k: usize,
    /// Context-propagation strength; also the baseline's diffusion weight.
    pub alpha: f64,
    /// Spectral-smoothness weight.
    pub lambda: f64,
    /// Label-fidelity weight.
    pub gamma: f64,
    /// Spectral basis size.
    pub m: usize,
    /// Solver relative-change stop.
    pub tol: f64,
    /// Solver iteration cap.
    pub max_iter: usize,
    /// Base seed for every seeded stage.
    pub seed: u64,
    /// Mixture components fitted per image.
    pub gmm_components: usize,
    pub gmm_max_iter: usize,
    pub gmm_tol: f64,
    /// Regions below this fraction of the image area are merged away.
    pub min_region_frac: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            k: 550,
            alpha: 0.05,
            lambda: 0.01,
            gamma: 0.01,
            m: 35,
            tol: 1e-4,
            max_iter: 10,
            seed: 0,
            gmm_components: 10,
            gmm_max_iter: 60,
            gmm_tol: 1e-6,
            min_region_frac: 0.005,
        }
    }
}

/// Flag values carried from the command line; `None` means "not given".
#[derive(Debug, Clone, Default)]
pub struct ConfigOverrides {
    pub k: Option<usize>,
    pub alpha: Option<f64>,
    pub lambda: Option<f64>,
    pub gamma: Option<f64>,
    pub m: Option<usize>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub seed: Option<u64>,
    pub gmm_components: Option<usize>,
    pub gmm_max_iter: Option<usize>,
    pub gmm_tol: Option<f64>,
    pub min_region_frac: Option<f64>,
}

impl RunConfig {
    /// Load defaults, then the optional config file, then flag overrides,
    /// and validate the result.
    pub fn resolve(file: Option<&Path>, overrides: &ConfigOverrides) -> Result<Self> {
        let mut config = RunConfig::default();
        if let Some(path) = file {
            config.apply_file(path)?;
        }
        config.apply_overrides(overrides);
        config.validate()?;
        Ok(config)
    }

    fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = with_path(std::fs::read_to_string(path), path)?;
        // A plain file has no section headers and every line counts. A run
        // report also loads directly: once a `[section]` header appears, only
        // the `[config]` section is read and the rest is skipped.
        let mut in_config_section = true;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                in_config_section = name == "config";
                continue;
            }
            if !in_config_section {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::usage(format!(
                    "{}: line {}: expected `key = value`",
                    path.display(),
                    idx + 1
                ))
            })?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| CliError::usage(format!("{key}: bad value {value:?}")))
        }
        match key {
            "k" => self.k = parse(key, value)?,
            "alpha" => self.alpha = parse(key, value)?,
            "lambda" => self.lambda = parse(key, value)?,
            "gamma" => self.gamma = parse(key, value)?,
            "m" => self.m = parse(key, value)?,
            "tol" => self.tol = parse(key, value)?,
            "max_iter" => self.max_iter = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "gmm_components" => self.gmm_components = parse(key, value)?,
            "gmm_max_iter" => self.gmm_max_iter = parse(key, value)?,
            "gmm_tol" => self.gmm_tol = parse(key, value)?,
            "min_region_frac" => self.min_region_frac = parse(key, value)?,
            other => return Err(CliError::usage(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    fn apply_overrides(&mut self, o: &ConfigOverrides) {
        macro_rules! take {
            ($($field:ident),*) => {
                $(if let Some(v) = o.$field { self.$field = v; })*
            };
        }
        take!(
            k, alpha, lambda, gamma, m, tol, max_iter, seed, gmm_components, gmm_max_iter,
            gmm_tol, min_region_frac
        );
    }

    pub fn validate(&self) -> Result<()> {
        fn check(ok: bool, key: &str, range: &str) -> Result<()> {
            if ok {
                Ok(())
            } else {
                Err(CliError::usage(format!("{key}: value outside {range}")))
            }
        }
        check(self.k >= 1, "k", "1..")?;
        check(
            self.alpha > 0.0 && self.alpha < 1.0 && self.alpha.is_finite(),
            "alpha",
            "(0, 1)",
        )?;
        check(self.lambda >= 0.0 && self.lambda.is_finite(), "lambda", "[0, inf)")?;
        check(self.gamma >= 0.0 && self.gamma.is_finite(), "gamma", "[0, inf)")?;
        check(self.m >= 1, "m", "1..")?;
        check(self.tol > 0.0 && self.tol.is_finite(), "tol", "(0, inf)")?;
        check(self.max_iter >= 1, "max_iter", "1..")?;
        check(self.gmm_components >= 1, "gmm_components", "1..")?;
        check(self.gmm_max_iter >= 1, "gmm_max_iter", "1..")?;
        check(
            self.gmm_tol > 0.0 && self.gmm_tol.is_finite(),
            "gmm_tol",
            "(0, inf)",
        )?;
        check(
            self.min_region_frac >= 0.0 && self.min_region_frac < 0.5,
            "min_region_frac",
            "[0, 0.5)",
        )?;
        Ok(())
    }

    /// The exact effective configuration as loadable `key = value` lines, in
    /// a fixed key order.
    pub fn echo(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "k = {}", self.k);
        let _ = writeln!(out, "alpha = {}", self.alpha);
        let _ = writeln!(out, "lambda = {}", self.lambda);
        let _ = writeln!(out, "gamma = {}", self.gamma);
        let _ = writeln!(out, "m = {}", self.m);
        let _ = writeln!(out, "tol = {}", self.tol);
        let _ = writeln!(out, "max_iter = {}", self.max_iter);
        let _ = writeln!(out, "seed = {}", self.seed);
        let _ = writeln!(out, "gmm_components = {}", self.gmm_components);
        let _ = writeln!(out, "gmm_max_iter = {}", self.gmm_max_iter);
        let _ = writeln!(out, "gmm_tol = {}", self.gmm_tol);
        let _ = writeln!(out, "min_region_frac = {}", self.min_region_frac);
        out
    }

    pub fn scene_config(&self) -> SceneConfig {
        SceneConfig {
            gmm_components: self.gmm_components,
            gmm_max_iter: self.gmm_max_iter,
            gmm_tol: self.gmm_tol,
            min_region_frac: self.min_region_frac,
            knn: self.k,
            basis_size: self.m,
            bandwidth: BandwidthRule::MedianKnn,
            eig: EigMethod::Auto,
            seed: self.seed,
        }
    }

    pub fn solver_params(&self) -> SolverParams {
        SolverParams {
            lambda: self.lambda,
            gamma: self.gamma,
            tol: self.tol,
            max_iter: self.max_iter,
        }
    }
}
