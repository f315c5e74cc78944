use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::estimate::{parse_key_value, RhoNormalization, WeightFn};
use crate::mat2::Vec2;
use crate::model::{ModelParams, THETA_NAMES};
use crate::simulate::{Sampler, SimConfig};

/// Which experiment a config runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExperimentKind {
    Simulate,
    Estimate,
    McConsistency,
    McClt,
    LaplaceCheck,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 5] = [
        ExperimentKind::Simulate,
        ExperimentKind::Estimate,
        ExperimentKind::McConsistency,
        ExperimentKind::McClt,
        ExperimentKind::LaplaceCheck,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Simulate => "simulate",
            ExperimentKind::Estimate => "estimate",
            ExperimentKind::McConsistency => "mc_consistency",
            ExperimentKind::McClt => "mc_clt",
            ExperimentKind::LaplaceCheck => "laplace_check",
        }
    }

    /// Accepts both `mc_clt` and the CLI spelling `mc-clt`.
    pub fn parse(s: &str) -> Result<Self> {
        let norm = s.trim().replace('-', "_");
        Self::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .ok_or_else(|| Error::ConfigParse(format!("unknown kind '{s}'")))
    }
}

/// Settings of the Laplace-transform check.
#[derive(Clone, Debug, PartialEq)]
pub struct LaplaceSettings {
    pub lambdas: Vec<Vec2>,
    pub times: Vec<f64>,
    pub paths: usize,
}

/// A fully resolved experiment: every field has a value, defaults filled in.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub model: ModelParams,
    /// Simulation settings; `sim.seed` is the master seed.
    pub sim: SimConfig,
    pub sampler: Sampler,
    pub weight: WeightFn,
    pub rho_normalization: RhoNormalization,
    pub covariance: bool,
    pub replicates: usize,
    pub n_grid: Vec<usize>,
    pub output_dir: PathBuf,
    /// Worker threads; 0 means available parallelism.
    pub jobs: usize,
    /// Series CSV for `estimate`; simulated from `sim` when absent.
    pub input: Option<PathBuf>,
    pub laplace: LaplaceSettings,
}

const KNOWN_KEYS: &[&str] = &[
    "kind",
    "model.a1",
    "model.a2",
    "model.b11",
    "model.b12",
    "model.b21",
    "model.b22",
    "model.sigma1",
    "model.sigma2",
    "sim.delta",
    "sim.euler_dt",
    "sim.n_obs",
    "sim.burn_in",
    "sim.x0",
    "sampler",
    "weight",
    "rho_normalization",
    "covariance",
    "replicates",
    "n_grid",
    "output_dir",
    "seed",
    "jobs",
    "input",
    "laplace.lambda",
    "laplace.t",
    "laplace.paths",
];

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| Error::ConfigParse(format!("{key}: cannot parse '{v}'")))
}

fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.trim()
        .trim_start_matches('[')
        .trim_end_matches(']')
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse_num(key, s))
        .collect()
}

fn parse_pair(key: &str, v: &str) -> Result<Vec2> {
    match parse_list::<f64>(key, v)?.as_slice() {
        [a, b] => Ok(Vec2::new(*a, *b)),
        _ => Err(Error::ConfigParse(format!(
            "{key}: expected two numbers 'x1,x2', got '{v}'"
        ))),
    }
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::ConfigParse(format!(
            "{key}: expected true|false, got '{v}'"
        ))),
    }
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    /// Reads a config file, then applies `overrides` (later entries win).
    pub fn from_file(path: &Path, overrides: &[(String, String)]) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let mut pairs = parse_key_value(&text)?;
        pairs.extend_from_slice(overrides);
        Self::from_pairs(&pairs)
    }

    /// Resolves `key = value` pairs; unknown keys are rejected and later
    /// duplicates override earlier ones.
    pub fn from_pairs(pairs: &[(String, String)]) -> Result<Self> {
        let mut map: BTreeMap<&str, &str> = BTreeMap::new();
        for (k, v) in pairs {
            if !KNOWN_KEYS.contains(&k.as_str()) {
                return Err(Error::ConfigParse(format!("unknown key '{k}'")));
            }
            map.insert(k, v);
        }
        let get = |k: &str| map.get(k).copied();

        let kind = ExperimentKind::parse(
            get("kind").ok_or_else(|| Error::ConfigParse("missing key 'kind'".into()))?,
        )?;

        let defaults = [1.0, 1.0, 1.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        let mut theta = [0.0; 8];
        for (i, name) in THETA_NAMES.iter().enumerate() {
            let key = format!("model.{name}");
            theta[i] = get(&key).map_or(Ok(defaults[i]), |v| parse_num(&key, v))?;
        }
        let model =
            ModelParams::from_theta(theta).map_err(|e| Error::ConfigParse(e.to_string()))?;

        let seed = get("seed").map_or(Ok(1), |v| parse_num("seed", v))?;
        let n_obs = get("sim.n_obs").map_or(Ok(1000), |v| parse_num("sim.n_obs", v))?;
        let mut sim = SimConfig::new(model, n_obs, seed);
        if let Some(v) = get("sim.delta") {
            sim.delta = parse_num("sim.delta", v)?;
        }
        if let Some(v) = get("sim.euler_dt") {
            sim.euler_dt = parse_num("sim.euler_dt", v)?;
        }
        if let Some(v) = get("sim.burn_in") {
            sim.burn_in = parse_num("sim.burn_in", v)?;
        }
        if let Some(v) = get("sim.x0") {
            sim.x0 = parse_pair("sim.x0", v)?;
        }

        let sampler = match get("sampler") {
            Some(v) => Sampler::parse(v)?,
            None if model.is_diagonal() => Sampler::ExactDiagonal,
            None => Sampler::Euler,
        };
        let weight = WeightFn::parse(get("weight").unwrap_or("constant"))?;
        let rho_normalization =
            RhoNormalization::parse(get("rho_normalization").unwrap_or("divide"))?;
        let covariance = match get("covariance") {
            Some(v) => parse_bool("covariance", v)?,
            None => kind != ExperimentKind::McConsistency,
        };
        let replicates = get("replicates").map_or(Ok(100), |v| parse_num("replicates", v))?;
        let n_grid =
            get("n_grid").map_or(Ok(vec![1000, 4000, 16000]), |v| parse_list("n_grid", v))?;
        let output_dir = PathBuf::from(get("output_dir").unwrap_or("out"));
        let jobs = get("jobs").map_or(Ok(0), |v| parse_num("jobs", v))?;
        let input = get("input").map(PathBuf::from);

        let lambdas = get("laplace.lambda")
            .unwrap_or("0.5,0;0,0.5;0.3,0.7")
            .split(';')
            .filter(|s| !s.trim().is_empty())
            .map(|s| parse_pair("laplace.lambda", s))
            .collect::<Result<Vec<_>>>()?;
        let times = get("laplace.t").map_or(Ok(vec![1.0]), |v| parse_list("laplace.t", v))?;
        let paths = get("laplace.paths").map_or(Ok(100_000), |v| parse_num("laplace.paths", v))?;

        let cfg = ExperimentConfig {
            kind,
            model,
            sim,
            sampler,
            weight,
            rho_normalization,
            covariance,
            replicates,
            n_grid,
            output_dir,
            jobs,
            input,
            laplace: LaplaceSettings {
                lambdas,
                times,
                paths,
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        self.sim
            .validate()
            .map_err(|e| Error::ConfigParse(e.to_string()))?;
        if self.sampler == Sampler::ExactDiagonal && !self.model.is_diagonal() {
            return Err(Error::ConfigParse(
                "sampler = exact requires model.b12 = model.b21 = 0".into(),
            ));
        }
        match self.kind {
            ExperimentKind::McConsistency => {
                if self.n_grid.is_empty() || self.n_grid.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::ConfigParse(
                        "n_grid must be non-empty and strictly increasing".into(),
                    ));
                }
                if self.n_grid[0] < 3 {
                    return Err(Error::ConfigParse("n_grid entries must be >= 3".into()));
                }
            }
            ExperimentKind::McClt if self.replicates < 3 => {
                return Err(Error::ConfigParse("mc_clt needs replicates >= 3".into()));
            }
            ExperimentKind::LaplaceCheck => {
                if self.laplace.lambdas.is_empty() || self.laplace.times.is_empty() {
                    return Err(Error::ConfigParse(
                        "laplace.lambda and laplace.t must be non-empty".into(),
                    ));
                }
                if self.laplace.lambdas.iter().any(|l| !l.is_nonnegative()) {
                    return Err(Error::ConfigParse(
                        "laplace.lambda entries must be >= 0".into(),
                    ));
                }
            }
            _ => {}
        }
        if matches!(
            self.kind,
            ExperimentKind::McConsistency | ExperimentKind::McClt
        ) && self.replicates == 0
        {
            return Err(Error::ConfigParse("replicates must be >= 1".into()));
        }
        Ok(())
    }

    pub fn seed(&self) -> u64 {
        self.sim.seed
    }

    /// Every key with its resolved value, in a form [`ExperimentConfig::from_pairs`]
    /// reads back to the same config.
    pub fn resolved_text(&self) -> String {
        let mut s = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        line("kind", self.kind.name().into());
        for (name, v) in THETA_NAMES.iter().zip(self.model.theta()) {
            line(&format!("model.{name}"), v.to_string());
        }
        line("sim.delta", self.sim.delta.to_string());
        line("sim.euler_dt", self.sim.euler_dt.to_string());
        line("sim.n_obs", self.sim.n_obs.to_string());
        line("sim.burn_in", self.sim.burn_in.to_string());
        line("sim.x0", join(&self.sim.x0.to_array()));
        line("sampler", self.sampler.name().into());
        line("weight", self.weight.tag().into());
        line("rho_normalization", self.rho_normalization.name().into());
        line("covariance", self.covariance.to_string());
        line("replicates", self.replicates.to_string());
        line("n_grid", join(&self.n_grid));
        line("output_dir", self.output_dir.display().to_string());
        line("seed", self.seed().to_string());
        line("jobs", self.jobs.to_string());
        if let Some(p) = &self.input {
            line("input", p.display().to_string());
        }
        line(
            "laplace.lambda",
            self.laplace
                .lambdas
                .iter()
                .map(|l| join(&l.to_array()))
                .collect::<Vec<_>>()
                .join(";"),
        );
        line("laplace.t", join(&self.laplace.times));
        line("laplace.paths", self.laplace.paths.to_string());
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs(text: &str) -> Vec<(String, String)> {
        parse_key_value(text).unwrap()
    }

    #[test]
    fn defaults_fill_in() {
        let c = ExperimentConfig::from_pairs(&pairs("kind = mc_consistency")).unwrap();
        assert_eq!(c.model, ModelParams::diagonal(1.0, 1.0, 1.0).unwrap());
        assert_eq!(c.sim.delta, 1.0);
        assert_eq!(c.sim.euler_dt, 1e-3);
        assert!((c.sim.burn_in - 50.0).abs() < 1e-12);
        assert_eq!(c.sampler, Sampler::ExactDiagonal);
        assert_eq!(c.weight.tag(), "constant");
        assert_eq!(c.n_grid, vec![1000, 4000, 16000]);
        assert!(!c.covariance);
    }

    #[test]
    fn resolved_text_round_trips() {
        let c = ExperimentConfig::from_pairs(&pairs(
            "kind = mc-clt\nmodel.b12 = 0.2\nmodel.b21 = 0.3\nweight = inverse_norm\nsim.x0 = 0.5, 2\nseed = 99\nlaplace.lambda = 1,2;3,4",
        ))
        .unwrap();
        assert_eq!(c.sampler, Sampler::Euler);
        let text = c.resolved_text();
        let c2 = ExperimentConfig::from_pairs(&pairs(&text)).unwrap();
        assert_eq!(c2.resolved_text(), text);
        assert_eq!(c2.sim, c.sim);
        assert_eq!(c2.laplace, c.laplace);
    }

    #[test]
    fn later_keys_override() {
        let c =
            ExperimentConfig::from_pairs(&pairs("kind = simulate\nseed = 1\nseed = 7")).unwrap();
        assert_eq!(c.seed(), 7);
    }

    #[test]
    fn rejects_bad_configs() {
        for bad in [
            "seed = 1",
            "kind = nope",
            "kind = simulate\nmodel.colour = 3",
            "kind = simulate\nmodel.a1 = -1",
            "kind = simulate\nmodel.b12 = 0.1\nsampler = exact",
            "kind = mc_consistency\nn_grid = 100, 50",
            "kind = simulate\nsim.euler_dt = 0.3",
            "kind = simulate\ncovariance = maybe",
            "kind = simulate\nsim.x0 = 1",
        ] {
            assert!(
                matches!(
                    ExperimentConfig::from_pairs(&pairs(bad)),
                    Err(Error::ConfigParse(_))
                ),
                "{bad}"
            );
        }
    }

    #[test]
    fn kind_spellings() {
        assert_eq!(
            ExperimentKind::parse("mc-consistency").unwrap(),
            ExperimentKind::McConsistency
        );
        assert_eq!(
            ExperimentKind::parse("laplace_check").unwrap(),
            ExperimentKind::LaplaceCheck
        );
    }
}
