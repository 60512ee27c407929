//! Solver settings from flags, a `key=value` config file and built-in defaults,
//! in that order of precedence.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use flowseg::features::ChannelKind;
use flowseg::graph::PropagationMode;
use flowseg::solver::{InitScheme, Normalization, RegressionMode, SolverConfig};
use serde::{Deserialize, Serialize};

/// Keys accepted in the config file; each matches a long flag.
pub const KEYS: &[&str] = &[
    "iterations",
    "radius",
    "sigma-k",
    "beta",
    "init",
    "init-sigma",
    "init-maps",
    "seed",
    "regression",
    "chain-steps",
    "channels",
    "prob-maps",
    "threshold",
    "normalization",
    "tol",
    "deterministic",
];

#[derive(Args, Debug, Clone, Default)]
pub struct SolverArgs {
    /// Power-iteration steps.
    #[arg(long, value_name = "N")]
    pub iterations: Option<String>,
    /// Temporal radius of chain links.
    #[arg(long, value_name = "R")]
    pub radius: Option<String>,
    /// Width of the temporal Gaussian edge weight.
    #[arg(long = "sigma-k", value_name = "S")]
    pub sigma_k: Option<String>,
    /// Ridge strength.
    #[arg(long, value_name = "B")]
    pub beta: Option<String>,
    /// Initial mask: gaussian, uniform, random or external.
    #[arg(long, value_name = "SCHEME")]
    pub init: Option<String>,
    /// Standard deviation of the gaussian start, in pixels.
    #[arg(long = "init-sigma", value_name = "S")]
    pub init_sigma: Option<String>,
    /// Directory of per-frame PGMs for the external start.
    #[arg(long = "init-maps", value_name = "DIR")]
    pub init_maps: Option<String>,
    /// Seed for the random start.
    #[arg(long, value_name = "N")]
    pub seed: Option<String>,
    /// per-frame or global.
    #[arg(long, value_name = "MODE")]
    pub regression: Option<String>,
    /// Chain steps read by the motion and probability features.
    #[arg(long = "chain-steps", value_name = "L")]
    pub chain_steps: Option<String>,
    /// Comma-separated feature channels: motion, color, color_chain.
    #[arg(long, value_name = "LIST")]
    pub channels: Option<String>,
    /// Directory of per-frame foreground probability PGMs.
    #[arg(long = "prob-maps", value_name = "DIR")]
    pub prob_maps: Option<String>,
    /// Binarization level in (0,1).
    #[arg(long, value_name = "T")]
    pub threshold: Option<String>,
    /// per-frame or per-video rescaling before thresholding.
    #[arg(long, value_name = "MODE")]
    pub normalization: Option<String>,
    /// Early-stop level on the direction change.
    #[arg(long, value_name = "T")]
    pub tol: Option<String>,
    /// on: bit-reproducible propagation; off: faster scatter.
    #[arg(long, value_name = "on|off")]
    pub deterministic: Option<String>,
    /// key=value file with defaults for any of the flags above.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
}

impl SolverArgs {
    fn given(&self) -> BTreeMap<&'static str, String> {
        let pairs = [
            ("iterations", &self.iterations),
            ("radius", &self.radius),
            ("sigma-k", &self.sigma_k),
            ("beta", &self.beta),
            ("init", &self.init),
            ("init-sigma", &self.init_sigma),
            ("init-maps", &self.init_maps),
            ("seed", &self.seed),
            ("regression", &self.regression),
            ("chain-steps", &self.chain_steps),
            ("channels", &self.channels),
            ("prob-maps", &self.prob_maps),
            ("threshold", &self.threshold),
            ("normalization", &self.normalization),
            ("tol", &self.tol),
            ("deterministic", &self.deterministic),
        ];
        pairs
            .into_iter()
            .filter_map(|(k, v)| v.clone().map(|v| (k, v)))
            .collect()
    }
}

/// Parses `key=value` lines; `#` starts a comment.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            bail!("line {}: expected key=value, got {raw:?}", n + 1);
        };
        let key = k.trim().trim_start_matches("--").replace('_', "-");
        if !KEYS.contains(&key.as_str()) {
            bail!("line {}: unknown key {key:?}", n + 1);
        }
        out.insert(key, v.trim().to_string());
    }
    Ok(out)
}

/// Everything a run needs beyond its input paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub solver: SolverConfig,
    pub seed: u64,
    pub deterministic: bool,
    pub prob_maps: Option<PathBuf>,
    pub init_maps: Option<PathBuf>,
}

fn parse<T: std::str::FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>().map_err(|e| anyhow::anyhow!("{key}: cannot parse {v:?}: {e}"))
}

pub fn resolve(args: &SolverArgs) -> Result<Settings> {
    let mut map: BTreeMap<String, String> = match &args.config {
        Some(path) => parse_config(&read_text(path)?).with_context(|| format!("config file {}", path.display()))?,
        None => BTreeMap::new(),
    };
    for (k, v) in args.given() {
        map.insert(k.to_string(), v);
    }
    from_map(&map)
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

pub fn from_map(map: &BTreeMap<String, String>) -> Result<Settings> {
    let mut c = SolverConfig::default();
    let get = |k: &str| map.get(k).map(String::as_str);
    if let Some(v) = get("iterations") {
        c.iterations = parse("iterations", v)?;
    }
    if let Some(v) = get("radius") {
        c.radius = parse("radius", v)?;
    }
    if let Some(v) = get("sigma-k") {
        c.sigma_k = parse("sigma-k", v)?;
    }
    if let Some(v) = get("beta") {
        c.beta = parse("beta", v)?;
    }
    if let Some(v) = get("tol") {
        c.tol = parse("tol", v)?;
    }
    if let Some(v) = get("threshold") {
        c.threshold = parse("threshold", v)?;
    }
    if let Some(v) = get("chain-steps") {
        c.features.chain_steps = parse("chain-steps", v)?;
    }
    if let Some(v) = get("channels") {
        c.features.channels = v
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| s.parse::<ChannelKind>())
            .collect::<Result<_, _>>()?;
    }
    if let Some(v) = get("regression") {
        c.regression = match v {
            "per-frame" | "per_frame" => RegressionMode::PerFrame,
            "global" => RegressionMode::Global,
            _ => bail!("regression: expected per-frame or global, got {v:?}"),
        };
    }
    if let Some(v) = get("normalization") {
        c.normalization = match v {
            "per-frame" | "per_frame" => Normalization::PerFrame,
            "per-video" | "per_video" => Normalization::PerVideo,
            _ => bail!("normalization: expected per-frame or per-video, got {v:?}"),
        };
    }
    let deterministic = match get("deterministic").unwrap_or("on") {
        "on" | "true" | "1" => true,
        "off" | "false" | "0" => false,
        v => bail!("deterministic: expected on or off, got {v:?}"),
    };
    c.propagation = if deterministic {
        PropagationMode::Deterministic
    } else {
        PropagationMode::Fast
    };
    let seed: u64 = get("seed").map(|v| parse("seed", v)).transpose()?.unwrap_or(0);
    let init_sigma: Option<f64> = get("init-sigma").map(|v| parse("init-sigma", v)).transpose()?;
    c.init = match get("init").unwrap_or("gaussian") {
        "gaussian" => InitScheme::Gaussian { sigma: init_sigma },
        "uniform" => InitScheme::Uniform,
        "random" => InitScheme::Random { seed },
        "external" => InitScheme::External,
        v => bail!("init: expected gaussian, uniform, random or external, got {v:?}"),
    };
    let init_maps = get("init-maps").map(PathBuf::from);
    if c.init == InitScheme::External && init_maps.is_none() {
        bail!("init external needs --init-maps");
    }
    c.validate()?;
    Ok(Settings {
        solver: c,
        seed,
        deterministic,
        prob_maps: get("prob-maps").map(PathBuf::from),
        init_maps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_resolve() {
        let s = resolve(&SolverArgs::default()).unwrap();
        assert_eq!(s.solver, SolverConfig::default());
        assert!(s.deterministic);
        assert_eq!(s.seed, 0);
    }

    #[test]
    fn config_file_parsing() {
        let m = parse_config("# comment\niterations = 3\n\nsigma_k=1.5 # trailing\n--beta=2\n").unwrap();
        assert_eq!(m["iterations"], "3");
        assert_eq!(m["sigma-k"], "1.5");
        assert_eq!(m["beta"], "2");
        assert!(parse_config("nonsense").is_err());
        assert!(parse_config("colour=1").is_err());
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        fs::write(&path, "iterations=3\nbeta=2\nregression=global\n").unwrap();
        let args = SolverArgs {
            iterations: Some("9".into()),
            config: Some(path),
            ..Default::default()
        };
        let s = resolve(&args).unwrap();
        assert_eq!(s.solver.iterations, 9);
        assert_eq!(s.solver.beta, 2.0);
        assert_eq!(s.solver.regression, RegressionMode::Global);
        assert_eq!(s.solver.radius, 5);
    }

    #[test]
    fn enumerated_values() {
        let mut m = BTreeMap::new();
        m.insert("init".to_string(), "random".to_string());
        m.insert("seed".to_string(), "7".to_string());
        m.insert("deterministic".to_string(), "off".to_string());
        m.insert("channels".to_string(), "motion,color_chain".to_string());
        let s = from_map(&m).unwrap();
        assert_eq!(s.solver.init, InitScheme::Random { seed: 7 });
        assert_eq!(s.solver.propagation, PropagationMode::Fast);
        assert_eq!(s.solver.features.channels, vec![ChannelKind::Motion, ChannelKind::ColorChain]);
        m.insert("init".to_string(), "external".to_string());
        assert!(from_map(&m).is_err());
        m.insert("init".to_string(), "blob".to_string());
        assert!(from_map(&m).is_err());
    }

    #[test]
    fn invalid_values_rejected() {
        for (k, v) in [("threshold", "1.5"), ("iterations", "0"), ("beta", "x"), ("regression", "local")] {
            let mut m = BTreeMap::new();
            m.insert(k.to_string(), v.to_string());
            assert!(from_map(&m).is_err(), "{k}={v}");
        }
    }
}
