//! Run configuration: flat `key = value` files overridden by flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use fibertwist::expr;
use fibertwist::invert::{Mode, ReconstructOptions};
use fibertwist::{io, CoefficientProfile, Grid, Interpolation, ModelParams, SolverOptions};

/// Flags shared by the solving commands. Each mirrors a config key.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Config file of `key = value` lines; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Slow channel speed, 0 < c < 1.
    #[arg(long = "c", value_name = "EXPR")]
    pub c: Option<String>,
    /// Half observation time (fiber length probed).
    #[arg(long = "Z", value_name = "EXPR")]
    pub z: Option<String>,
    /// Grid subdivisions of [0, Z].
    #[arg(long = "N")]
    pub n: Option<String>,
    /// Twist: an expression in z, or a profile CSV path.
    #[arg(long)]
    pub beta: Option<String>,
    /// Initial guess for the reconstruction.
    #[arg(long)]
    pub beta0: Option<String>,
    /// A priori bound on the squared L2 norm of the twist.
    #[arg(long = "K", value_name = "EXPR")]
    pub k: Option<String>,
    #[arg(long)]
    pub tol: Option<String>,
    #[arg(long)]
    pub max_iter: Option<String>,
    /// global | stepped
    #[arg(long)]
    pub mode: Option<String>,
    /// linear | cubic
    #[arg(long)]
    pub interpolation: Option<String>,
    /// Generate data on a grid this many times finer.
    #[arg(long)]
    pub refine_data: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Twist source: expression text or sampled profile.
#[derive(Debug, Clone)]
pub enum BetaSource {
    Expr(String),
    File(PathBuf),
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub c: f64,
    pub z: f64,
    pub n: usize,
    pub beta: Option<BetaSource>,
    pub beta0: String,
    pub k: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub mode: Mode,
    pub interpolation: Interpolation,
    pub refine_data: usize,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            c: 0.5,
            z: std::f64::consts::FRAC_PI_2,
            n: 32,
            beta: None,
            beta0: "z".into(),
            k: 1.0,
            tol: 1e-8,
            max_iter: 200,
            mode: Mode::GlobalIteration,
            interpolation: Interpolation::Cubic,
            refine_data: 1,
            out: PathBuf::from("."),
        }
    }
}

const KEYS: &[&str] =
    &["c", "Z", "N", "beta", "beta0", "K", "tol", "max_iter", "mode", "interpolation", "refine_data", "out"];

/// Parse `key = value` lines; `#` starts a comment.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .with_context(|| format!("line {}: expected `key = value`", lineno + 1))?;
        let key = key.trim().replace('-', "_");
        if !KEYS.contains(&key.as_str()) {
            bail!("line {}: unknown key `{key}`", lineno + 1);
        }
        map.insert(key, value.trim().to_string());
    }
    Ok(map)
}

/// Numbers may be written as constant expressions such as `pi/2`.
fn number(key: &str, value: &str) -> Result<f64> {
    let e = expr::parse(value).with_context(|| format!("{key}: cannot parse `{value}`"))?;
    let a = e.eval(0.0).with_context(|| format!("{key}: cannot evaluate `{value}`"))?;
    let b = e.eval(1.0).with_context(|| format!("{key}: cannot evaluate `{value}`"))?;
    if a != b {
        bail!("{key}: `{value}` must be a constant");
    }
    Ok(a)
}

fn count(key: &str, value: &str) -> Result<usize> {
    value.trim().parse().with_context(|| format!("{key}: `{value}` is not a non-negative integer"))
}

impl RunConfig {
    /// Defaults, then the config file, then flags.
    pub fn load(args: &RunArgs) -> Result<RunConfig> {
        let mut map = match &args.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading config {}", path.display()))?;
                parse_config_text(&text).with_context(|| format!("in {}", path.display()))?
            }
            None => BTreeMap::new(),
        };
        let flags = [
            ("c", &args.c),
            ("Z", &args.z),
            ("N", &args.n),
            ("beta", &args.beta),
            ("beta0", &args.beta0),
            ("K", &args.k),
            ("tol", &args.tol),
            ("max_iter", &args.max_iter),
            ("mode", &args.mode),
            ("interpolation", &args.interpolation),
            ("refine_data", &args.refine_data),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                map.insert(key.to_string(), v.clone());
            }
        }
        if let Some(out) = &args.out {
            map.insert("out".into(), out.display().to_string());
        }
        let base = args.config.as_deref().and_then(Path::parent).map(Path::to_path_buf);
        RunConfig::from_map(&map, base.as_deref())
    }

    /// Relative profile paths in a config file resolve against `base`.
    pub fn from_map(map: &BTreeMap<String, String>, base: Option<&Path>) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        for (key, value) in map {
            match key.as_str() {
                "c" => cfg.c = number(key, value)?,
                "Z" => cfg.z = number(key, value)?,
                "N" => cfg.n = count(key, value)?,
                "beta" => cfg.beta = Some(beta_source(value, base)),
                "beta0" => cfg.beta0 = value.clone(),
                "K" => cfg.k = number(key, value)?,
                "tol" => cfg.tol = number(key, value)?,
                "max_iter" => cfg.max_iter = count(key, value)?,
                "mode" => cfg.mode = value.parse().map_err(anyhow::Error::msg)?,
                "interpolation" => cfg.interpolation = value.parse().map_err(anyhow::Error::msg)?,
                "refine_data" => cfg.refine_data = count(key, value)?,
                "out" => cfg.out = PathBuf::from(value),
                other => bail!("unknown key `{other}`"),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        ModelParams::new(self.c, self.z)?;
        if self.n < 2 {
            bail!("N = {} is too small (need at least 2)", self.n);
        }
        if !(self.tol > 0.0) {
            bail!("tol = {} must be positive", self.tol);
        }
        if self.max_iter == 0 || self.refine_data == 0 {
            bail!("max_iter and refine_data must be at least 1");
        }
        if !(self.k > 0.0) {
            bail!("K = {} must be positive", self.k);
        }
        expr::parse(&self.beta0).with_context(|| format!("beta0: cannot parse `{}`", self.beta0))?;
        if let Some(BetaSource::Expr(text)) = &self.beta {
            expr::parse(text).with_context(|| format!("beta: cannot parse `{text}`"))?;
        }
        Ok(())
    }

    pub fn params(&self) -> ModelParams {
        ModelParams::new(self.c, self.z).expect("validated")
    }

    pub fn grid(&self) -> Grid {
        Grid::new(self.params(), self.n).expect("validated")
    }

    pub fn solver(&self) -> SolverOptions {
        SolverOptions::with_interpolation(self.interpolation)
    }

    pub fn reconstruct_options(&self) -> ReconstructOptions {
        ReconstructOptions {
            mode: self.mode,
            tol: self.tol,
            max_iter: self.max_iter,
            k_bound: self.k,
            solver: self.solver(),
        }
    }

    /// The twist on `[0, Z]` at spacing `h`, if one was configured.
    pub fn beta_profile(&self, h: f64) -> Result<Option<CoefficientProfile>> {
        let Some(source) = &self.beta else { return Ok(None) };
        let profile = match source {
            BetaSource::Expr(text) => CoefficientProfile::from_expr(text, 0.0, self.z, h)
                .with_context(|| format!("beta = `{text}` on [0, {}]", self.z))?,
            BetaSource::File(path) => {
                let file = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
                let p = io::read_profile(file).with_context(|| format!("reading {}", path.display()))?;
                let expected = (self.z / h).round() as usize + 1;
                if p.len() != expected || (p.h() - h).abs() > 1e-9 * h || p.z0() != 0.0 {
                    bail!(
                        "{}: profile has {} samples at spacing {}, grid needs {expected} at {h} from z = 0",
                        path.display(),
                        p.len(),
                        p.h()
                    );
                }
                p
            }
        };
        Ok(Some(profile))
    }

    /// Initial guess on the sensing columns.
    pub fn beta0_profile(&self, grid: &Grid) -> Result<CoefficientProfile> {
        let y = grid.sensing_columns() as f64 * grid.h();
        CoefficientProfile::from_expr(&self.beta0, 0.0, y, grid.h())
            .with_context(|| format!("beta0 = `{}`", self.beta0))
    }
}

fn beta_source(value: &str, base: Option<&Path>) -> BetaSource {
    let looks_like_file = value.ends_with(".csv");
    if looks_like_file {
        let path = PathBuf::from(value);
        let path = match base {
            Some(b) if path.is_relative() => b.join(path),
            _ => path,
        };
        BetaSource::File(path)
    } else {
        BetaSource::Expr(value.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comments_blank_lines_and_dashes() {
        let m = parse_config_text("# example 1\nc = 0.5\n\nZ = pi/2  # half time\nmax-iter=40\n").unwrap();
        assert_eq!(m["c"], "0.5");
        assert_eq!(m["Z"], "pi/2");
        assert_eq!(m["max_iter"], "40");
        let cfg = RunConfig::from_map(&m, None).unwrap();
        assert_eq!(cfg.z, std::f64::consts::FRAC_PI_2);
        assert_eq!(cfg.max_iter, 40);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(parse_config_text("c 0.5\n").is_err());
        assert!(parse_config_text("speed = 1\n").is_err());
        let bad = |k: &str, v: &str| {
            let m = BTreeMap::from([(k.to_string(), v.to_string())]);
            RunConfig::from_map(&m, None).is_err()
        };
        assert!(bad("c", "1.5"));
        assert!(bad("N", "-3"));
        assert!(bad("tol", "0"));
        assert!(bad("mode", "sideways"));
        assert!(bad("c", "z/2"));
        assert!(bad("beta", "sin(z"));
    }

    #[test]
    fn csv_values_are_profile_paths() {
        let m = BTreeMap::from([("beta".to_string(), "b.csv".to_string())]);
        let cfg = RunConfig::from_map(&m, Some(Path::new("/data"))).unwrap();
        assert!(matches!(cfg.beta, Some(BetaSource::File(p)) if p == Path::new("/data/b.csv")));
    }
}
