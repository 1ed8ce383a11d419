//! INI configuration for scenes and experiment grids.
//!
//! Scene file:
//!
//! ```ini
//! [radar]
//! f0 = 9.6e9
//! delta_f = 3e6
//! n_freq = 64
//! n_angle = 64
//! delta_theta = 8.726646259971648e-4
//!
//! ; any number of explicit scatterers
//! [scatterer]
//! p = 3
//! q = 5
//! re = 1.0
//! im = 0.0
//!
//! ; and/or seeded random ones; `extent` keeps them within ±extent cells of
//! ; the origin (wrapping), omit it to spread them over the whole grid
//! [random]
//! count = 5
//! extent = 6
//! seed = 42
//! ```
//!
//! Experiment file:
//!
//! ```ini
//! [experiment]
//! scene = scene.ini        ; or: input = echo.cisr
//! methods = zero-fill, nnm, ialm, dip
//! scenarios = pixel, column, compressed
//! ratios = 0.3, 0.5, 0.7
//! seeds = 0, 1, 2
//! noise_snr_db = 0, 30     ; optional; adds noisy variants of every scenario
//! output_dir = results
//! top_db = 20
//! center = true
//! artifacts = true
//!
//! [solver]                 ; low-rank solvers
//! max_iters = 10000
//! tol = 1e-5
//! tau_decay = 0.8
//! step = 1.0
//! rho = 1.1
//! ; delta, tau, tau_min, mu0 default to data-derived values
//!
//! [dip]
//! depth = 6
//! channels = 256, 128, 64, 64, 128, 256
//! skip_channels = 16
//! padding = reflect        ; or zero
//! instance_norm = false
//! max_iters = 10000
//! lr = 0.001
//! input_noise_std = 0.1
//! noise_channels = 16
//! early_stop = true
//! rel_improve = 0.01
//! patience = 3
//! check_every = 10
//! ```
//!
//! Relative paths resolve against the directory of the file that names them.
//! Unknown sections or keys are rejected.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use ini::{Ini, Properties};
use num_complex::Complex64;

use super::grid::Method;
use crate::dip::DipConfig;
use crate::error::{Error, Result};
use crate::lowrank::SolverConfig;
use crate::neural::Padding;
use crate::radar::{RadarParams, Scatterer, Scene};
use crate::sampling::MaskKind;

fn parse_ini(text: &str) -> Result<Ini> {
    Ini::load_from_str_noescape(text).map_err(|e| Error::Config(e.to_string()))
}

fn read_ini(path: &Path) -> Result<Ini> {
    let text = std::fs::read_to_string(path)?;
    parse_ini(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn check_sections(ini: &Ini, allowed: &[&str]) -> Result<()> {
    for name in ini.sections() {
        match name {
            None => {
                if ini.section(None::<String>).is_some_and(|p| !p.is_empty()) {
                    return Err(Error::Config("keys outside any section".into()));
                }
            }
            Some(n) if allowed.contains(&n) => {}
            Some(n) => return Err(Error::Config(format!("unknown section [{n}]"))),
        }
    }
    Ok(())
}

fn check_keys(props: &Properties, section: &str, allowed: &[&str]) -> Result<()> {
    for (k, _) in props.iter() {
        if !allowed.contains(&k) {
            return Err(Error::Config(format!("unknown key `{k}` in [{section}]")));
        }
    }
    Ok(())
}

fn parse_value<T: FromStr>(section: &str, key: &str, raw: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    raw.trim()
        .parse()
        .map_err(|e| Error::Config(format!("[{section}] {key} = {raw:?}: {e}")))
}

fn get<T: FromStr>(props: &Properties, section: &str, key: &str) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    props
        .get(key)
        .map(|raw| parse_value(section, key, raw))
        .transpose()
}

fn get_list<T: FromStr>(props: &Properties, section: &str, key: &str) -> Result<Option<Vec<T>>>
where
    T::Err: std::fmt::Display,
{
    props
        .get(key)
        .map(|raw| {
            raw.split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| parse_value(section, key, s))
                .collect()
        })
        .transpose()
}

fn require<T>(value: Option<T>, section: &str, key: &str) -> Result<T> {
    value.ok_or_else(|| Error::Config(format!("[{section}] is missing `{key}`")))
}

pub fn parse_scene(text: &str) -> Result<Scene> {
    let ini = parse_ini(text)?;
    check_sections(&ini, &["radar", "scatterer", "random"])?;
    let mut params = RadarParams::default();
    if let Some(p) = ini.section(Some("radar")) {
        check_keys(p, "radar", &["f0", "delta_f", "n_freq", "n_angle", "delta_theta", "c"])?;
        let s = "radar";
        params.f0 = get(p, s, "f0")?.unwrap_or(params.f0);
        params.delta_f = get(p, s, "delta_f")?.unwrap_or(params.delta_f);
        params.n_freq = get(p, s, "n_freq")?.unwrap_or(params.n_freq);
        params.n_angle = get(p, s, "n_angle")?.unwrap_or(params.n_angle);
        params.delta_theta = get(p, s, "delta_theta")?.unwrap_or(params.delta_theta);
        params.c = get(p, s, "c")?.unwrap_or(params.c);
    }
    params.validate()?;

    let mut scatterers = Vec::new();
    for p in ini.section_all(Some("scatterer")) {
        let s = "scatterer";
        check_keys(p, s, &["p", "q", "re", "im"])?;
        let alpha = Complex64::new(
            require(get(p, s, "re")?, s, "re")?,
            get(p, s, "im")?.unwrap_or(0.0),
        );
        scatterers.push(Scatterer::new(
            require(get(p, s, "p")?, s, "p")?,
            require(get(p, s, "q")?, s, "q")?,
            alpha,
        ));
    }
    for p in ini.section_all(Some("random")) {
        let s = "random";
        check_keys(p, s, &["count", "extent", "seed"])?;
        let count = require(get(p, s, "count")?, s, "count")?;
        let seed = get(p, s, "seed")?.unwrap_or(0);
        let random = match get::<usize>(p, s, "extent")? {
            Some(extent) => Scene::random_compact(params.clone(), count, extent, seed)?,
            None => Scene::random(params.clone(), count, seed)?,
        };
        scatterers.extend(random.scatterers);
    }
    if scatterers.is_empty() {
        return Err(Error::Config("scene has no scatterers".into()));
    }
    let scene = Scene::new(params, scatterers);
    scene.validate()?;
    Ok(scene)
}

pub fn load_scene(path: impl AsRef<Path>) -> Result<Scene> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    parse_scene(&text).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub enum DataSource {
    Scene(PathBuf),
    Matrix(PathBuf),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub source: DataSource,
    pub methods: Vec<Method>,
    pub scenarios: Vec<MaskKind>,
    pub ratios: Vec<f64>,
    pub seeds: Vec<u64>,
    pub noise_snr_db: Vec<f64>,
    pub output_dir: PathBuf,
    pub top_db: f64,
    pub center: bool,
    pub artifacts: bool,
    pub solver: SolverConfig,
    pub dip: DipConfig,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let empty = |what: &str| Err(Error::Config(format!("experiment needs at least one {what}")));
        if self.methods.is_empty() {
            return empty("method");
        }
        if self.scenarios.is_empty() {
            return empty("scenario");
        }
        if self.ratios.is_empty() {
            return empty("ratio");
        }
        if self.seeds.is_empty() {
            return empty("seed");
        }
        if let Some(r) = self.ratios.iter().find(|r| !(0.0..1.0).contains(*r)) {
            return Err(Error::Config(format!("ratio {r} is outside [0, 1)")));
        }
        if let Some(s) = self.noise_snr_db.iter().find(|s| s.is_nan()) {
            return Err(Error::Config(format!("invalid noise level {s}")));
        }
        if !(self.top_db.is_finite() && self.top_db > 0.0) {
            return Err(Error::Config("top_db must be positive".into()));
        }
        self.solver.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.dip.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }
}

fn parse_solver(p: &Properties) -> Result<SolverConfig> {
    let s = "solver";
    check_keys(
        p,
        s,
        &["delta", "max_iters", "tol", "tau", "tau_min", "tau_decay", "step", "mu0", "rho"],
    )?;
    let d = SolverConfig::default();
    Ok(SolverConfig {
        delta: get(p, s, "delta")?.or(d.delta),
        max_iters: get(p, s, "max_iters")?.unwrap_or(d.max_iters),
        tol: get(p, s, "tol")?.unwrap_or(d.tol),
        tau: get(p, s, "tau")?.or(d.tau),
        tau_min: get(p, s, "tau_min")?.or(d.tau_min),
        tau_decay: get(p, s, "tau_decay")?.unwrap_or(d.tau_decay),
        step: get(p, s, "step")?.unwrap_or(d.step),
        mu0: get(p, s, "mu0")?.or(d.mu0),
        rho: get(p, s, "rho")?.unwrap_or(d.rho),
    })
}

fn parse_padding(raw: &str) -> Result<Padding> {
    match raw.trim() {
        "reflect" => Ok(Padding::Reflect),
        "zero" => Ok(Padding::Zero),
        other => Err(Error::Config(format!("unknown padding `{other}`"))),
    }
}

pub(crate) fn parse_dip(p: &Properties) -> Result<DipConfig> {
    let s = "dip";
    check_keys(
        p,
        s,
        &[
            "depth",
            "channels",
            "skip_channels",
            "padding",
            "instance_norm",
            "max_iters",
            "lr",
            "input_noise_std",
            "noise_channels",
            "early_stop",
            "rel_improve",
            "patience",
            "check_every",
            "seed",
        ],
    )?;
    let mut cfg = DipConfig::default();
    if let Some(channels) = get_list(p, s, "channels")? {
        cfg.net.depth = channels.len();
        cfg.net.channels = channels;
    }
    if let Some(depth) = get(p, s, "depth")? {
        cfg.net.depth = depth;
    }
    cfg.net.skip_channels = get(p, s, "skip_channels")?.unwrap_or(cfg.net.skip_channels);
    if let Some(raw) = p.get("padding") {
        cfg.net.padding = parse_padding(raw)?;
    }
    cfg.net.instance_norm = get(p, s, "instance_norm")?.unwrap_or(cfg.net.instance_norm);
    cfg.max_iters = get(p, s, "max_iters")?.unwrap_or(cfg.max_iters);
    cfg.lr = get(p, s, "lr")?.unwrap_or(cfg.lr);
    cfg.input_noise_std = get(p, s, "input_noise_std")?.unwrap_or(cfg.input_noise_std);
    cfg.noise_channels = get(p, s, "noise_channels")?.unwrap_or(cfg.noise_channels);
    let es = &mut cfg.early_stop;
    es.enabled = get(p, s, "early_stop")?.unwrap_or(es.enabled);
    es.rel_improve = get(p, s, "rel_improve")?.unwrap_or(es.rel_improve);
    es.patience = get(p, s, "patience")?.unwrap_or(es.patience);
    es.check_every = get(p, s, "check_every")?.unwrap_or(es.check_every);
    cfg.seed = get(p, s, "seed")?.unwrap_or(cfg.seed);
    Ok(cfg)
}

/// Parses an experiment file; `base` anchors relative paths.
pub fn parse_experiment(text: &str, base: &Path) -> Result<ExperimentConfig> {
    let ini = parse_ini(text)?;
    check_sections(&ini, &["experiment", "solver", "dip"])?;
    let s = "experiment";
    let p = ini
        .section(Some(s))
        .ok_or_else(|| Error::Config("missing [experiment] section".into()))?;
    check_keys(
        p,
        s,
        &[
            "scene",
            "input",
            "methods",
            "scenarios",
            "ratios",
            "seeds",
            "noise_snr_db",
            "output_dir",
            "top_db",
            "center",
            "artifacts",
        ],
    )?;
    let resolve = |raw: &str| base.join(raw.trim());
    let source = match (p.get("scene"), p.get("input")) {
        (Some(scene), None) => DataSource::Scene(resolve(scene)),
        (None, Some(input)) => DataSource::Matrix(resolve(input)),
        _ => {
            return Err(Error::Config(
                "[experiment] needs exactly one of `scene` or `input`".into(),
            ))
        }
    };
    let cfg = ExperimentConfig {
        source,
        methods: require(get_list(p, s, "methods")?, s, "methods")?,
        scenarios: require(get_list(p, s, "scenarios")?, s, "scenarios")?,
        ratios: require(get_list(p, s, "ratios")?, s, "ratios")?,
        seeds: require(get_list(p, s, "seeds")?, s, "seeds")?,
        noise_snr_db: get_list(p, s, "noise_snr_db")?.unwrap_or_default(),
        output_dir: resolve(p.get("output_dir").unwrap_or("results")),
        top_db: get(p, s, "top_db")?.unwrap_or(20.0),
        center: get(p, s, "center")?.unwrap_or(false),
        artifacts: get(p, s, "artifacts")?.unwrap_or(true),
        solver: match ini.section(Some("solver")) {
            Some(sp) => parse_solver(sp)?,
            None => SolverConfig::default(),
        },
        dip: match ini.section(Some("dip")) {
            Some(dp) => parse_dip(dp)?,
            None => DipConfig::default(),
        },
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_experiment(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_experiment(&text, base).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Optional `[solver]` and `[dip]` overrides for single-command use.
pub fn load_method_config(path: impl AsRef<Path>) -> Result<(SolverConfig, DipConfig)> {
    let ini = read_ini(path.as_ref())?;
    check_sections(&ini, &["solver", "dip"])?;
    let solver = match ini.section(Some("solver")) {
        Some(p) => parse_solver(p)?,
        None => SolverConfig::default(),
    };
    let dip = match ini.section(Some("dip")) {
        Some(p) => parse_dip(p)?,
        None => DipConfig::default(),
    };
    solver.validate()?;
    dip.validate()?;
    Ok((solver, dip))
}
