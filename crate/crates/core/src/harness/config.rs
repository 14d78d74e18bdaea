//! Experiment configuration: flat `key = value` lines with `[lattice]`,
//! `[sigma]` and `[init]` sections. Lists are comma separated; `#` starts a comment.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::engine::{collar_width, grid_index, InitialCondition, Nonlinearity, NonlinearitySpec, SimulationPlan};
use crate::error::{Error, Result};
use crate::noise::{Lattice, RieszSpec};
use crate::observables::{Region, RegionKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ExperimentKind {
    NoiseValidate,
    VarianceLimit,
    Clt,
    Fclt,
    Tightness,
    Decay,
    Lemma31,
    Constants,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 8] = [
        ExperimentKind::NoiseValidate,
        ExperimentKind::VarianceLimit,
        ExperimentKind::Clt,
        ExperimentKind::Fclt,
        ExperimentKind::Tightness,
        ExperimentKind::Decay,
        ExperimentKind::Lemma31,
        ExperimentKind::Constants,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::NoiseValidate => "noise-validate",
            ExperimentKind::VarianceLimit => "variance-limit",
            ExperimentKind::Clt => "clt",
            ExperimentKind::Fclt => "fclt",
            ExperimentKind::Tightness => "tightness",
            ExperimentKind::Decay => "decay",
            ExperimentKind::Lemma31 => "lemma31",
            ExperimentKind::Constants => "constants",
        }
    }

    /// Whether the experiment runs the SPDE.
    pub fn simulates(&self) -> bool {
        !matches!(
            self,
            ExperimentKind::NoiseValidate | ExperimentKind::Lemma31 | ExperimentKind::Constants
        )
    }
}

impl std::fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::config("kind", format!("unknown experiment kind {s:?}")))
    }
}

/// Declarative initial condition, materialized on a lattice by [`InitSpec::build`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitSpec {
    Constant { value: f64 },
    Cosine { mean: f64, amplitude: f64, modes: u32 },
}

impl InitSpec {
    pub fn build(&self, lattice: Lattice) -> Result<InitialCondition> {
        match *self {
            InitSpec::Constant { value } => Ok(InitialCondition::Constant(value)),
            InitSpec::Cosine { mean, amplitude, modes } => InitialCondition::cosine(lattice, mean, amplitude, modes),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub spec: RieszSpec,
    pub lattice: Lattice,
    pub sigma: NonlinearitySpec,
    pub init: InitSpec,
    pub t_final: f64,
    pub dt: f64,
    pub record_times: Vec<f64>,
    pub region: RegionKind,
    pub r_list: Vec<f64>,
    pub n_replicas: usize,
    pub seed: u64,
    /// Width of the boundary collar excluded from interior windows.
    pub window_collar: f64,
    pub noise_slices: usize,
    /// Largest lag, in cells, of the noise covariance check.
    pub noise_max_lag: usize,
    pub kbeta_samples: usize,
    pub fclt_times: Vec<f64>,
    pub tightness_p: u32,
    pub tightness_max_lag: f64,
    pub decay_time: f64,
    pub decay_lags: usize,
    /// `|y|` values of the Gaussian moment check (placed on the first axis).
    pub lemma31_y: Vec<f64>,
    pub lemma31_points: usize,
    pub comparison_replicas: usize,
}

const TOP_KEYS: &[&str] = &[
    "kind",
    "d",
    "beta",
    "T",
    "dt",
    "record_times",
    "region",
    "R_list",
    "n_replicas",
    "seed",
    "window_collar",
    "noise_slices",
    "noise_max_lag",
    "kbeta_samples",
    "fclt_times",
    "tightness_p",
    "tightness_max_lag",
    "decay_time",
    "decay_lags",
    "lemma31_y",
    "lemma31_points",
    "comparison_replicas",
];
const SECTION_KEYS: &[(&str, &[&str])] = &[
    ("lattice", &["n", "L"]),
    ("sigma", &["kind", "a", "b", "c", "lipschitz"]),
    ("init", &["kind", "value", "mean", "amplitude", "modes"]),
];

/// Parsed `key = value` pairs keyed by `section.key` (top-level keys have no prefix).
#[derive(Debug, Default)]
struct Entries {
    map: BTreeMap<String, String>,
}

impl Entries {
    fn parse(text: &str) -> Result<Self> {
        let mut section = String::new();
        let mut map = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                let name = name.trim();
                if !SECTION_KEYS.iter().any(|(s, _)| *s == name) {
                    return Err(Error::config(name, format!("unknown section on line {}", lineno + 1)));
                }
                section = name.to_string();
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::config("", format!("line {}: expected `key = value`, got {line:?}", lineno + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            let full = Self::canonical(&section, key)?;
            if map.insert(full.clone(), value.to_string()).is_some() {
                return Err(Error::config(&full, "duplicate key"));
            }
        }
        Ok(Self { map })
    }

    /// Resolves top-level aliases such as `n`, `L`, `sigma` and `init`.
    fn canonical(section: &str, key: &str) -> Result<String> {
        if section.is_empty() {
            if TOP_KEYS.contains(&key) {
                return Ok(key.to_string());
            }
            match key {
                "n" | "L" => return Ok(format!("lattice.{key}")),
                "sigma" | "init" => return Ok(format!("{key}.kind")),
                _ => {}
            }
            if let Some((s, k)) = key.split_once('.') {
                return Self::canonical(s, k);
            }
            return Err(Error::config(key, "unknown key"));
        }
        let allowed = SECTION_KEYS
            .iter()
            .find(|(s, _)| *s == section)
            .map(|(_, keys)| *keys)
            .ok_or_else(|| Error::config(section, "unknown section"))?;
        if allowed.contains(&key) {
            Ok(format!("{section}.{key}"))
        } else {
            Err(Error::config(&format!("{section}.{key}"), "unknown key"))
        }
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(String::as_str)
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.raw(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|_| Error::config(key, format!("cannot parse {v:?}")))
            })
            .transpose()
    }

    fn require<T: FromStr>(&self, key: &str) -> Result<T> {
        self.get(key)?.ok_or_else(|| Error::config(key, "missing required key"))
    }

    fn or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    fn list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        self.raw(key)
            .map(|v| {
                v.trim_matches(|c| c == '[' || c == ']')
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| {
                        s.parse::<f64>()
                            .map_err(|_| Error::config(key, format!("cannot parse list entry {s:?}")))
                    })
                    .collect()
            })
            .transpose()
    }
}

fn parse_sigma(e: &Entries) -> Result<NonlinearitySpec> {
    let kind: String = e.require("sigma.kind")?;
    let nl = match kind.as_str() {
        "linear" => Nonlinearity::Linear,
        "affine" => Nonlinearity::Affine {
            a: e.require("sigma.a")?,
            b: e.require("sigma.b")?,
        },
        "sine-affine" => Nonlinearity::SineAffine {
            a: e.require("sigma.a")?,
            b: e.require("sigma.b")?,
            c: e.require("sigma.c")?,
        },
        "clipped-linear" => Nonlinearity::ClippedLinear,
        other => return Err(Error::config("sigma.kind", format!("unknown nonlinearity {other:?}"))),
    };
    let spec = match e.get::<f64>("sigma.lipschitz")? {
        Some(l) => NonlinearitySpec::with_lipschitz(nl, l),
        None => NonlinearitySpec::new(nl),
    };
    spec.map_err(|err| Error::config("sigma", err.to_string()))
}

fn parse_init(e: &Entries) -> Result<InitSpec> {
    let kind: String = e.or("init.kind", "constant".to_string())?;
    match kind.as_str() {
        "constant" => Ok(InitSpec::Constant {
            value: e.or("init.value", 1.0)?,
        }),
        "cosine" => Ok(InitSpec::Cosine {
            mean: e.require("init.mean")?,
            amplitude: e.require("init.amplitude")?,
            modes: e.require("init.modes")?,
        }),
        other => Err(Error::config("init.kind", format!("unknown initial condition {other:?}"))),
    }
}

fn on_grid(t: f64, dt: f64) -> bool {
    grid_index(t, dt).is_some()
}

/// Largest `dt <= h^2/4` for which every time in `times` is a whole number of steps.
pub fn default_dt(h: f64, t_final: f64, times: &[f64]) -> Result<f64> {
    let cap = h * h / 4.0;
    if t_final == 0.0 {
        return Ok(cap);
    }
    let start = (t_final / cap * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    (start..start * 1000)
        .map(|k| t_final / k as f64)
        .find(|&dt| times.iter().all(|&t| on_grid(t, dt)))
        .ok_or_else(|| Error::config("dt", "no step size divides all requested times; set dt explicitly"))
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let e = Entries::parse(text)?;
        let kind = e.or("kind", ExperimentKind::Clt)?;
        let d: usize = e.require("d")?;
        let beta: f64 = e.require("beta")?;
        let spec = RieszSpec::new(d, beta).map_err(|err| Error::config("beta", err.to_string()))?;
        let n: usize = e.require("lattice.n")?;
        let half: f64 = e.require("lattice.L")?;
        let lattice = Lattice::new(d, n, half).map_err(|err| Error::config("lattice", err.to_string()))?;
        let t_final: f64 = e.require("T")?;
        if !(t_final >= 0.0 && t_final.is_finite()) {
            return Err(Error::config("T", format!("T must be nonnegative, got {t_final}")));
        }
        let record_times = e.list("record_times")?.unwrap_or_else(|| vec![t_final]);
        let tightness_max_lag = e.or("tightness_max_lag", t_final.min(0.1))?;
        let fclt_times = e.list("fclt_times")?.unwrap_or_else(|| vec![0.4 * t_final, 0.8 * t_final]);
        let decay_time = e.or("decay_time", t_final)?;
        let dt = match e.get::<f64>("dt")? {
            Some(dt) => dt,
            None => {
                let mut times = record_times.clone();
                times.extend(&fclt_times);
                times.push(decay_time);
                times.push(t_final - tightness_max_lag);
                default_dt(lattice.spacing(), t_final, &times)?
            }
        };
        let config = Self {
            kind,
            spec,
            lattice,
            sigma: parse_sigma(&e)?,
            init: parse_init(&e)?,
            t_final,
            dt,
            record_times,
            region: e.or("region", RegionKind::Ball)?,
            r_list: e.list("R_list")?.unwrap_or_default(),
            n_replicas: e.or("n_replicas", 1000)?,
            seed: e.or("seed", 0)?,
            window_collar: e.or("window_collar", collar_width(t_final))?,
            noise_slices: e.or("noise_slices", 10_000)?,
            noise_max_lag: e.or("noise_max_lag", 32)?,
            kbeta_samples: e.or("kbeta_samples", 1_000_000)?,
            fclt_times,
            tightness_p: e.or("tightness_p", 2)?,
            tightness_max_lag,
            decay_time,
            decay_lags: e.or("decay_lags", 8)?,
            lemma31_y: e.list("lemma31_y")?.unwrap_or_else(|| vec![1.0]),
            lemma31_points: e.or("lemma31_points", 121)?,
            comparison_replicas: e.or("comparison_replicas", 20)?,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.r_list.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
            return Err(Error::config("R_list", format!("radii must be positive, got {:?}", self.r_list)));
        }
        if let Some(r_max) = self.r_list.iter().cloned().reduce(f64::max) {
            let collar = collar_width(self.t_final);
            let region = Region::new(self.region, r_max, vec![0.0; self.spec.d()])?;
            if let Err(Error::Margin { required, available }) = region.check_margin(&self.lattice, collar) {
                return Err(Error::config(
                    "L",
                    format!("L={available} < R_max+6*sqrt(T)={required}"),
                ));
            }
        }
        if self.n_replicas == 0 {
            return Err(Error::config("n_replicas", "must be positive"));
        }
        if !(self.window_collar >= 0.0 && self.window_collar < self.lattice.half_extent()) {
            return Err(Error::config(
                "window_collar",
                format!("window_collar={} must lie in [0, L={})", self.window_collar, self.lattice.half_extent()),
            ));
        }
        if self.tightness_p != 2 && self.tightness_p != 4 {
            return Err(Error::config("tightness_p", format!("p must be 2 or 4, got {}", self.tightness_p)));
        }
        if self.lemma31_points < 2 {
            return Err(Error::config("lemma31_points", "need at least two grid points"));
        }
        self.init.build(self.lattice).map_err(|e| Error::config("init", e.to_string()))?;
        // Off-grid times surface as config errors from the plan.
        SimulationPlan::new(self.t_final, self.dt, &self.record_times, Vec::new())?;
        let check = |key: &str, t: f64| -> Result<()> {
            if t < 0.0 || t > self.t_final || !on_grid(t, self.dt) {
                return Err(Error::config(key, format!("t={t} must be a step multiple in [0, T={}]", self.t_final)));
            }
            Ok(())
        };
        if self.kind.simulates() {
            let increasing = self.fclt_times.windows(2).all(|w| w[0] < w[1]);
            if self.fclt_times.len() < 2 || !increasing || self.fclt_times[0] <= 0.0 {
                return Err(Error::config("fclt_times", "need at least two strictly increasing positive times"));
            }
            for &t in &self.fclt_times {
                check("fclt_times", t)?;
            }
            check("decay_time", self.decay_time)?;
            check("tightness_max_lag", self.t_final - self.tightness_max_lag)?;
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_replicas(mut self, n: usize) -> Result<Self> {
        self.n_replicas = n;
        self.validate()?;
        Ok(self)
    }

    /// Canonical text form with all defaults applied; parsing it gives back `self`.
    pub fn echo(&self) -> String {
        let list = |v: &[f64]| v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(", ");
        let mut s = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        line("kind", self.kind.name().into());
        line("d", self.spec.d().to_string());
        line("beta", format!("{}", self.spec.beta()));
        line("T", format!("{}", self.t_final));
        line("dt", format!("{}", self.dt));
        line("record_times", list(&self.record_times));
        line("region", self.region.name().into());
        line("R_list", list(&self.r_list));
        line("n_replicas", self.n_replicas.to_string());
        line("seed", self.seed.to_string());
        line("window_collar", format!("{}", self.window_collar));
        line("noise_slices", self.noise_slices.to_string());
        line("noise_max_lag", self.noise_max_lag.to_string());
        line("kbeta_samples", self.kbeta_samples.to_string());
        line("fclt_times", list(&self.fclt_times));
        line("tightness_p", self.tightness_p.to_string());
        line("tightness_max_lag", format!("{}", self.tightness_max_lag));
        line("decay_time", format!("{}", self.decay_time));
        line("decay_lags", self.decay_lags.to_string());
        line("lemma31_y", list(&self.lemma31_y));
        line("lemma31_points", self.lemma31_points.to_string());
        line("comparison_replicas", self.comparison_replicas.to_string());
        s.push_str("\n[lattice]\n");
        let _ = writeln!(s, "n = {}", self.lattice.n());
        let _ = writeln!(s, "L = {}", self.lattice.half_extent());
        s.push_str("\n[sigma]\n");
        let kind = self.sigma.kind();
        let _ = writeln!(s, "kind = {}", kind.name());
        match kind {
            Nonlinearity::Affine { a, b } => {
                let _ = writeln!(s, "a = {a}\nb = {b}");
            }
            Nonlinearity::SineAffine { a, b, c } => {
                let _ = writeln!(s, "a = {a}\nb = {b}\nc = {c}");
            }
            Nonlinearity::Linear | Nonlinearity::ClippedLinear => {}
        }
        let _ = writeln!(s, "lipschitz = {}", self.sigma.lipschitz());
        s.push_str("\n[init]\n");
        match self.init {
            InitSpec::Constant { value } => {
                let _ = writeln!(s, "kind = constant\nvalue = {value}");
            }
            InitSpec::Cosine { mean, amplitude, modes } => {
                let _ = writeln!(s, "kind = cosine\nmean = {mean}\namplitude = {amplitude}\nmodes = {modes}");
            }
        }
        s
    }

    /// SHA-256 of [`ExperimentConfig::echo`], hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.echo().as_bytes()))
    }

    pub fn regions(&self) -> Result<Vec<Region>> {
        self.r_list
            .iter()
            .map(|&r| Region::new(self.region, r, vec![0.0; self.spec.d()]))
            .collect()
    }
}
