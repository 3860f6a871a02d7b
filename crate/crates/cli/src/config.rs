//! Flat `key = value` run configuration.
//!
//! One assignment per line; `#` starts a comment; keys may be written with
//! `_` or `-`. Hyperparameter values may be comma-separated lists, which
//! `grid` expands into a cartesian product and `bench` rejects.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodId {
    HideglLAccurate,
    HideglLApprox,
    HideglAAccurate,
    HideglAApprox,
    Lgc,
    AgrGauss,
    AgrLae,
}

impl MethodId {
    pub const ALL: [MethodId; 7] = [
        MethodId::HideglLAccurate,
        MethodId::HideglLApprox,
        MethodId::HideglAAccurate,
        MethodId::HideglAApprox,
        MethodId::Lgc,
        MethodId::AgrGauss,
        MethodId::AgrLae,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MethodId::HideglLAccurate => "hidegl-l-accurate",
            MethodId::HideglLApprox => "hidegl-l-approx",
            MethodId::HideglAAccurate => "hidegl-a-accurate",
            MethodId::HideglAApprox => "hidegl-a-approx",
            MethodId::Lgc => "lgc",
            MethodId::AgrGauss => "agr-gauss",
            MethodId::AgrLae => "agr-lae",
        }
    }

    pub fn is_hidegl(self) -> bool {
        matches!(
            self,
            MethodId::HideglLAccurate | MethodId::HideglLApprox | MethodId::HideglAAccurate | MethodId::HideglAApprox
        )
    }

    /// Hyperparameter keys this method reads.
    pub fn keys(self) -> &'static [&'static str] {
        const KMEANS: [&str; 2] = ["kmeans_restarts", "kmeans_iters"];
        match self {
            MethodId::HideglLAccurate | MethodId::HideglLApprox => &[
                "k",
                "sigma",
                "lambda1",
                "lambda2",
                "alpha",
                "eta",
                "max_outer_iters",
                "hdp_tol",
                "cg_tol",
                "cg_max_iters",
                KMEANS[0],
                KMEANS[1],
            ],
            MethodId::HideglAAccurate | MethodId::HideglAApprox => &[
                "k",
                "sigma",
                "lambda1",
                "lambda2",
                "alpha",
                "eta",
                "max_outer_iters",
                "hdp_tol",
                KMEANS[0],
                KMEANS[1],
            ],
            MethodId::Lgc => &["knn", "sigma", "mu"],
            MethodId::AgrGauss => &["k", "s_hat", "bandwidth", "gamma", KMEANS[0], KMEANS[1]],
            MethodId::AgrLae => &["k", "s_hat", "gamma", "lae_max_iters", "lae_tol", KMEANS[0], KMEANS[1]],
        }
    }
}

impl fmt::Display for MethodId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MethodId {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        MethodId::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = MethodId::ALL.iter().map(|m| m.name()).collect();
                anyhow!("unknown method {s:?}; expected one of {}", names.join(", "))
            })
    }
}

/// Where the samples come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetSpec {
    ThreeMoon {
        n_per_class: usize,
        ambient_dim: usize,
        noise_sd: f64,
        seed: u64,
    },
    /// LIBSVM file, or CSV when the extension is `.csv`.
    Path(PathBuf),
}

impl DatasetSpec {
    pub fn describe(&self) -> String {
        match self {
            DatasetSpec::ThreeMoon {
                n_per_class,
                ambient_dim,
                noise_sd,
                seed,
            } => format!("threemoon(n_per_class={n_per_class}, dim={ambient_dim}, noise_sd={noise_sd}, seed={seed})"),
            DatasetSpec::Path(p) => p.display().to_string(),
        }
    }
}

/// Every tunable scalar. Which ones a run reads depends on the method.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub k: usize,
    pub sigma: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub alpha: f64,
    pub eta: f64,
    pub max_outer_iters: usize,
    pub hdp_tol: f64,
    pub cg_tol: f64,
    pub cg_max_iters: usize,
    pub kmeans_restarts: usize,
    pub kmeans_iters: usize,
    pub knn: usize,
    pub mu: f64,
    pub s_hat: usize,
    pub bandwidth: f64,
    pub gamma: f64,
    pub lae_max_iters: usize,
    pub lae_tol: f64,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            k: 200,
            sigma: 0.3,
            lambda1: 1.0,
            lambda2: 0.01,
            alpha: 0.5,
            eta: 0.1,
            max_outer_iters: 50,
            hdp_tol: 1e-4,
            cg_tol: 1e-8,
            cg_max_iters: 1000,
            kmeans_restarts: 3,
            kmeans_iters: 100,
            knn: 10,
            mu: 0.01,
            s_hat: 3,
            bandwidth: 1.0,
            gamma: 0.01,
            lae_max_iters: 500,
            lae_tol: 1e-10,
        }
    }
}

/// Keys that hold a hyperparameter, in the order grids are enumerated.
pub const PARAM_KEYS: [&str; 19] = [
    "k",
    "sigma",
    "lambda1",
    "lambda2",
    "alpha",
    "eta",
    "max_outer_iters",
    "hdp_tol",
    "cg_tol",
    "cg_max_iters",
    "kmeans_restarts",
    "kmeans_iters",
    "knn",
    "mu",
    "s_hat",
    "bandwidth",
    "gamma",
    "lae_max_iters",
    "lae_tol",
];

/// Keys describing the run rather than the method.
pub const RUN_KEYS: [&str; 11] = [
    "dataset",
    "n_per_class",
    "ambient_dim",
    "noise_sd",
    "data_seed",
    "method",
    "labels",
    "repeats",
    "seed",
    "output",
    "csv_output",
];

pub const CACHE_KEY: &str = "cache_dir";

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    v.parse::<T>().map_err(|e| anyhow!("{key}: cannot parse {v:?}: {e}"))
}

impl Params {
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "k" => self.k = parse_num(key, v)?,
            "sigma" => self.sigma = parse_num(key, v)?,
            "lambda1" => self.lambda1 = parse_num(key, v)?,
            "lambda2" => self.lambda2 = parse_num(key, v)?,
            "alpha" => self.alpha = parse_num(key, v)?,
            "eta" => self.eta = parse_num(key, v)?,
            "max_outer_iters" => self.max_outer_iters = parse_num(key, v)?,
            "hdp_tol" => self.hdp_tol = parse_num(key, v)?,
            "cg_tol" => self.cg_tol = parse_num(key, v)?,
            "cg_max_iters" => self.cg_max_iters = parse_num(key, v)?,
            "kmeans_restarts" => self.kmeans_restarts = parse_num(key, v)?,
            "kmeans_iters" => self.kmeans_iters = parse_num(key, v)?,
            "knn" => self.knn = parse_num(key, v)?,
            "mu" => self.mu = parse_num(key, v)?,
            "s_hat" => self.s_hat = parse_num(key, v)?,
            "bandwidth" => self.bandwidth = parse_num(key, v)?,
            "gamma" => self.gamma = parse_num(key, v)?,
            "lae_max_iters" => self.lae_max_iters = parse_num(key, v)?,
            "lae_tol" => self.lae_tol = parse_num(key, v)?,
            _ => bail!("unknown hyperparameter {key:?}"),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        Some(match key {
            "k" => self.k as f64,
            "sigma" => self.sigma,
            "lambda1" => self.lambda1,
            "lambda2" => self.lambda2,
            "alpha" => self.alpha,
            "eta" => self.eta,
            "max_outer_iters" => self.max_outer_iters as f64,
            "hdp_tol" => self.hdp_tol,
            "cg_tol" => self.cg_tol,
            "cg_max_iters" => self.cg_max_iters as f64,
            "kmeans_restarts" => self.kmeans_restarts as f64,
            "kmeans_iters" => self.kmeans_iters as f64,
            "knn" => self.knn as f64,
            "mu" => self.mu,
            "s_hat" => self.s_hat as f64,
            "bandwidth" => self.bandwidth,
            "gamma" => self.gamma,
            "lae_max_iters" => self.lae_max_iters as f64,
            "lae_tol" => self.lae_tol,
            _ => return None,
        })
    }

    /// The hyperparameters `method` reads, keyed by name.
    pub fn resolved(&self, method: MethodId) -> BTreeMap<String, f64> {
        method
            .keys()
            .iter()
            .map(|&k| (k.to_string(), self.get(k).expect("method keys are valid")))
            .collect()
    }

    /// Domain checks for the keys `method` reads.
    pub fn validate(&self, method: MethodId) -> Result<()> {
        let positive = |key: &str| -> Result<()> {
            let v = self.get(key).expect("valid key");
            if !(v > 0.0) || !v.is_finite() {
                bail!("{key} must be positive, got {v}");
            }
            Ok(())
        };
        for &key in method.keys() {
            match key {
                "alpha" => {
                    if !(self.alpha > 0.0 && self.alpha < 1.0) {
                        bail!("alpha must lie in (0, 1), got {}", self.alpha);
                    }
                }
                "eta" | "lambda1" => {
                    let v = self.get(key).expect("valid key");
                    if !(v >= 0.0) || !v.is_finite() {
                        bail!("{key} must be >= 0, got {v}");
                    }
                }
                "lae_tol" => {
                    if !(self.lae_tol >= 0.0) {
                        bail!("lae_tol must be >= 0, got {}", self.lae_tol);
                    }
                }
                "max_outer_iters" | "kmeans_iters" | "lae_max_iters" => {}
                _ => positive(key)?,
            }
        }
        if method.keys().contains(&"s_hat") && self.s_hat > self.k {
            bail!("s_hat = {} exceeds the number of anchors k = {}", self.s_hat, self.k);
        }
        Ok(())
    }
}

/// Parsed key-value file: every key maps to its comma-separated values.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    pub entries: BTreeMap<String, Vec<String>>,
}

pub fn normalize_key(key: &str) -> String {
    key.trim().replace('-', "_")
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected `key = value`, got {raw:?}", lineno + 1))?;
            let key = normalize_key(key);
            if !is_known_key(&key) {
                bail!("line {}: unknown key {key:?}", lineno + 1);
            }
            let values = split_values(value);
            if values.is_empty() {
                bail!("line {}: {key} has no value", lineno + 1);
            }
            if entries.insert(key.clone(), values).is_some() {
                bail!("line {}: {key} is set twice", lineno + 1);
            }
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    /// Sets `key` from a command-line flag, replacing any file value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = normalize_key(key);
        if !is_known_key(&key) {
            bail!("unknown key {key:?}");
        }
        let values = split_values(value);
        if values.is_empty() {
            bail!("{key} has no value");
        }
        self.entries.insert(key, values);
        Ok(())
    }

    fn single(&self, key: &str) -> Result<Option<&str>> {
        match self.entries.get(key).map(Vec::as_slice) {
            None => Ok(None),
            Some([v]) => Ok(Some(v.as_str())),
            Some(vs) => bail!("{key} takes a single value, got {}", vs.join(",")),
        }
    }

    pub fn cache_dir(&self) -> Result<Option<PathBuf>> {
        Ok(self.single(CACHE_KEY)?.map(PathBuf::from))
    }

    /// Hyperparameter keys with more than one value, in enumeration order.
    pub fn grid_axes(&self) -> Vec<(&'static str, &[String])> {
        PARAM_KEYS
            .iter()
            .filter_map(|&k| self.entries.get(k).filter(|v| v.len() > 1).map(|v| (k, v.as_slice())))
            .collect()
    }

    /// Builds the run with every hyperparameter axis pinned to one value.
    pub fn to_run_config(&self) -> Result<RunConfig> {
        if let Some((key, values)) = self.grid_axes().first() {
            bail!("{key} has {} values; use `grid` to search over lists", values.len());
        }
        self.build(&BTreeMap::new())
    }

    /// Cartesian product of the grid axes, first axis varying slowest.
    pub fn expand_grid(&self) -> Result<Vec<RunConfig>> {
        let axes = self.grid_axes();
        for (key, values) in &axes {
            if values.iter().any(|v| v.is_empty()) {
                bail!("{key} has an empty grid entry");
            }
        }
        let mut cells = vec![BTreeMap::new()];
        for (key, values) in &axes {
            let mut next = Vec::with_capacity(cells.len() * values.len());
            for cell in &cells {
                for v in values.iter() {
                    let mut c: BTreeMap<&str, &str> = cell.clone();
                    c.insert(*key, v.as_str());
                    next.push(c);
                }
            }
            cells = next;
        }
        cells.iter().map(|c| self.build(c)).collect()
    }

    fn build(&self, pinned: &BTreeMap<&str, &str>) -> Result<RunConfig> {
        let method: MethodId = self
            .single("method")?
            .ok_or_else(|| anyhow!("method is required"))?
            .parse()?;

        let mut params = Params::default();
        for &key in PARAM_KEYS.iter() {
            let value = match pinned.get(key) {
                Some(v) => Some(*v),
                None => self.single(key)?,
            };
            if let Some(v) = value {
                if !method.keys().contains(&key) {
                    bail!("{key} does not apply to method {method}");
                }
                params.set(key, v)?;
            }
        }
        params.validate(method)?;

        let dataset = match self.single("dataset")?.unwrap_or("threemoon") {
            "threemoon" => {
                let mut spec = hidegl::data::ThreeMoonSpec::default();
                if let Some(v) = self.single("n_per_class")? {
                    spec.n_per_class = parse_num("n_per_class", v)?;
                }
                if let Some(v) = self.single("ambient_dim")? {
                    spec.ambient_dim = parse_num("ambient_dim", v)?;
                }
                if let Some(v) = self.single("noise_sd")? {
                    spec.noise_sd = parse_num("noise_sd", v)?;
                }
                if let Some(v) = self.single("data_seed")? {
                    spec.seed = parse_num("data_seed", v)?;
                }
                DatasetSpec::ThreeMoon {
                    n_per_class: spec.n_per_class,
                    ambient_dim: spec.ambient_dim,
                    noise_sd: spec.noise_sd,
                    seed: spec.seed,
                }
            }
            path => {
                for key in ["n_per_class", "ambient_dim", "noise_sd", "data_seed"] {
                    if self.entries.contains_key(key) {
                        bail!("{key} only applies to the generated three-moon dataset");
                    }
                }
                DatasetSpec::Path(PathBuf::from(path))
            }
        };

        let label_counts = match self.entries.get("labels") {
            Some(vs) => vs.iter().map(|v| parse_num("labels", v)).collect::<Result<Vec<usize>>>()?,
            None => vec![3],
        };
        if label_counts.contains(&0) {
            bail!("label counts must be positive");
        }
        let repeats = match self.single("repeats")? {
            Some(v) => parse_num("repeats", v)?,
            None => 10,
        };
        if repeats == 0 {
            bail!("repeats must be at least 1");
        }
        let seed = match self.single("seed")? {
            Some(v) => parse_num("seed", v)?,
            None => 0,
        };
        Ok(RunConfig {
            dataset,
            method,
            params,
            label_counts,
            repeats,
            seed,
            output: self.single("output")?.map(PathBuf::from),
            csv_output: self.single("csv_output")?.map(PathBuf::from),
        })
    }
}

fn is_known_key(key: &str) -> bool {
    PARAM_KEYS.contains(&key) || RUN_KEYS.contains(&key) || key == CACHE_KEY
}

fn split_values(value: &str) -> Vec<String> {
    value
        .split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

/// One fully resolved benchmark run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub dataset: DatasetSpec,
    pub method: MethodId,
    pub params: Params,
    pub label_counts: Vec<usize>,
    pub repeats: usize,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub csv_output: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(method: MethodId, params: Params) -> Self {
        let spec = hidegl::data::ThreeMoonSpec::default();
        Self {
            dataset: DatasetSpec::ThreeMoon {
                n_per_class: spec.n_per_class,
                ambient_dim: spec.ambient_dim,
                noise_sd: spec.noise_sd,
                seed: spec.seed,
            },
            method,
            params,
            label_counts: vec![3],
            repeats: 10,
            seed: 0,
            output: None,
            csv_output: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            bail!("repeats must be at least 1");
        }
        if self.label_counts.is_empty() || self.label_counts.contains(&0) {
            bail!("label counts must be a non-empty list of positive integers");
        }
        self.params.validate(self.method)
    }

    /// The configuration as a config file `bench` would accept.
    pub fn to_config_text(&self) -> String {
        let mut out = String::new();
        match &self.dataset {
            DatasetSpec::ThreeMoon {
                n_per_class,
                ambient_dim,
                noise_sd,
                seed,
            } => {
                out += "dataset = threemoon\n";
                out += &format!("n_per_class = {n_per_class}\nambient_dim = {ambient_dim}\n");
                out += &format!("noise_sd = {noise_sd}\ndata_seed = {seed}\n");
            }
            DatasetSpec::Path(p) => out += &format!("dataset = {}\n", p.display()),
        }
        out += &format!("method = {}\n", self.method);
        for (k, v) in self.params.resolved(self.method) {
            out += &format!("{k} = {v}\n");
        }
        let labels: Vec<String> = self.label_counts.iter().map(|l| l.to_string()).collect();
        out += &format!("labels = {}\n", labels.join(","));
        out += &format!("repeats = {}\nseed = {}\n", self.repeats, self.seed);
        out
    }
}
