//! Repeated label-draw evaluation and grid search.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, OnceLock};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use hidegl::baselines::{agr_gauss_z, agr_lae_z, agr_predict, AnchorSet, LaeOptions, LgcModel};
use hidegl::data::{draw_label_set, gen_three_moon, load_path, Dataset, ThreeMoonSpec};
use hidegl::graph::{build_factor, FactorSpec, GraphFactor, Variant};
use hidegl::hdp::{fit_hdp_from, kmeans_init, load_bundle, save_bundle, HdpConfig, HdpModel};
use hidegl::infer::{infer, InferConfig, Method};
use hidegl::kmeans::{kmeans, KmeansConfig};
use hidegl::linalg::CgOptions;

use crate::config::{DatasetSpec, MethodId, Params, RawConfig, RunConfig};

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of the label draw for label count `l` and repeat `r`. Depends only
/// on its arguments, so a cell gives the same draws wherever it sits in a grid.
pub fn derive_seed(master: u64, l: u64, r: u64) -> u64 {
    mix(mix(mix(master) ^ l) ^ r)
}

/// Seed of the k-means initialization, shared by every label draw.
pub fn init_seed(master: u64) -> u64 {
    derive_seed(master, u64::MAX, u64::MAX)
}

pub fn load_dataset(spec: &DatasetSpec) -> Result<Dataset> {
    let ds = match spec {
        DatasetSpec::ThreeMoon {
            n_per_class,
            ambient_dim,
            noise_sd,
            seed,
        } => gen_three_moon(&ThreeMoonSpec {
            n_per_class: *n_per_class,
            ambient_dim: *ambient_dim,
            noise_sd: *noise_sd,
            seed: *seed,
        })?,
        DatasetSpec::Path(p) => load_path(p).with_context(|| format!("loading {}", p.display()))?,
    };
    if ds.labels().is_none() {
        bail!("dataset {} has no ground-truth labels", spec.describe());
    }
    Ok(ds)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    /// Number of labeled samples per draw.
    pub l: usize,
    pub mean_accuracy: f64,
    pub sd_accuracy: f64,
    pub accuracies: Vec<f64>,
    /// Wall-clock seconds per repeat, initialization excluded.
    pub time_mean: f64,
    pub time_sd: f64,
    pub times: Vec<f64>,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub method: MethodId,
    pub dataset: String,
    pub hyperparameters: BTreeMap<String, f64>,
    pub master_seed: u64,
    pub repeats: usize,
    pub results: Vec<CellResult>,
}

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl BenchReport {
    /// Mean accuracy averaged over the label counts; the grid objective.
    pub fn score(&self) -> f64 {
        self.results.iter().map(|c| c.mean_accuracy).sum::<f64>() / self.results.len() as f64
    }

    pub fn cell(&self, l: usize) -> Option<&CellResult> {
        self.results.iter().find(|c| c.l == l)
    }

    /// Copy with the wall-clock fields zeroed; what remains is a pure
    /// function of the configuration.
    pub fn without_timings(&self) -> Self {
        let mut r = self.clone();
        for c in &mut r.results {
            c.times.iter_mut().for_each(|t| *t = 0.0);
            c.time_mean = 0.0;
            c.time_sd = 0.0;
        }
        r
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub const CSV_HEADER: &'static str = "method,l,mean,sd,time_mean,time_sd";

    /// One row per label count, after a header line.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", Self::CSV_HEADER)?;
        for c in &self.results {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                self.method, c.l, c.mean_accuracy, c.sd_accuracy, c.time_mean, c.time_sd
            )?;
        }
        Ok(())
    }

    /// Writes JSON to `output` and CSV to `csv_output` when set.
    pub fn save(&self, cfg: &RunConfig) -> Result<()> {
        if let Some(p) = &cfg.output {
            fs::write(p, self.to_json()?).with_context(|| format!("writing {}", p.display()))?;
        }
        if let Some(p) = &cfg.csv_output {
            let f = fs::File::create(p).with_context(|| format!("writing {}", p.display()))?;
            self.write_csv(std::io::BufWriter::new(f))?;
        }
        Ok(())
    }
}

type Slot<T> = Arc<OnceLock<std::result::Result<Arc<T>, String>>>;

/// Memoized build steps keyed by the parameters they depend on.
struct Memo<T> {
    slots: Mutex<HashMap<String, Slot<T>>>,
}

impl<T> Default for Memo<T> {
    fn default() -> Self {
        Self {
            slots: Mutex::new(HashMap::new()),
        }
    }
}

impl<T> Memo<T> {
    fn get(&self, key: String, build: impl FnOnce() -> Result<T>) -> Result<Arc<T>> {
        let slot = {
            let mut slots = self.slots.lock().expect("memo lock");
            slots.entry(key).or_default().clone()
        };
        slot.get_or_init(|| build().map(Arc::new).map_err(|e| format!("{e:#}")))
            .clone()
            .map_err(|e| anyhow!(e))
    }
}

/// A fitted model plus the seconds its fit took.
struct Timed<T> {
    value: T,
    secs: f64,
}

fn timed<T>(f: impl FnOnce() -> Result<T>) -> Result<Timed<T>> {
    let start = Instant::now();
    let value = f()?;
    Ok(Timed {
        value,
        secs: start.elapsed().as_secs_f64(),
    })
}

/// Label-independent state shared across repeats and grid cells on one
/// dataset: k-means initializations, HiDeGL models and factors, LGC systems
/// and AGR anchor weights. An optional directory persists HiDeGL models.
#[derive(Default)]
pub struct FitCache {
    dir: Option<PathBuf>,
    kmeans: Memo<DMatrix<f64>>,
    hdp: Memo<Timed<HdpModel>>,
    factors: Memo<Timed<GraphFactor>>,
    lgc: Memo<Timed<LgcModel>>,
    anchor_z: Memo<Timed<DMatrix<f64>>>,
}

impl FitCache {
    pub fn new(dir: Option<PathBuf>) -> Self {
        Self {
            dir,
            ..Default::default()
        }
    }
}

fn kmeans_config(p: &Params, master: u64) -> KmeansConfig {
    KmeansConfig {
        max_iters: p.kmeans_iters,
        n_restarts: p.kmeans_restarts,
        seed: init_seed(master),
    }
}

fn hdp_config(p: &Params, master: u64) -> HdpConfig {
    HdpConfig {
        max_outer_iters: p.max_outer_iters,
        tol: p.hdp_tol,
        kmeans: kmeans_config(p, master),
        ..HdpConfig::new(p.k, p.sigma, p.lambda1)
    }
}

fn hidegl_parts(method: MethodId) -> (Variant, Method) {
    match method {
        MethodId::HideglLAccurate => (Variant::Exact, Method::LgcCg),
        MethodId::HideglLApprox => (Variant::Approx, Method::LgcCg),
        MethodId::HideglAAccurate => (Variant::Exact, Method::AgrClosedForm),
        MethodId::HideglAApprox => (Variant::Approx, Method::AgrClosedForm),
        _ => unreachable!("not a HiDeGL method"),
    }
}

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3))
}

fn load_cached_model(dir: &Path) -> Option<Timed<HdpModel>> {
    let model = load_bundle(dir).ok()?;
    let secs = fs::read_to_string(dir.join("fit_seconds")).ok()?.trim().parse().ok()?;
    Some(Timed { value: model, secs })
}

impl FitCache {
    fn kmeans_centers(&self, ds: &Dataset, k: usize, cfg: KmeansConfig) -> Result<Arc<DMatrix<f64>>> {
        let key = format!("{k}|{cfg:?}");
        self.kmeans.get(key, || Ok(kmeans(ds.features(), k, &cfg)?.centers))
    }

    fn hdp_model(&self, ds: &Dataset, ds_name: &str, cfg: HdpConfig) -> Result<(String, Arc<Timed<HdpModel>>)> {
        let key = format!("{cfg:?}");
        let model = self.hdp.get(key.clone(), || {
            let bundle = self
                .dir
                .as_ref()
                .map(|d| d.join(format!("hdp-{:016x}", fnv1a(&format!("{ds_name}|{key}")))));
            if let Some(hit) = bundle.as_deref().and_then(load_cached_model) {
                return Ok(hit);
            }
            let init = self.kmeans_centers(ds, cfg.k, cfg.kmeans)?;
            let fit = timed(|| Ok(fit_hdp_from(ds, &cfg, (*init).clone())?))?;
            if let Some(dir) = bundle {
                save_bundle(&fit.value, &dir)?;
                fs::write(dir.join("fit_seconds"), fit.secs.to_string())?;
            }
            Ok(fit)
        })?;
        Ok((key, model))
    }
}

/// Evaluates one configuration: for each label count and repeat, draws
/// labels with [`derive_seed`], predicts, and scores the unlabeled samples.
pub fn run_bench(cfg: &RunConfig) -> Result<BenchReport> {
    cfg.validate()?;
    let ds = load_dataset(&cfg.dataset)?;
    run_bench_on(cfg, &ds, &FitCache::default())
}

/// One repeat's prediction: accuracy in percent, seconds.
type Outcome = (f64, f64);

pub fn run_bench_on(cfg: &RunConfig, ds: &Dataset, cache: &FitCache) -> Result<BenchReport> {
    cfg.validate()?;
    let p = &cfg.params;
    let truth = ds.labels().ok_or_else(|| anyhow!("dataset has no labels"))?;
    let name = cfg.dataset.describe();

    let predict: Box<dyn Fn(u64, usize) -> Result<Outcome> + Sync + '_> = match cfg.method {
        m if m.is_hidegl() => {
            let (variant, method) = hidegl_parts(m);
            let (key, model) = cache.hdp_model(ds, &name, hdp_config(p, cfg.seed))?;
            let spec = FactorSpec {
                variant,
                alpha: p.alpha,
                eta: p.eta,
            };
            let factor = cache
                .factors
                .get(format!("{key}|{spec:?}"), || timed(|| Ok(build_factor(&model.value, spec)?)))?;
            let infer_cfg = InferConfig {
                lambda2: p.lambda2,
                cg: CgOptions {
                    tol: p.cg_tol,
                    max_iters: p.cg_max_iters,
                },
                method,
            };
            let fixed = model.secs + factor.secs;
            Box::new(move |seed, l| {
                let labels = draw_label_set(ds, l, seed)?;
                let start = Instant::now();
                let pred = infer(&factor.value, &labels, &infer_cfg)?;
                Ok((pred.accuracy(truth), fixed + start.elapsed().as_secs_f64()))
            })
        }
        MethodId::Lgc => {
            let model = cache.lgc.get(format!("{}|{:?}|{:?}", p.knn, p.sigma, p.mu), || {
                timed(|| Ok(LgcModel::fit(ds, p.knn, p.sigma, p.mu)?))
            })?;
            Box::new(move |seed, l| {
                let labels = draw_label_set(ds, l, seed)?;
                let start = Instant::now();
                let pred = model.value.predict(&labels)?.prediction;
                Ok((pred.accuracy(truth), model.secs + start.elapsed().as_secs_f64()))
            })
        }
        MethodId::AgrGauss | MethodId::AgrLae => {
            let kcfg = kmeans_config(p, cfg.seed);
            let centers = cache.kmeans_centers(ds, p.k, kcfg)?;
            let z = if cfg.method == MethodId::AgrGauss {
                let key = format!("gauss|{}|{kcfg:?}|{}|{:?}", p.k, p.s_hat, p.bandwidth);
                cache.anchor_z.get(key, || {
                    let anchors = AnchorSet::new((*centers).clone(), p.s_hat, p.bandwidth)?;
                    timed(|| Ok(agr_gauss_z(ds, &anchors)?))
                })?
            } else {
                let opts = LaeOptions {
                    max_iters: p.lae_max_iters,
                    tol: p.lae_tol,
                };
                let key = format!("lae|{}|{kcfg:?}|{}|{opts:?}", p.k, p.s_hat);
                cache.anchor_z.get(key, || {
                    // the bandwidth plays no role in LAE
                    let anchors = AnchorSet::new((*centers).clone(), p.s_hat, 1.0)?;
                    timed(|| Ok(agr_lae_z(ds, &anchors, &opts)?))
                })?
            };
            let gamma = p.gamma;
            Box::new(move |seed, l| {
                let labels = draw_label_set(ds, l, seed)?;
                let start = Instant::now();
                let pred = agr_predict(&z.value, &labels, gamma)?;
                Ok((pred.accuracy(truth), z.secs + start.elapsed().as_secs_f64()))
            })
        }
        _ => unreachable!("every method is covered"),
    };

    let mut results = Vec::with_capacity(cfg.label_counts.len());
    for &l in &cfg.label_counts {
        let seeds: Vec<u64> = (0..cfg.repeats as u64).map(|r| derive_seed(cfg.seed, l as u64, r)).collect();
        let outcomes: Vec<Outcome> = seeds
            .par_iter()
            .map(|&s| predict(s, l))
            .collect::<Result<_>>()
            .with_context(|| format!("{} with l = {l}", cfg.method))?;
        let accuracies: Vec<f64> = outcomes.iter().map(|o| o.0).collect();
        let times: Vec<f64> = outcomes.iter().map(|o| o.1).collect();
        let (mean_accuracy, sd_accuracy) = mean_sd(&accuracies);
        let (time_mean, time_sd) = mean_sd(&times);
        results.push(CellResult {
            l,
            mean_accuracy,
            sd_accuracy,
            accuracies,
            time_mean,
            time_sd,
            times,
            seeds,
        });
    }
    Ok(BenchReport {
        method: cfg.method,
        dataset: name,
        hyperparameters: p.resolved(cfg.method),
        master_seed: cfg.seed,
        repeats: cfg.repeats,
        results,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub hyperparameters: BTreeMap<String, f64>,
    /// Mean accuracy averaged over label counts, or `None` if the cell
    /// failed (for instance a singular system).
    pub score: Option<f64>,
    /// `(l, mean accuracy)` per label count; empty when the cell failed.
    pub per_l: Vec<(usize, f64)>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    pub best: RunConfig,
    pub best_report: BenchReport,
    pub cells: Vec<GridCell>,
}

/// Evaluates every cell in order and keeps the one with the highest score;
/// ties go to the earlier cell.
pub fn grid_search(cells: &[RunConfig], cache_dir: Option<PathBuf>) -> Result<GridReport> {
    let first = cells.first().ok_or_else(|| anyhow!("empty grid"))?;
    if cells.iter().any(|c| c.dataset != first.dataset) {
        bail!("all grid cells must use the same dataset");
    }
    let ds = load_dataset(&first.dataset)?;
    let cache = FitCache::new(cache_dir);
    let mut best: Option<(usize, BenchReport)> = None;
    let mut summary = Vec::with_capacity(cells.len());
    for (i, cell) in cells.iter().enumerate() {
        let hyperparameters = cell.params.resolved(cell.method);
        match run_bench_on(cell, &ds, &cache) {
            Ok(report) => {
                let score = report.score();
                let per_l = report.results.iter().map(|c| (c.l, c.mean_accuracy)).collect();
                if best.as_ref().is_none_or(|(_, b)| score > b.score()) {
                    best = Some((i, report));
                }
                summary.push(GridCell {
                    hyperparameters,
                    score: Some(score),
                    per_l,
                    error: None,
                });
            }
            Err(e) => summary.push(GridCell {
                hyperparameters,
                score: None,
                per_l: Vec::new(),
                error: Some(format!("{e:#}")),
            }),
        }
    }
    let (i, best_report) = best.ok_or_else(|| anyhow!("every grid cell failed"))?;
    Ok(GridReport {
        best: cells[i].clone(),
        best_report,
        cells: summary,
    })
}

/// Expands the grid in `raw` and searches it.
pub fn grid_search_raw(raw: &RawConfig) -> Result<GridReport> {
    grid_search(&raw.expand_grid()?, raw.cache_dir()?)
}

/// Fits the HiDeGL model of a configuration. Used by `diagnose`.
pub fn fit_hidegl_factor(cfg: &RunConfig) -> Result<GraphFactor> {
    if !cfg.method.is_hidegl() {
        bail!("diagnostics need a hidegl-* method, got {}", cfg.method);
    }
    cfg.validate()?;
    let ds = load_dataset(&cfg.dataset)?;
    let hcfg = hdp_config(&cfg.params, cfg.seed);
    let model = fit_hdp_from(&ds, &hcfg, kmeans_init(&ds, &hcfg)?)?;
    let (variant, _) = hidegl_parts(cfg.method);
    Ok(build_factor(
        &model,
        FactorSpec {
            variant,
            alpha: cfg.params.alpha,
            eta: cfg.params.eta,
        },
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_are_stable_and_distinct() {
        assert_eq!(derive_seed(7, 3, 0), derive_seed(7, 3, 0));
        let mut all: Vec<u64> = (0..10).flat_map(|r| [derive_seed(0, 3, r), derive_seed(0, 10, r)]).collect();
        all.sort_unstable();
        all.dedup();
        assert_eq!(all.len(), 20);
        assert_ne!(derive_seed(1, 3, 0), derive_seed(0, 3, 0));
    }

    #[test]
    fn mean_sd_matches_hand_values() {
        let (m, s) = mean_sd(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_sd(&[7.0]), (7.0, 0.0));
    }
}
