//! Datasets, label bookkeeping and randomized labeled-set draws.

mod io;
mod moons;

pub use io::{load_csv, load_libsvm, load_path, read_csv, read_libsvm, write_csv, write_libsvm};
pub use moons::{gen_three_moon, ThreeMoonSpec};

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, shape, Error, Result};

/// Feature matrix stored column-major, one column per sample (d × n).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: DMatrix<f64>,
    labels: Option<Vec<usize>>,
    class_names: Vec<String>,
}

impl Dataset {
    pub fn new(features: DMatrix<f64>, labels: Option<Vec<usize>>) -> Result<Self> {
        let c = labels
            .as_ref()
            .and_then(|l| l.iter().max().map(|&m| m + 1))
            .unwrap_or(0);
        let names = (0..c).map(|i| i.to_string()).collect();
        Self::with_class_names(features, labels, names)
    }

    /// Builds a dataset whose label ids index into `class_names`.
    pub fn with_class_names(
        features: DMatrix<f64>,
        labels: Option<Vec<usize>>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        if features.ncols() == 0 {
            return Err(Error::NoSamples);
        }
        if features.nrows() == 0 {
            return Err(invalid("feature dimension must be at least 1"));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(invalid("features contain NaN or infinite values"));
        }
        if let Some(l) = &labels {
            if l.len() != features.ncols() {
                return Err(shape(format!(
                    "{} labels for {} samples",
                    l.len(),
                    features.ncols()
                )));
            }
            if let Some(&bad) = l.iter().find(|&&y| y >= class_names.len()) {
                return Err(invalid(format!(
                    "label id {bad} outside [0, {})",
                    class_names.len()
                )));
            }
        }
        Ok(Self {
            features,
            labels,
            class_names,
        })
    }

    pub fn n(&self) -> usize {
        self.features.ncols()
    }

    pub fn d(&self) -> usize {
        self.features.nrows()
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    fn require_labels(&self) -> Result<&[usize]> {
        self.labels()
            .ok_or_else(|| invalid("dataset has no ground-truth labels"))
    }
}

/// Which samples carry a label, and the one-hot target matrix `Y`.
///
/// Rows of `Y` at unlabeled samples are all zero.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelState {
    n_classes: usize,
    labeled: Vec<usize>,
    unlabeled: Vec<usize>,
    y: DMatrix<f64>,
}

impl LabelState {
    /// `labeled` is a list of `(sample index, class id)` pairs.
    pub fn new(n: usize, n_classes: usize, labeled: &[(usize, usize)]) -> Result<Self> {
        if n_classes == 0 {
            return Err(invalid("at least one class is required"));
        }
        let mut y = DMatrix::zeros(n, n_classes);
        let mut mask = vec![false; n];
        for &(i, class) in labeled {
            if i >= n {
                return Err(invalid(format!("labeled index {i} outside [0, {n})")));
            }
            if class >= n_classes {
                return Err(invalid(format!("class {class} outside [0, {n_classes})")));
            }
            if mask[i] {
                return Err(invalid(format!("index {i} labeled twice")));
            }
            mask[i] = true;
            y[(i, class)] = 1.0;
        }
        let labeled: Vec<usize> = (0..n).filter(|&i| mask[i]).collect();
        let unlabeled = (0..n).filter(|&i| !mask[i]).collect();
        Ok(Self {
            n_classes,
            labeled,
            unlabeled,
            y,
        })
    }

    /// Labels the given indices with their ground-truth classes.
    pub fn from_ground_truth(ds: &Dataset, idx: &[usize]) -> Result<Self> {
        let truth = ds.require_labels()?;
        let pairs: Vec<_> = idx
            .iter()
            .map(|&i| truth.get(i).map(|&c| (i, c)))
            .collect::<Option<_>>()
            .ok_or_else(|| invalid("labeled index out of range"))?;
        Self::new(ds.n(), ds.n_classes(), &pairs)
    }

    pub fn n(&self) -> usize {
        self.y.nrows()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    /// Labeled indices, ascending.
    pub fn labeled(&self) -> &[usize] {
        &self.labeled
    }

    /// Unlabeled indices, ascending.
    pub fn unlabeled(&self) -> &[usize] {
        &self.unlabeled
    }

    /// One-hot target matrix, n × c.
    pub fn y(&self) -> &DMatrix<f64> {
        &self.y
    }

    /// Class of a labeled sample.
    pub fn class_of(&self, i: usize) -> Option<usize> {
        let row = self.y.row(i);
        row.iter().position(|&v| v == 1.0)
    }

    /// Same labeled set with every one-hot entry multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            y: &self.y * factor,
            ..self.clone()
        }
    }
}

/// Attempts before the per-class-coverage rejection sampler gives up and
/// falls back to stratified seeding.
const MAX_REJECTIONS: usize = 10_000;

/// Samples `l` labeled points uniformly without replacement, conditioned on
/// every class receiving at least one.
pub fn draw_label_set(ds: &Dataset, l: usize, seed: u64) -> Result<LabelState> {
    let truth = ds.require_labels()?;
    let (n, c) = (ds.n(), ds.n_classes());
    if l < c {
        return Err(invalid(format!("l = {l} is smaller than the class count {c}")));
    }
    if l > n {
        return Err(invalid(format!("l = {l} exceeds n = {n}")));
    }
    let mut counts = vec![0usize; c];
    for &y in truth {
        counts[y] += 1;
    }
    if let Some(empty) = counts.iter().position(|&m| m == 0) {
        return Err(invalid(format!("class {empty} has no samples to label")));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_REJECTIONS {
        let idx = rand::seq::index::sample(&mut rng, n, l).into_vec();
        let mut seen = vec![false; c];
        for &i in &idx {
            seen[truth[i]] = true;
        }
        if seen.iter().all(|&s| s) {
            return LabelState::from_ground_truth(ds, &idx);
        }
    }

    // Many classes and tiny l make rejection hopeless; seed one point per
    // class and fill the rest uniformly.
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); c];
    for (i, &y) in truth.iter().enumerate() {
        by_class[y].push(i);
    }
    let mut picked = vec![false; n];
    let mut idx = Vec::with_capacity(l);
    for members in &by_class {
        let j = rand::seq::index::sample(&mut rng, members.len(), 1).index(0);
        picked[members[j]] = true;
        idx.push(members[j]);
    }
    let rest: Vec<usize> = (0..n).filter(|&i| !picked[i]).collect();
    for j in rand::seq::index::sample(&mut rng, rest.len(), l - c) {
        idx.push(rest[j]);
    }
    LabelState::from_ground_truth(ds, &idx)
}
