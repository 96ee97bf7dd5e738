//! Dataset representation, synthetic non-IID generation, four-way splitting,
//! and weighted random sampling.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::ChaCha12Rng;
use rand_core::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::seed::{derive_seed, rng_from};

/// Feature vectors with integer class labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    features: Vec<Vec<f64>>,
    labels: Vec<usize>,
    class_names: Vec<String>,
}

impl LabeledDataset {
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<usize>, class_names: Vec<String>) -> Result<Self> {
        if features.is_empty() {
            return Err(CoreError::EmptyInput("LabeledDataset"));
        }
        if features.len() != labels.len() {
            return Err(CoreError::DimensionMismatch {
                expected: features.len(),
                actual: labels.len(),
            });
        }
        let d = features[0].len();
        for f in &features {
            if f.len() != d {
                return Err(CoreError::DimensionMismatch {
                    expected: d,
                    actual: f.len(),
                });
            }
            if f.iter().any(|v| !v.is_finite()) {
                return Err(CoreError::NonFinite("LabeledDataset features"));
            }
        }
        for &y in &labels {
            if y >= class_names.len() {
                return Err(CoreError::LabelOutOfRange {
                    label: y,
                    num_classes: class_names.len(),
                });
            }
        }
        Ok(Self {
            features,
            labels,
            class_names,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features[0].len()
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn feature(&self, i: usize) -> &[f64] {
        &self.features[i]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    /// Per-class sample counts.
    pub fn class_counts(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.class_names.len()];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }

    /// New dataset containing the given rows, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(CoreError::EmptyInput("subset"));
        }
        let features = indices.iter().map(|&i| self.features[i].clone()).collect();
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        LabeledDataset::new(features, labels, self.class_names.clone())
    }

    /// Concatenate several datasets sharing a class list.
    pub fn concat(parts: &[&LabeledDataset]) -> Result<Self> {
        let first = parts.first().ok_or(CoreError::EmptyInput("concat"))?;
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for p in parts {
            if p.class_names != first.class_names {
                return Err(CoreError::InvalidConfig(String::from(
                    "concat: class lists differ",
                )));
            }
            features.extend(p.features.iter().cloned());
            labels.extend(p.labels.iter().copied());
        }
        LabeledDataset::new(features, labels, first.class_names.clone())
    }
}

/// The four-way partition of one client's data.
///
/// Sizes follow the 18/30, 4/30, 4/30, 4/30 split exactly: each of the three
/// small buckets gets `floor(n*4/30)` samples and the remainder goes to train.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitSet {
    pub train: LabeledDataset,
    pub validation: LabeledDataset,
    pub local_test: LabeledDataset,
    pub global_test: LabeledDataset,
}

/// Per-client affine feature shift modelling institutional variation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Shift {
    pub scale: Vec<f64>,
    pub offset: Vec<f64>,
    pub rotation_seed: u64,
}

impl Shift {
    pub fn identity(dim: usize) -> Self {
        Self {
            scale: vec![1.0; dim],
            offset: vec![0.0; dim],
            rotation_seed: 0,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.rotation_seed == 0
            && self.scale.iter().all(|&s| s == 1.0)
            && self.offset.iter().all(|&o| o == 0.0)
    }
}

/// One synthetic client: a name, Table-1-style per-class counts, and an
/// institutional shift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientProfile {
    pub name: String,
    pub class_counts: Vec<u64>,
    pub shift: Shift,
}

impl ClientProfile {
    pub fn total(&self) -> u64 {
        self.class_counts.iter().sum()
    }
}

/// Parameters shared by all clients of one synthetic generation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub dim: usize,
    pub class_sep: f64,
    pub class_names: Vec<String>,
    pub seed: u64,
}

/// Draw each client's data from shared per-class Gaussian prototypes, then
/// apply the client's affine shift `x -> R (scale .* x) + offset` with `R` a
/// rotation seeded by the profile. Deterministic per seed.
pub fn generate_synthetic(profiles: &[ClientProfile], cfg: &SyntheticConfig) -> Result<Vec<LabeledDataset>> {
    if cfg.dim < 2 {
        return Err(CoreError::InvalidConfig(alloc::format!(
            "dim must be >= 2, got {}",
            cfg.dim
        )));
    }
    if !(cfg.class_sep > 0.0) {
        return Err(CoreError::InvalidConfig(alloc::format!(
            "class_sep must be > 0, got {}",
            cfg.class_sep
        )));
    }
    if profiles.is_empty() {
        return Err(CoreError::EmptyInput("generate_synthetic profiles"));
    }
    let c = cfg.class_names.len();
    for p in profiles {
        if p.class_counts.len() != c {
            return Err(CoreError::DimensionMismatch {
                expected: c,
                actual: p.class_counts.len(),
            });
        }
        if p.total() == 0 {
            return Err(CoreError::EmptyInput("profile with all-zero counts"));
        }
        if p.shift.scale.len() != cfg.dim || p.shift.offset.len() != cfg.dim {
            return Err(CoreError::DimensionMismatch {
                expected: cfg.dim,
                actual: p.shift.scale.len(),
            });
        }
    }

    // Global class prototypes, shared across clients: mu_c ~ N(0, class_sep^2 I).
    let mut proto_rng = rng_from(derive_seed(cfg.seed, "prototypes", 0));
    let prototypes: Vec<Vec<f64>> = (0..c)
        .map(|_| (0..cfg.dim).map(|_| cfg.class_sep * standard_normal(&mut proto_rng)).collect())
        .collect();

    profiles
        .iter()
        .map(|profile| {
            let rotation = if profile.shift.rotation_seed == 0 {
                None
            } else {
                Some(random_rotation(cfg.dim, profile.shift.rotation_seed))
            };
            let mut rng = rng_from(derive_seed(cfg.seed, &profile.name, 0));
            let mut features = Vec::with_capacity(profile.total() as usize);
            let mut labels = Vec::with_capacity(profile.total() as usize);
            for (class, &count) in profile.class_counts.iter().enumerate() {
                for _ in 0..count {
                    let mut x: Vec<f64> = prototypes[class]
                        .iter()
                        .map(|&mu| mu + standard_normal(&mut rng))
                        .collect();
                    for (xi, &s) in x.iter_mut().zip(&profile.shift.scale) {
                        *xi *= s;
                    }
                    if let Some(rot) = &rotation {
                        x = apply_rotation(rot, &x);
                    }
                    for (xi, &o) in x.iter_mut().zip(&profile.shift.offset) {
                        *xi += o;
                    }
                    features.push(x);
                    labels.push(class);
                }
            }
            LabeledDataset::new(features, labels, cfg.class_names.clone())
        })
        .collect()
}

/// Standard normal via Box-Muller on 53-bit uniforms.
fn standard_normal(rng: &mut ChaCha12Rng) -> f64 {
    let u1 = uniform_open(rng);
    let u2 = uniform01(rng);
    libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * core::f64::consts::PI * u2)
}

fn uniform01(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn uniform_open(rng: &mut impl RngCore) -> f64 {
    // (0, 1]: safe for the log in Box-Muller
    ((rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// A seeded rotation: a product of floor(d/2) Givens rotations on random
/// coordinate pairs with angles in [-pi/4, pi/4], kept moderate so the shift
/// perturbs rather than scrambles class geometry.
struct Rotation {
    givens: Vec<(usize, usize, f64)>,
}

fn random_rotation(dim: usize, seed: u64) -> Rotation {
    let mut rng = rng_from(derive_seed(seed, "rotation", 0));
    let givens = (0..dim / 2)
        .map(|_| {
            let i = (rng.next_u64() % dim as u64) as usize;
            let mut j = (rng.next_u64() % (dim as u64 - 1)) as usize;
            if j >= i {
                j += 1;
            }
            let theta = (uniform01(&mut rng) - 0.5) * core::f64::consts::FRAC_PI_2;
            (i, j, theta)
        })
        .collect();
    Rotation { givens }
}

fn apply_rotation(rot: &Rotation, x: &[f64]) -> Vec<f64> {
    let mut out = x.to_vec();
    for &(i, j, theta) in &rot.givens {
        let (s, c) = (libm::sin(theta), libm::cos(theta));
        let (xi, xj) = (out[i], out[j]);
        out[i] = c * xi - s * xj;
        out[j] = s * xi + c * xj;
    }
    out
}

/// Exact per-bucket sizes for the 60 / 13.33 / 13.33 / 13.33 split.
pub fn split_sizes(n: usize) -> (usize, usize, usize, usize) {
    let small = n * 4 / 30;
    (n - 3 * small, small, small, small)
}

/// Stratified four-way split. Classes with at least 4 samples are allocated
/// proportionally; smaller classes are pooled and allocated globally.
pub fn split(ds: &LabeledDataset, seed: u64) -> Result<SplitSet> {
    let n = ds.len();
    if n < 8 {
        return Err(CoreError::DatasetTooSmall { required: 8, actual: n });
    }
    let (_, v_target, t_target, g_target) = split_sizes(n);

    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); ds.num_classes()];
    for i in 0..n {
        by_class[ds.label(i)].push(i);
    }

    let mut validation = Vec::new();
    let mut local_test = Vec::new();
    let mut global_test = Vec::new();
    let mut leftover = Vec::new();

    for (class, mut idx) in by_class.into_iter().enumerate() {
        if idx.len() < 4 {
            leftover.extend(idx);
            continue;
        }
        shuffle(&mut idx, derive_seed(seed, "split-class", class as u64));
        let per_bucket = idx.len() * 4 / 30;
        let mut it = idx.into_iter();
        validation.extend(it.by_ref().take(per_bucket));
        local_test.extend(it.by_ref().take(per_bucket));
        global_test.extend(it.by_ref().take(per_bucket));
        leftover.extend(it);
    }

    shuffle(&mut leftover, derive_seed(seed, "split-leftover", 0));
    let mut rest = leftover.into_iter();
    while validation.len() < v_target {
        validation.push(rest.next().expect("leftover exhausted"));
    }
    while local_test.len() < t_target {
        local_test.push(rest.next().expect("leftover exhausted"));
    }
    while global_test.len() < g_target {
        global_test.push(rest.next().expect("leftover exhausted"));
    }
    let train: Vec<usize> = rest.collect();

    Ok(SplitSet {
        train: ds.subset(&train)?,
        validation: ds.subset(&validation)?,
        local_test: ds.subset(&local_test)?,
        global_test: ds.subset(&global_test)?,
    })
}

/// Fisher-Yates with a seeded RNG.
pub(crate) fn shuffle(indices: &mut [usize], seed: u64) {
    let mut rng = rng_from(seed);
    for i in (1..indices.len()).rev() {
        let j = (rng.next_u64() % (i as u64 + 1)) as usize;
        indices.swap(i, j);
    }
}

/// Draws indices with replacement, probability proportional to the inverse
/// frequency of the sample's class. Deterministic per seed.
pub struct WeightedSampler {
    cumulative: Vec<f64>,
    total: f64,
    rng: ChaCha12Rng,
}

pub fn weighted_sampler(ds: &LabeledDataset, seed: u64) -> Result<WeightedSampler> {
    if ds.is_empty() {
        return Err(CoreError::EmptyInput("weighted_sampler"));
    }
    let counts = ds.class_counts();
    let mut cumulative = Vec::with_capacity(ds.len());
    let mut acc = 0.0;
    for i in 0..ds.len() {
        acc += 1.0 / counts[ds.label(i)] as f64;
        cumulative.push(acc);
    }
    Ok(WeightedSampler {
        total: acc,
        cumulative,
        rng: rng_from(seed),
    })
}

impl WeightedSampler {
    pub fn next_index(&mut self) -> usize {
        let u = uniform01(&mut self.rng) * self.total;
        // first index whose cumulative weight exceeds u
        match self
            .cumulative
            .binary_search_by(|w| w.partial_cmp(&u).expect("finite weights"))
        {
            Ok(i) | Err(i) => i.min(self.cumulative.len() - 1),
        }
    }

    pub fn draw(&mut self, count: usize) -> Vec<usize> {
        (0..count).map(|_| self.next_index()).collect()
    }
}

impl Iterator for WeightedSampler {
    type Item = usize;
    fn next(&mut self) -> Option<usize> {
        Some(self.next_index())
    }
}
