//! Built-in client profiles mirroring the per-institution class distributions
//! used as generator priors, plus the desk-scale synthetic benchmark built
//! from them.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand_core::RngCore;

use crate::data::{generate_synthetic, split, ClientProfile, Shift, SyntheticConfig};
use crate::error::Result;
use crate::orchestrator::ClientData;
use crate::seed::{derive_seed, rng_from};

/// The 11 cell types shared by the two training institutions.
pub const CLASS_NAMES: [&str; 11] = [
    "Band neutrophilis",
    "Basophil",
    "Eosinophils",
    "Lymphocyte",
    "Lymphocyte atypical",
    "Metamyelocyte",
    "Monocyte",
    "Myelocyte",
    "Promyelocyte",
    "Segmented neutrophils",
    "Smudged cells",
];

pub const CLIENT1_COUNTS: [u64; 11] = [164, 42, 86, 2705, 350, 61, 1030, 138, 529, 1911, 2267];
pub const CLIENT2_COUNTS: [u64; 11] = [66, 47, 254, 2362, 7, 9, 1074, 25, 42, 5090, 9];

/// The holdout institution reports only 9 of the 11 classes; it reuses
/// client2's counts for those classes with its own institutional shift.
pub const CLIENT3_HOLDOUT_COUNTS: [u64; 11] = [66, 47, 254, 2362, 0, 9, 1074, 25, 42, 5090, 0];

pub fn class_names() -> Vec<String> {
    CLASS_NAMES.iter().map(|s| s.to_string()).collect()
}

/// Scale counts by `factor`, keeping every originally-nonzero class at >= 1.
pub fn scale_counts(counts: &[u64], factor: f64) -> Vec<u64> {
    counts
        .iter()
        .map(|&c| {
            if c == 0 {
                0
            } else {
                let scaled = libm::round(c as f64 * factor) as u64;
                scaled.max(1)
            }
        })
        .collect()
}

/// A moderate institutional shift: per-dimension scales in [0.5, 1.5],
/// offsets ~ N(0, 2.0), and a seeded rotation.
pub fn institution_shift(dim: usize, seed: u64) -> Shift {
    let mut rng = rng_from(derive_seed(seed, "shift", 0));
    let mut uniform = || (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    let scale = (0..dim).map(|_| 0.5 + 1.0 * uniform()).collect();
    let offset = (0..dim)
        .map(|_| {
            let (u1, u2) = (uniform().max(1e-12), uniform());
            2.0 * libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * core::f64::consts::PI * u2)
        })
        .collect();
    Shift {
        scale,
        offset,
        rotation_seed: derive_seed(seed, "rotation-seed", 0).max(1),
    }
}

/// The two training-institution profiles at the given count scale.
pub fn table1_profiles(dim: usize, factor: f64) -> Vec<ClientProfile> {
    vec![
        ClientProfile {
            name: "client1".to_string(),
            class_counts: scale_counts(&CLIENT1_COUNTS, factor),
            shift: institution_shift(dim, 101),
        },
        ClientProfile {
            name: "client2".to_string(),
            class_counts: scale_counts(&CLIENT2_COUNTS, factor),
            shift: institution_shift(dim, 202),
        },
    ]
}

/// The held-out institution profile; never used in training.
pub fn table1_holdout(dim: usize, factor: f64) -> ClientProfile {
    ClientProfile {
        name: "client3-holdout".to_string(),
        class_counts: scale_counts(&CLIENT3_HOLDOUT_COUNTS, factor),
        shift: institution_shift(dim, 303),
    }
}

/// Defaults for the desk-scale benchmark.
pub const BENCH_DIM: usize = 16;
pub const BENCH_CLASS_SEP: f64 = 1.2;

/// Generated desk-scale benchmark: the two training clients already split
/// four ways, plus the holdout institution's full dataset.
pub struct Table1Benchmark {
    pub clients: Vec<ClientData>,
    pub holdout: crate::data::LabeledDataset,
}

/// Build the Table-1-shaped synthetic benchmark at a count scale (1.0 or 0.1).
pub fn build_table1_benchmark(factor: f64, master_seed: u64) -> Result<Table1Benchmark> {
    let mut profiles = table1_profiles(BENCH_DIM, factor);
    profiles.push(table1_holdout(BENCH_DIM, factor));
    let cfg = SyntheticConfig {
        dim: BENCH_DIM,
        class_sep: BENCH_CLASS_SEP,
        class_names: class_names(),
        seed: derive_seed(master_seed, "table1-data", 0),
    };
    let mut datasets = generate_synthetic(&profiles, &cfg)?;
    let holdout = datasets.pop().expect("holdout present");
    let clients = datasets
        .into_iter()
        .zip(profiles.iter())
        .map(|(ds, profile)| {
            let s = split(&ds, derive_seed(master_seed, &profile.name, 1))?;
            Ok(ClientData {
                name: profile.name.clone(),
                split: s,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Table1Benchmark { clients, holdout })
}
