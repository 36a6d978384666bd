//! Coverage-stratified file sampling and per-file mutant sampling.
//!
//! All randomness comes from ChaCha8 streams. The stream for a draw is
//! keyed by `(seed, label)` where the label is a bucket name or a file path,
//! so a file's sample does not depend on which other files were selected.
//! Selection is a partial Fisher-Yates shuffle over indices using
//! rejection-sampled bounded integers; both steps are spelled out below so
//! the samples can be reproduced from this description alone.

use std::collections::BTreeMap;
use std::fmt;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::coverage::CoverageMap;
use crate::operators::Mutant;

/// Coverage bucket: `[0,25)`, `[25,50)`, `[50,75)` or `[75,100]` percent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Bucket {
    #[serde(rename = "0-25")]
    Low,
    #[serde(rename = "25-50")]
    MidLow,
    #[serde(rename = "50-75")]
    MidHigh,
    #[serde(rename = "75-100")]
    High,
}

impl Bucket {
    pub const ALL: [Bucket; 4] = [Bucket::Low, Bucket::MidLow, Bucket::MidHigh, Bucket::High];

    /// Bucket for `covered / instrumented`, computed in integer arithmetic.
    /// Boundaries belong to the higher bucket; 100% is in the top one.
    pub fn for_lines(covered: u64, instrumented: u64) -> Bucket {
        assert!(instrumented > 0 && covered <= instrumented);
        let quarter = (4 * covered as u128) / instrumented as u128;
        Bucket::ALL[quarter.min(3) as usize]
    }

    /// Bucket for a percentage in `[0, 100]`.
    pub fn for_percent(pct: f64) -> Bucket {
        match pct {
            p if p < 25.0 => Bucket::Low,
            p if p < 50.0 => Bucket::MidLow,
            p if p < 75.0 => Bucket::MidHigh,
            _ => Bucket::High,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Bucket::Low => "0-25",
            Bucket::MidLow => "25-50",
            Bucket::MidHigh => "50-75",
            Bucket::High => "75-100",
        }
    }
}

impl fmt::Display for Bucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BucketPlan {
    pub per_bucket: usize,
    pub mutant_cap: usize,
    pub file_cap: usize,
    pub seed: u64,
}

impl Default for BucketPlan {
    fn default() -> Self {
        BucketPlan {
            per_bucket: 25,
            mutant_cap: 100,
            file_cap: 100,
            seed: 0,
        }
    }
}

/// Groups every file with at least one instrumented line by coverage bucket.
/// Paths within a bucket are sorted.
pub fn bucket_files(coverage_map: &CoverageMap) -> BTreeMap<Bucket, Vec<String>> {
    let mut out: BTreeMap<Bucket, Vec<String>> = Bucket::ALL.iter().map(|b| (*b, Vec::new())).collect();
    for (path, f) in &coverage_map.entries {
        let instrumented = f.instrumented_count() as u64;
        if instrumented == 0 {
            continue;
        }
        let bucket = Bucket::for_lines(f.covered_count() as u64, instrumented);
        out.get_mut(&bucket).expect("all buckets present").push(path.clone());
    }
    for v in out.values_mut() {
        v.sort();
    }
    out
}

/// FNV-1a, used to turn labels into stream keys.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Stream for `(seed, label)`: ChaCha8 keyed by `seed`, stream id
/// `fnv1a(label)`.
pub fn stream(seed: u64, label: &str) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(fnv1a(label.as_bytes()));
    rng
}

/// Uniform integer in `[0, bound)` by rejection from 64-bit draws.
pub fn below(rng: &mut impl RngCore, bound: u64) -> u64 {
    assert!(bound > 0);
    let zone = u64::MAX - (u64::MAX % bound);
    loop {
        let x = rng.next_u64();
        if x < zone {
            return x % bound;
        }
    }
}

/// `k` distinct indices from `0..n`, sorted ascending. Partial Fisher-Yates:
/// for `i` in `0..k`, swap position `i` with `i + below(n - i)`.
pub fn choose_indices(rng: &mut impl RngCore, n: usize, k: usize) -> Vec<usize> {
    let k = k.min(n);
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = i + below(rng, (n - i) as u64) as usize;
        idx.swap(i, j);
    }
    let mut chosen = idx[..k].to_vec();
    chosen.sort_unstable();
    chosen
}

/// Per-bucket selection of files, in bucket order then path order.
pub fn sample_buckets(
    buckets: &BTreeMap<Bucket, Vec<String>>,
    plan: &BucketPlan,
) -> BTreeMap<Bucket, Vec<String>> {
    let mut picked: BTreeMap<Bucket, Vec<String>> = BTreeMap::new();
    for (bucket, files) in buckets {
        let mut sorted = files.clone();
        sorted.sort();
        let mut rng = stream(plan.seed, &format!("bucket:{}", bucket.label()));
        let chosen = choose_indices(&mut rng, sorted.len(), plan.per_bucket);
        picked.insert(*bucket, chosen.into_iter().map(|i| sorted[i].clone()).collect());
    }
    // Enforce the project cap by dealing files round-robin across buckets.
    let total: usize = picked.values().map(Vec::len).sum();
    if total > plan.file_cap {
        let mut keep: BTreeMap<Bucket, usize> = picked.keys().map(|b| (*b, 0)).collect();
        let mut remaining = plan.file_cap;
        while remaining > 0 {
            let mut progressed = false;
            for (b, files) in &picked {
                let k = keep.get_mut(b).expect("bucket");
                if remaining > 0 && *k < files.len() {
                    *k += 1;
                    remaining -= 1;
                    progressed = true;
                }
            }
            if !progressed {
                break;
            }
        }
        for (b, files) in picked.iter_mut() {
            let mut rng = stream(plan.seed, &format!("cap:{}", b.label()));
            let chosen = choose_indices(&mut rng, files.len(), keep[b]);
            *files = chosen.into_iter().map(|i| files[i].clone()).collect();
        }
    }
    picked
}

pub fn sample_files(buckets: &BTreeMap<Bucket, Vec<String>>, plan: &BucketPlan) -> Vec<String> {
    sample_buckets(buckets, plan).into_values().flatten().collect()
}

/// Up to `plan.mutant_cap` mutants, in generation order. `label` keys the
/// random stream; callers pass the file path.
pub fn sample_mutants(mutants: &[Mutant], label: &str, plan: &BucketPlan) -> Vec<Mutant> {
    let mut rng = stream(plan.seed, &format!("mutants:{label}"));
    choose_indices(&mut rng, mutants.len(), plan.mutant_cap)
        .into_iter()
        .map(|i| mutants[i].clone())
        .collect()
}

/// Persisted record of a sampling run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingManifest {
    pub seed: u64,
    pub plan: BucketPlan,
    pub language: String,
    pub buckets: BTreeMap<Bucket, Vec<String>>,
    pub selected_files: BTreeMap<Bucket, Vec<String>>,
    pub mutants: BTreeMap<String, ManifestFile>,
    pub uninstrumented: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestFile {
    pub generated: usize,
    pub selected: Vec<String>,
}
