//! Seeded stand-in for NetFlow intrusion datasets.
//!
//! Benign flows connect ordinary hosts, optionally with a few heavy talkers
//! taking a large share of the endpoints. Each attack family is launched from
//! its own small pool of attacker hosts towards victims drawn like benign
//! endpoints.
//! Features are per-feature Gaussians clipped to `[0, 1]`.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::{index, SliceRandom};
use rand::Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use super::csv_io::NF_V2_FEATURES;
use super::{FlowDataset, FlowRecord};
use crate::error::{FeaeError, Result};
use crate::rng::{stream_rng, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    pub name: String,
    pub weight: f64,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub n_flows: usize,
    pub n_hosts: usize,
    pub attack_fraction: f64,
    pub families: Vec<FamilySpec>,
    pub benign_mean: Vec<f64>,
    pub benign_std: Vec<f64>,
    /// Hosts `0..heavy_hosts` are drawn `heavy_weight` times as often.
    pub heavy_hosts: usize,
    pub heavy_weight: f64,
    pub attackers_per_family: usize,
    pub seed: u64,
}

const FAMILY_NAMES: [&str; 9] = [
    "DoS",
    "Exploits",
    "Reconnaissance",
    "Fuzzers",
    "Generic",
    "Backdoor",
    "Shellcode",
    "Analysis",
    "Worms",
];

impl SyntheticConfig {
    /// Blob preset: benign means uniform in [0.3, 0.7] with std 0.05; each
    /// family shifts `signature` randomly chosen features by `separation`
    /// benign standard deviations, away from the nearer bound of [0, 1].
    pub fn blobs(
        n_flows: usize,
        n_hosts: usize,
        attack_fraction: f64,
        n_families: usize,
        separation: f64,
        seed: u64,
    ) -> Self {
        let d = NF_V2_FEATURES.len();
        let sigma = 0.05;
        let signature = 8.min(d);
        let mut rng = stream_rng(seed, Stream::SyntheticLayout);
        let benign_mean: Vec<f64> = (0..d).map(|_| rng.random_range(0.3..0.7)).collect();
        let benign_std = vec![sigma; d];
        let families = (0..n_families)
            .map(|f| {
                let mut mean = benign_mean.clone();
                for j in index::sample(&mut rng, d, signature) {
                    let shift = separation * sigma;
                    mean[j] = if mean[j] < 0.5 {
                        mean[j] + shift
                    } else {
                        mean[j] - shift
                    };
                }
                let name = FAMILY_NAMES
                    .get(f)
                    .map(|s| s.to_string())
                    .unwrap_or_else(|| format!("Family{f}"));
                FamilySpec {
                    name,
                    weight: 1.0 / n_families as f64,
                    mean,
                    std: benign_std.clone(),
                }
            })
            .collect();
        SyntheticConfig {
            n_flows,
            n_hosts,
            attack_fraction,
            families,
            benign_mean,
            benign_std,
            heavy_hosts: 0,
            heavy_weight: 20.0,
            attackers_per_family: 5,
            seed,
        }
    }

    /// Desk-scale default: 10,000 flows, 2% attacks over 3 families, 3 sigma blobs.
    pub fn desk(seed: u64) -> Self {
        Self::blobs(10_000, 200, 0.02, 3, 3.0, seed)
    }

    /// Imbalance of the 18.9M-flow intrusion dataset: 12% attacks, 6 families.
    pub fn cse_cic_like(n_flows: usize, seed: u64) -> Self {
        Self::blobs(n_flows, 400, 0.12, 6, 3.0, seed)
    }

    /// Imbalance of the 2.3M-flow intrusion dataset: 4% attacks, 9 families.
    pub fn unsw_like(n_flows: usize, seed: u64) -> Self {
        Self::blobs(n_flows, 400, 0.04, 9, 3.0, seed)
    }

    pub fn num_features(&self) -> usize {
        self.benign_mean.len()
    }

    fn reserved_attackers(&self) -> usize {
        self.attackers_per_family * self.families.len()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(FeaeError::Config(m));
        if self.n_flows == 0 {
            return bad("n_flows must be positive".into());
        }
        if !(self.attack_fraction > 0.0 && self.attack_fraction < 0.5) {
            return bad(format!(
                "attack_fraction {} outside (0, 0.5)",
                self.attack_fraction
            ));
        }
        if self.families.is_empty() {
            return bad("at least one attack family is required".into());
        }
        let wsum: f64 = self.families.iter().map(|f| f.weight).sum();
        if (wsum - 1.0).abs() > 1e-9 || self.families.iter().any(|f| f.weight < 0.0) {
            return bad(format!(
                "family weights must be non-negative and sum to 1 (got {wsum})"
            ));
        }
        let d = self.num_features();
        if d == 0 || self.benign_std.len() != d {
            return bad("benign mean/std lengths disagree".into());
        }
        for f in &self.families {
            if f.mean.len() != d || f.std.len() != d {
                return bad(format!("family {} has the wrong feature width", f.name));
            }
        }
        let all_std = self
            .benign_std
            .iter()
            .chain(self.families.iter().flat_map(|f| f.std.iter()));
        if all_std.clone().any(|&s| !(s >= 0.0 && s.is_finite())) {
            return bad("standard deviations must be finite and non-negative".into());
        }
        if self.attackers_per_family == 0 {
            return bad("attackers_per_family must be positive".into());
        }
        if self.n_hosts < self.reserved_attackers() + self.heavy_hosts.max(2) {
            return bad(format!(
                "n_hosts {} too small for the reserved attacker pools",
                self.n_hosts
            ));
        }
        if self.heavy_weight <= 0.0 {
            return bad("heavy_weight must be positive".into());
        }
        Ok(())
    }

    /// Attack counts per family: largest-remainder apportionment of
    /// `round(attack_fraction * n_flows)` by family weight.
    pub fn family_counts(&self) -> Vec<usize> {
        let total = (self.attack_fraction * self.n_flows as f64).round() as usize;
        let quotas: Vec<f64> = self
            .families
            .iter()
            .map(|f| f.weight * total as f64)
            .collect();
        let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
        let mut rest = total - counts.iter().sum::<usize>();
        let mut order: Vec<usize> = (0..quotas.len()).collect();
        order.sort_by(|&a, &b| {
            let (ra, rb) = (quotas[a] - quotas[a].floor(), quotas[b] - quotas[b].floor());
            rb.total_cmp(&ra).then(a.cmp(&b))
        });
        for i in order {
            if rest == 0 {
                break;
            }
            counts[i] += 1;
            rest -= 1;
        }
        counts
    }
}

fn host_name(i: usize) -> String {
    format!("10.{}.{}.{}", i / 65_536, (i / 256) % 256, i % 256)
}

fn draw_features<R: Rng>(rng: &mut R, mean: &[f64], std: &[f64]) -> Vec<f64> {
    mean.iter()
        .zip(std)
        .map(|(&m, &s)| {
            let v = if s > 0.0 {
                Normal::new(m, s).expect("validated std").sample(rng)
            } else {
                m
            };
            v.clamp(0.0, 1.0)
        })
        .collect()
}

pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<FlowDataset> {
    cfg.validate()?;
    let mut rng = stream_rng(cfg.seed, Stream::Synthetic);

    let counts = cfg.family_counts();
    let mut kinds: Vec<Option<usize>> = vec![None; cfg.n_flows];
    let mut pos = 0;
    for (f, &c) in counts.iter().enumerate() {
        for slot in &mut kinds[pos..pos + c] {
            *slot = Some(f);
        }
        pos += c;
    }
    kinds.shuffle(&mut rng);

    let n_ordinary = cfg.n_hosts - cfg.reserved_attackers();
    let weights: Vec<f64> = (0..n_ordinary)
        .map(|h| {
            if h < cfg.heavy_hosts {
                cfg.heavy_weight
            } else {
                1.0
            }
        })
        .collect();
    let endpoint = WeightedIndex::new(&weights).map_err(|e| FeaeError::Config(e.to_string()))?;

    let mut records = Vec::with_capacity(cfg.n_flows);
    for kind in kinds {
        let record = match kind {
            None => {
                let s = endpoint.sample(&mut rng);
                let mut d = endpoint.sample(&mut rng);
                while d == s {
                    d = endpoint.sample(&mut rng);
                }
                let x = draw_features(&mut rng, &cfg.benign_mean, &cfg.benign_std);
                FlowRecord::benign(&host_name(s), &host_name(d), x)
            }
            Some(f) => {
                let fam = &cfg.families[f];
                let attacker = n_ordinary
                    + f * cfg.attackers_per_family
                    + rng.random_range(0..cfg.attackers_per_family);
                let victim = endpoint.sample(&mut rng);
                let x = draw_features(&mut rng, &fam.mean, &fam.std);
                FlowRecord::attack(&host_name(attacker), &host_name(victim), x, &fam.name)
            }
        };
        records.push(record);
    }
    let schema = if cfg.num_features() == NF_V2_FEATURES.len() {
        NF_V2_FEATURES.iter().map(|s| s.to_string()).collect()
    } else {
        (0..cfg.num_features())
            .map(|j| format!("FEATURE_{j}"))
            .collect()
    };
    FlowDataset::new(records, schema, format!("synthetic(seed={})", cfg.seed))
}
