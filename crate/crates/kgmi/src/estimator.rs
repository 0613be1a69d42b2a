//! Empirical Pearson chi-squared tables from extended sequence datasets.
//! Each sequence contributes S * 1{S_i = label, S_j = tail_l} / (mu_hat +
//! kappa) - 1, where the label is the final appended state, tail_l the l-th
//! appended state, and mu_hat the sequence's own body occupancy at the label
//! state. Averaging over sequences approximates the population chi-squared
//! table up to a bias set by the 1/T granularity of mu_hat and the uniform
//! tail law; at T = 10 that bias is large in absolute terms yet preserves
//! the column argmax in expectation, which is what recovery needs.
//!
//! Bootstrap resampling (seeded, deterministic) supplies per-entry standard
//! errors, since no usable error constants exist in closed form.

use crate::infometric::{FKind, KgmiTable, TableMode};
use crate::linalg::Matrix;
use crate::sampler::Dataset;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EstimatorError {
    #[error("empty index set")]
    EmptyIndexSet,
    #[error("index {index} outside the sequence length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("dataset is not extended; the estimator needs tail and label states")]
    NotExtended,
    #[error("head {l} out of range for K = {k}")]
    BadHead { l: usize, k: usize },
    #[error("candidate {j} must come strictly before target {i}")]
    BadPair { j: usize, i: usize },
    #[error("kappa = {0} must be nonnegative")]
    BadKappa(f64),
}

/// Occupancy of `seq` restricted to `index_set`.
pub fn empirical_mu(
    seq: &[usize],
    s: usize,
    index_set: &[usize],
) -> Result<Vec<f64>, EstimatorError> {
    if index_set.is_empty() {
        return Err(EstimatorError::EmptyIndexSet);
    }
    let mut mu = vec![0.0; s];
    for &i in index_set {
        if i >= seq.len() {
            return Err(EstimatorError::IndexOutOfRange { index: i, len: seq.len() });
        }
        mu[seq[i]] += 1.0;
    }
    for v in &mut mu {
        *v /= index_set.len() as f64;
    }
    Ok(mu)
}

/// The smoothing bound kappa <= eps/4 required when targeting accuracy eps.
pub fn kappa_admissible(kappa: f64, eps: f64) -> bool {
    kappa <= eps / 4.0
}

fn check_entry_indices(
    ds: &Dataset,
    l: usize,
    i: usize,
    j: usize,
    kappa: f64,
) -> Result<(), EstimatorError> {
    if !ds.extended {
        return Err(EstimatorError::NotExtended);
    }
    if kappa < 0.0 {
        return Err(EstimatorError::BadKappa(kappa));
    }
    if l >= ds.k {
        return Err(EstimatorError::BadHead { l, k: ds.k });
    }
    if i >= ds.t {
        return Err(EstimatorError::IndexOutOfRange { index: i, len: ds.t });
    }
    if j >= i {
        return Err(EstimatorError::BadPair { j, i });
    }
    Ok(())
}

/// One table entry: head l, target i, candidate j (0-based, j < i).
pub fn chi2_kgmi_estimate(
    ds: &Dataset,
    l: usize,
    i: usize,
    j: usize,
    kappa: f64,
) -> Result<f64, EstimatorError> {
    check_entry_indices(ds, l, i, j, kappa)?;
    let body: Vec<usize> = (0..ds.t).collect();
    let mut total = 0.0;
    for seq in &ds.rows {
        let label = seq[ds.t + ds.k];
        let tail = seq[ds.t + l];
        if seq[i] == label && seq[j] == tail {
            let mu = empirical_mu(seq, ds.s, &body)?;
            total += ds.s as f64 / (mu[label] + kappa);
        }
    }
    Ok(total / ds.rows.len() as f64 - 1.0)
}

/// An estimated table with per-entry bootstrap standard errors.
#[derive(Debug, Clone)]
pub struct EstimatedTable {
    pub table: KgmiTable,
    /// se[l].get(j, i) is the bootstrap standard error of the entry.
    pub se: Vec<Matrix>,
    pub kappa: f64,
    pub resamples: usize,
}

/// Per-sequence sufficient statistics: weight and indicator hit lists.
struct SeqStat {
    weight: f64,
    label_hits: Vec<usize>,
    tail_hits: Vec<Vec<usize>>,
}

fn seq_stats(ds: &Dataset, kappa: f64) -> Result<Vec<SeqStat>, EstimatorError> {
    let body: Vec<usize> = (0..ds.t).collect();
    ds.rows
        .iter()
        .map(|seq| {
            let label = seq[ds.t + ds.k];
            let mu = empirical_mu(seq, ds.s, &body)?;
            Ok(SeqStat {
                weight: ds.s as f64 / (mu[label] + kappa),
                label_hits: (0..ds.t).filter(|&i| seq[i] == label).collect(),
                tail_hits: (0..ds.k)
                    .map(|l| {
                        let tail = seq[ds.t + l];
                        (0..ds.t).filter(|&j| seq[j] == tail).collect()
                    })
                    .collect(),
            })
        })
        .collect()
}

fn accumulate(stats: &[SeqStat], indices: &[usize], t: usize, k: usize) -> Vec<Matrix> {
    let mut acc = vec![Matrix::zeros(t, t); k];
    for &n in indices {
        let st = &stats[n];
        for (l, tails) in st.tail_hits.iter().enumerate() {
            for &j in tails {
                for &i in &st.label_hits {
                    if j < i {
                        acc[l].add_at(j, i, st.weight);
                    }
                }
            }
        }
    }
    let norm = 1.0 / indices.len() as f64;
    for h in &mut acc {
        for i in 1..t {
            for j in 0..i {
                let v = h.get(j, i) * norm - 1.0;
                h.set(j, i, v);
            }
        }
    }
    acc
}

/// Full estimated table plus bootstrap standard errors over `resamples`
/// seeded resamples of the dataset.
pub fn estimate_table(
    ds: &Dataset,
    kappa: f64,
    resamples: usize,
    bootstrap_seed: u64,
) -> Result<EstimatedTable, EstimatorError> {
    if !ds.extended {
        return Err(EstimatorError::NotExtended);
    }
    if kappa < 0.0 {
        return Err(EstimatorError::BadKappa(kappa));
    }
    let n = ds.rows.len();
    let stats = seq_stats(ds, kappa)?;
    let all: Vec<usize> = (0..n).collect();
    let heads = accumulate(&stats, &all, ds.t, ds.k);

    let mut mean = vec![Matrix::zeros(ds.t, ds.t); ds.k];
    let mut msq = vec![Matrix::zeros(ds.t, ds.t); ds.k];
    for rep in 0..resamples {
        let mut rng = ChaCha12Rng::seed_from_u64(bootstrap_seed);
        rng.set_stream(rep as u64);
        let draw: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
        let rep_heads = accumulate(&stats, &draw, ds.t, ds.k);
        for l in 0..ds.k {
            for i in 1..ds.t {
                for j in 0..i {
                    let v = rep_heads[l].get(j, i);
                    mean[l].add_at(j, i, v);
                    msq[l].add_at(j, i, v * v);
                }
            }
        }
    }
    let se = (0..ds.k)
        .map(|l| {
            Matrix::from_fn(ds.t, ds.t, |j, i| {
                if j >= i || resamples < 2 {
                    return 0.0;
                }
                let m = mean[l].get(j, i) / resamples as f64;
                let var =
                    (msq[l].get(j, i) - resamples as f64 * m * m) / (resamples as f64 - 1.0);
                var.max(0.0).sqrt()
            })
        })
        .collect();

    Ok(EstimatedTable {
        table: KgmiTable { heads, mode: TableMode::Estimated, f: FKind::PearsonChi2 },
        se,
        kappa,
        resamples,
    })
}
