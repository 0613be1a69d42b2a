//! Exact node marginals and pairwise joints by brute-force enumeration of all
//! S^T state assignments, each weighted by the stationary root-tuple law
//! times the kernel factors along the graph. This is the ground truth that
//! the information tables are built from and that sampled frequencies are
//! checked against; a size guard keeps it to graphs where S^T fits in memory
//! and patience.

use crate::graph::Dag;
use crate::kernel::{pack, Kernel, KernelError, KernelStats};
use crate::linalg::Matrix;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExactError {
    #[error("state space S^T = {size:.3e} exceeds the enumeration guard 1e7")]
    StateSpaceTooLarge { size: f64 },
    #[error("graph has {roots} roots but the kernel conditions on {k} slots")]
    RootCountMismatch { roots: usize, k: usize },
    #[error("graph max in-degree {dag_k} exceeds kernel slot count {kernel_k}")]
    InDegreeExceedsKernel { dag_k: usize, kernel_k: usize },
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// Exact joint law of a (dag, kernel) pair, reduced to the marginals the
/// information tables need.
#[derive(Debug, Clone)]
pub struct JointDist {
    pub t: usize,
    pub s: usize,
    /// marginals[i][s] = P(S_i = s)
    pub marginals: Vec<Vec<f64>>,
    /// pairs[i][j].get(a, b) = P(S_i = a, S_j = b) for i != j
    pairs: Vec<Vec<Matrix>>,
}

impl JointDist {
    pub fn marginal(&self, i: usize) -> &[f64] {
        &self.marginals[i]
    }

    /// P(S_i = a, S_j = b) as an S x S matrix indexed [a][b].
    pub fn pair(&self, i: usize, j: usize) -> &Matrix {
        assert_ne!(i, j);
        &self.pairs[i][j]
    }

    /// Largest deviation of any node marginal from the reference vector.
    pub fn max_marginal_deviation(&self, reference: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for m in &self.marginals {
            for (a, b) in m.iter().zip(reference) {
                worst = worst.max((a - b).abs());
            }
        }
        worst
    }
}

pub fn enumerate(dag: &Dag, stats: &KernelStats) -> Result<JointDist, ExactError> {
    let t = dag.node_count();
    let s = stats.s();
    let k = stats.k();
    let size = (s as f64).powi(t as i32);
    if size > 1e7 {
        return Err(ExactError::StateSpaceTooLarge { size });
    }
    if dag.k() > k {
        return Err(ExactError::InDegreeExceedsKernel { dag_k: dag.k(), kernel_k: k });
    }
    if dag.roots().len() != k {
        return Err(ExactError::RootCountMismatch { roots: dag.roots().len(), k });
    }

    let mut reduced: Vec<Option<Kernel>> = vec![None; k];
    for i in 0..t {
        let d = dag.in_degree(i);
        if d > 0 && d < k && reduced[d].is_none() {
            reduced[d] = Some(stats.kernel.reduce(&stats.mu, d)?);
        }
    }

    let mut marginals = vec![vec![0.0; s]; t];
    let mut pairs = vec![vec![Matrix::zeros(s, s); t]; t];
    let mut assign = vec![0usize; t];
    let mut parent_states = Vec::with_capacity(k);
    loop {
        let mut w = stats.m_at(
            &dag.roots().iter().map(|&r| assign[r]).collect::<Vec<_>>(),
        );
        if w > 0.0 {
            for i in 0..t {
                let ps = dag.parents(i);
                if ps.is_empty() {
                    continue;
                }
                parent_states.clear();
                parent_states.extend(ps.iter().map(|&p| assign[p]));
                let row = if ps.len() == k {
                    stats.kernel.row(pack(s, &parent_states))
                } else {
                    reduced[ps.len()].as_ref().unwrap().row(pack(s, &parent_states))
                };
                w *= row[assign[i]];
                if w == 0.0 {
                    break;
                }
            }
        }
        if w > 0.0 {
            for i in 0..t {
                marginals[i][assign[i]] += w;
                for j in 0..t {
                    if i != j {
                        pairs[i][j].add_at(assign[i], assign[j], w);
                    }
                }
            }
        }
        // odometer increment
        let mut pos = t;
        while pos > 0 {
            pos -= 1;
            assign[pos] += 1;
            if assign[pos] < s {
                break;
            }
            assign[pos] = 0;
            if pos == 0 {
                return Ok(JointDist { t, s, marginals, pairs });
            }
        }
    }
}
