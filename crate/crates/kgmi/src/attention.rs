//! The single-layer multi-head attention model and its gradient-ascent
//! trainer. Each head holds a trainable T x T score matrix; column i's
//! attention is the softmax of rows j < i (strictly causal), so column 0 is
//! empty and zero initialization gives uniform attention. The objective is
//! the attention-weighted table sum, whose gradient per column is the
//! classic softmax mean-field form a_j (t_j - sum_k a_k t_k) / (KT).
//!
//! Training ascends that objective. In population mode the trajectory is
//! clean: the objective is nondecreasing, attention mass at each column's
//! table argmax grows monotonically, and the run stops once every eligible
//! column holds more than 1 - eps of its mass there. Eligible means: a
//! non-root target with at least one attendable position and a positive
//! table maximum; everything else either has nothing to learn (zero root
//! columns stay exactly uniform) or nothing to concentrate on.

use crate::graph::Dag;
use crate::infometric::{table_stats, KgmiTable};
use crate::linalg::Matrix;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum AttentionError {
    #[error("bad hyperparameter: {0}")]
    BadHyperparameter(String),
    #[error("table is {table_t} nodes x {table_k} heads, state is {state_t} x {state_k}")]
    DimensionMismatch { table_t: usize, table_k: usize, state_t: usize, state_k: usize },
    #[error("non-finite update at epoch {epoch}: learning rate or table scale too large")]
    NonFiniteUpdate { epoch: u64 },
    #[error("gap {0} must be strictly positive")]
    DomainError(f64),
}

/// Trainable state: K score matrices plus the hyperparameters they were
/// initialized with.
#[derive(Debug, Clone)]
pub struct AttentionState {
    pub q: Vec<Matrix>,
    pub eta: f64,
    pub eps_attn: f64,
    pub epoch: u64,
}

impl AttentionState {
    pub fn init(t: usize, k: usize, eta: f64, eps_attn: f64) -> Result<Self, AttentionError> {
        if t < 2 {
            return Err(AttentionError::BadHyperparameter(format!("T = {t} must be >= 2")));
        }
        if k < 1 {
            return Err(AttentionError::BadHyperparameter("K must be >= 1".into()));
        }
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(AttentionError::BadHyperparameter(format!(
                "eta = {eta} must be positive and finite"
            )));
        }
        if !(0.0 < eps_attn && eps_attn < 1.0) {
            return Err(AttentionError::BadHyperparameter(format!(
                "eps_attn = {eps_attn} must lie in (0,1)"
            )));
        }
        Ok(AttentionState { q: vec![Matrix::zeros(t, t); k], eta, eps_attn, epoch: 0 })
    }

    pub fn t(&self) -> usize {
        self.q[0].rows()
    }

    pub fn k(&self) -> usize {
        self.q.len()
    }

    /// Column-wise masked softmax of every head's score matrix.
    pub fn attention(&self) -> Result<Vec<Matrix>, AttentionError> {
        self.q
            .iter()
            .map(|q| {
                let mut a = Matrix::zeros(q.rows(), q.cols());
                softmax_columns(q, &mut a, self.epoch)?;
                Ok(a)
            })
            .collect()
    }
}

fn softmax_columns(q: &Matrix, out: &mut Matrix, epoch: u64) -> Result<(), AttentionError> {
    let t = q.rows();
    for i in 1..t {
        let mut mx = f64::NEG_INFINITY;
        for j in 0..i {
            mx = mx.max(q.get(j, i));
        }
        if !mx.is_finite() {
            return Err(AttentionError::NonFiniteUpdate { epoch });
        }
        let mut den = 0.0;
        for j in 0..i {
            let e = (q.get(j, i) - mx).exp();
            out.set(j, i, e);
            den += e;
        }
        for j in 0..i {
            let v = out.get(j, i) / den;
            out.set(j, i, v);
        }
    }
    Ok(())
}

fn check_dims(attn: &[Matrix], table: &KgmiTable) -> Result<(), AttentionError> {
    if attn.len() != table.k() || attn[0].rows() != table.t() {
        return Err(AttentionError::DimensionMismatch {
            table_t: table.t(),
            table_k: table.k(),
            state_t: attn[0].rows(),
            state_k: attn.len(),
        });
    }
    Ok(())
}

/// L = (1/(KT)) sum_l sum_{j<i} table[l][j,i] attn[l][j,i].
pub fn objective(attn: &[Matrix], table: &KgmiTable) -> Result<f64, AttentionError> {
    check_dims(attn, table)?;
    let t = table.t();
    let norm = 1.0 / (table.k() * t) as f64;
    let mut total = 0.0;
    for (a, h) in attn.iter().zip(&table.heads) {
        for i in 1..t {
            for j in 0..i {
                total += h.get(j, i) * a.get(j, i);
            }
        }
    }
    Ok(total * norm)
}

/// L* = (1/(KT)) sum_l sum_{non-root i} max_j table[l][j,i]: the objective of
/// attention fully concentrated on each column's best row.
pub fn optimal_objective(table: &KgmiTable, dag: &Dag) -> f64 {
    let stats = table_stats(table, dag);
    let t = table.t();
    let norm = 1.0 / (table.k() * t) as f64;
    let mut total = 0.0;
    for l in 0..table.k() {
        for i in 0..t {
            if let Some(j) = stats.argmax[l][i] {
                total += table.heads[l].get(j, i);
            }
        }
    }
    total * norm
}

/// grad[l][j,i] = (1/(KT)) attn[l][j,i] (table[l][j,i] - sum_k attn[l][k,i] table[l][k,i]).
pub fn gradient(attn: &[Matrix], table: &KgmiTable) -> Result<Vec<Matrix>, AttentionError> {
    check_dims(attn, table)?;
    let t = table.t();
    let norm = 1.0 / (table.k() * t) as f64;
    Ok(attn
        .iter()
        .zip(&table.heads)
        .map(|(a, h)| {
            let mut g = Matrix::zeros(t, t);
            for i in 1..t {
                let mut mbar = 0.0;
                for j in 0..i {
                    mbar += a.get(j, i) * h.get(j, i);
                }
                for j in 0..i {
                    g.set(j, i, norm * a.get(j, i) * (h.get(j, i) - mbar));
                }
            }
            g
        })
        .collect())
}

/// Global epoch bound: 4KT I_max log(I_max/eps) / (eps eta delta) +
/// 4KT^2 log T / (eta delta).
pub fn tau_star(
    k: usize,
    t: usize,
    i_max: f64,
    delta: f64,
    eta: f64,
    eps_attn: f64,
) -> Result<f64, AttentionError> {
    if !(delta > 0.0) {
        return Err(AttentionError::DomainError(delta));
    }
    if !(0.0 < eps_attn && eps_attn < 1.0) {
        return Err(AttentionError::BadHyperparameter(format!("eps_attn = {eps_attn}")));
    }
    let kt = (k * t) as f64;
    Ok(4.0 * kt * i_max * (i_max / eps_attn).ln() / (eps_attn * eta * delta)
        + 4.0 * kt * t as f64 * (t as f64).ln() / (eta * delta))
}

/// Per-column epoch bound with 1-based target index i:
/// 4KT log(1/eps) / (eps eta delta) + 4KT i log i / (eta delta).
pub fn tau_star_node(
    k: usize,
    t: usize,
    i_one_based: usize,
    delta: f64,
    eta: f64,
    eps_attn: f64,
) -> Result<f64, AttentionError> {
    if !(delta > 0.0) {
        return Err(AttentionError::DomainError(delta));
    }
    if !(0.0 < eps_attn && eps_attn < 1.0) {
        return Err(AttentionError::BadHyperparameter(format!("eps_attn = {eps_attn}")));
    }
    let kt = (k * t) as f64;
    let i = i_one_based as f64;
    Ok(4.0 * kt * (1.0 / eps_attn).ln() / (eps_attn * eta * delta)
        + 4.0 * kt * i * i.ln() / (eta * delta))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stopping {
    /// Run exactly this many updates.
    FixedEpochs(u64),
    /// Stop once every eligible column concentrates, or at the cap.
    Threshold { cap: u64 },
}

#[derive(Debug, Clone)]
pub struct TrainOptions {
    pub eta: f64,
    pub eps_attn: f64,
    pub stopping: Stopping,
    /// Record stride; 0 records only the first, stopping, and final epochs.
    pub log_every: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            eta: 10.0,
            eps_attn: 0.1,
            stopping: Stopping::Threshold { cap: 5_000_000 },
            log_every: 0,
        }
    }
}

/// One logged snapshot of the training state, taken before that epoch's
/// update.
#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub epoch: u64,
    pub objective: f64,
    pub gap: f64,
    pub grad_inf_norm: f64,
    /// min over eligible (l,i) of attention at the table argmax; 2.0 when
    /// nothing is eligible.
    pub min_star_attention: f64,
    /// max over root targets with >= 2 attendable positions of the distance
    /// from uniform attention; 0.0 when no such target exists.
    pub max_root_deviation: f64,
    /// column_max[l][i], the largest attention weight in the column.
    pub column_max: Vec<Vec<f64>>,
    /// column_argmax[l][i], its row (None for column 0).
    pub column_argmax: Vec<Vec<Option<usize>>>,
}

#[derive(Debug, Clone)]
pub struct TrainResult {
    pub state: AttentionState,
    pub attention: Vec<Matrix>,
    pub records: Vec<TrajectoryRecord>,
    /// First epoch at which every eligible column's star attention exceeded
    /// 1 - eps_attn simultaneously.
    pub stopped_at: Option<u64>,
    pub epochs_run: u64,
    /// first_hit[l][i]: first epoch with attention above 1 - eps_attn at the
    /// table argmax of (l, i); None for ineligible columns or never-hit.
    pub first_hit: Vec<Vec<Option<u64>>>,
    /// The (head, target) pairs the stopping rule watches.
    pub eligible: Vec<(usize, usize)>,
    /// star[l][i]: the table argmax row the concentration is measured at.
    pub star: Vec<Vec<Option<usize>>>,
}

pub fn train(
    table: &KgmiTable,
    dag: &Dag,
    opts: &TrainOptions,
) -> Result<TrainResult, AttentionError> {
    let t = table.t();
    let k = table.k();
    if dag.node_count() != t {
        return Err(AttentionError::DimensionMismatch {
            table_t: t,
            table_k: k,
            state_t: dag.node_count(),
            state_k: k,
        });
    }
    let mut state = AttentionState::init(t, k, opts.eta, opts.eps_attn)?;
    let tstats = table_stats(table, dag);
    let mut eligible = Vec::new();
    let mut star = vec![vec![None; t]; k];
    for l in 0..k {
        for i in 1..t {
            if dag.is_root(i) {
                continue;
            }
            if let Some(j) = tstats.argmax[l][i] {
                star[l][i] = Some(j);
                if table.heads[l].get(j, i) > 0.0 {
                    eligible.push((l, i));
                }
            }
        }
    }
    let l_star = optimal_objective(table, dag);
    let max_epochs = match opts.stopping {
        Stopping::FixedEpochs(n) => n,
        Stopping::Threshold { cap } => cap,
    };
    let threshold = 1.0 - opts.eps_attn;
    let norm = 1.0 / (k * t) as f64;

    let mut attn = vec![Matrix::zeros(t, t); k];
    let mut records = Vec::new();
    let mut stopped_at = None;
    let mut first_hit = vec![vec![None; t]; k];
    let mut epoch = 0u64;
    loop {
        for (q, a) in state.q.iter().zip(&mut attn) {
            softmax_columns(q, a, epoch)?;
        }
        let mut min_star = 2.0f64;
        for &(l, i) in &eligible {
            let j = star[l][i].unwrap();
            let v = attn[l].get(j, i);
            if first_hit[l][i].is_none() && v > threshold {
                first_hit[l][i] = Some(epoch);
            }
            min_star = min_star.min(v);
        }
        let concentrated = min_star > threshold;
        if stopped_at.is_none() && concentrated {
            stopped_at = Some(epoch);
        }
        let done = epoch >= max_epochs
            || (matches!(opts.stopping, Stopping::Threshold { .. }) && concentrated);
        let due = done
            || epoch == 0
            || (opts.log_every > 0 && epoch % opts.log_every == 0)
            || (stopped_at == Some(epoch));
        if due {
            records.push(make_record(epoch, &attn, table, dag, l_star, min_star)?);
        }
        if done {
            break;
        }
        // ascent step, fused with the gradient computation
        for l in 0..k {
            let h = &table.heads[l];
            let a = &attn[l];
            let q = &mut state.q[l];
            for i in 1..t {
                let mut mbar = 0.0;
                for j in 0..i {
                    mbar += a.get(j, i) * h.get(j, i);
                }
                for j in 0..i {
                    let dq = opts.eta * norm * a.get(j, i) * (h.get(j, i) - mbar);
                    if !dq.is_finite() {
                        return Err(AttentionError::NonFiniteUpdate { epoch });
                    }
                    q.add_at(j, i, dq);
                }
            }
        }
        epoch += 1;
        state.epoch = epoch;
    }
    Ok(TrainResult {
        attention: attn,
        records,
        stopped_at,
        epochs_run: epoch,
        first_hit,
        eligible,
        star,
        state,
    })
}

fn make_record(
    epoch: u64,
    attn: &[Matrix],
    table: &KgmiTable,
    dag: &Dag,
    l_star: f64,
    min_star: f64,
) -> Result<TrajectoryRecord, AttentionError> {
    let t = table.t();
    let k = table.k();
    let obj = objective(attn, table)?;
    let grad = gradient(attn, table)?;
    let mut max_root_dev = 0.0f64;
    for a in attn {
        for &i in dag.roots() {
            if i < 2 {
                continue;
            }
            let uniform = 1.0 / i as f64;
            for j in 0..i {
                max_root_dev = max_root_dev.max((a.get(j, i) - uniform).abs());
            }
        }
    }
    let mut column_max = vec![vec![0.0; t]; k];
    let mut column_argmax = vec![vec![None; t]; k];
    for l in 0..k {
        for i in 1..t {
            let mut best = f64::NEG_INFINITY;
            let mut best_j = 0;
            for j in 0..i {
                let v = attn[l].get(j, i);
                if v > best {
                    best = v;
                    best_j = j;
                }
            }
            column_max[l][i] = best;
            column_argmax[l][i] = Some(best_j);
        }
    }
    let grad_inf = grad.iter().fold(0.0f64, |m, g| m.max(g.max_abs()));
    Ok(TrajectoryRecord {
        epoch,
        objective: obj,
        gap: l_star - obj,
        grad_inf_norm: grad_inf,
        min_star_attention: min_star,
        max_root_deviation: max_root_dev,
        column_max,
        column_argmax,
    })
}
