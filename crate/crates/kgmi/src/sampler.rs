//! Sequence generation. A sequence assigns one state per node: the K root
//! nodes receive a tuple drawn jointly from the stationary law M, then every
//! non-root node in id order draws from the kernel row selected by its
//! parents' states (via the slot-reduced kernel when its in-degree is below
//! K). Extended sequences append K i.i.d. uniform tail states and one label
//! drawn from the kernel row at the tail tuple; the estimator consumes those.
//!
//! Each sequence runs on its own ChaCha12 stream (master seed, stream =
//! sequence index), so datasets are a pure function of (dag, kernel, seed, N,
//! extended) no matter how sampling is scheduled. Within a stream the draw
//! order is fixed: root tuple, non-root body nodes in id order, tail uniforms,
//! label.

use crate::graph::Dag;
use crate::kernel::{pack, unpack, Kernel, KernelError, KernelStats};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use std::io::{BufRead, Write};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SampleError {
    #[error("graph has {roots} roots but the kernel conditions on {k} slots")]
    RootCountMismatch { roots: usize, k: usize },
    #[error("graph max in-degree {dag_k} exceeds kernel slot count {kernel_k}")]
    InDegreeExceedsKernel { dag_k: usize, kernel_k: usize },
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("dataset io: {0}")]
    Io(#[from] std::io::Error),
    #[error("dataset parse: {0}")]
    Parse(String),
}

fn draw_categorical(rng: &mut ChaCha12Rng, probs: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (c, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return c;
        }
    }
    probs.len() - 1
}

pub struct Sampler<'a> {
    dag: &'a Dag,
    stats: &'a KernelStats,
    /// Reduced kernels indexed by in-degree; slot `dag.k()` holds the full
    /// kernel's worth only when some node actually needs it.
    reduced: Vec<Option<Kernel>>,
}

impl<'a> Sampler<'a> {
    pub fn new(dag: &'a Dag, stats: &'a KernelStats) -> Result<Sampler<'a>, SampleError> {
        let k = stats.k();
        if dag.k() > k {
            return Err(SampleError::InDegreeExceedsKernel { dag_k: dag.k(), kernel_k: k });
        }
        if dag.roots().len() != k {
            return Err(SampleError::RootCountMismatch { roots: dag.roots().len(), k });
        }
        let mut reduced: Vec<Option<Kernel>> = vec![None; k];
        for i in 0..dag.node_count() {
            let d = dag.in_degree(i);
            if d > 0 && d < k && reduced[d].is_none() {
                reduced[d] = Some(stats.kernel.reduce(&stats.mu, d)?);
            }
        }
        Ok(Sampler { dag, stats, reduced })
    }

    pub fn body_len(&self) -> usize {
        self.dag.node_count()
    }

    pub fn extended_len(&self) -> usize {
        self.dag.node_count() + self.stats.k() + 1
    }

    fn fill_body(&self, rng: &mut ChaCha12Rng, seq: &mut Vec<usize>) {
        let s = self.stats.s();
        let k = self.stats.k();
        let t = self.dag.node_count();
        seq.resize(t, 0);
        let tuple = unpack(s, k, draw_categorical(rng, &self.stats.m));
        for (slot, &r) in self.dag.roots().iter().enumerate() {
            seq[r] = tuple[slot];
        }
        for i in 0..t {
            let ps = self.dag.parents(i);
            if ps.is_empty() {
                continue;
            }
            let parent_states: Vec<usize> = ps.iter().map(|&p| seq[p]).collect();
            let row = if ps.len() == k {
                self.stats.kernel.row(pack(s, &parent_states))
            } else {
                let red = self.reduced[ps.len()].as_ref().unwrap();
                red.row(pack(s, &parent_states))
            };
            seq[i] = draw_categorical(rng, row);
        }
    }

    fn stream(&self, master_seed: u64, index: u64) -> ChaCha12Rng {
        let mut rng = ChaCha12Rng::seed_from_u64(master_seed);
        rng.set_stream(index);
        rng
    }

    /// Length-T body sequence on stream `index`.
    pub fn sequence(&self, master_seed: u64, index: u64) -> Vec<usize> {
        let mut rng = self.stream(master_seed, index);
        let mut seq = Vec::new();
        self.fill_body(&mut rng, &mut seq);
        seq
    }

    /// Length T+K+1: body, K uniform tail states, then a label drawn from the
    /// kernel row at the tail tuple.
    pub fn extended(&self, master_seed: u64, index: u64) -> Vec<usize> {
        let mut rng = self.stream(master_seed, index);
        let mut seq = Vec::new();
        self.fill_body(&mut rng, &mut seq);
        let s = self.stats.s();
        let k = self.stats.k();
        let tail_start = seq.len();
        for _ in 0..k {
            seq.push(rng.random_range(0..s));
        }
        let tail = seq[tail_start..].to_vec();
        seq.push(draw_categorical(&mut rng, self.stats.kernel.row(pack(s, &tail))));
        seq
    }

    pub fn dataset(&self, n: usize, master_seed: u64, extended: bool) -> Dataset {
        assert!(n >= 1);
        let rows = (0..n)
            .map(|i| {
                if extended {
                    self.extended(master_seed, i as u64)
                } else {
                    self.sequence(master_seed, i as u64)
                }
            })
            .collect();
        Dataset {
            t: self.dag.node_count(),
            s: self.stats.s(),
            k: self.stats.k(),
            extended,
            seed: master_seed,
            rows,
        }
    }
}

/// N homogeneous sequences plus the metadata needed to regenerate them.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub t: usize,
    pub s: usize,
    pub k: usize,
    pub extended: bool,
    pub seed: u64,
    pub rows: Vec<Vec<usize>>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Header line `T=..,S=..,K=..,extended=..,seed=..`, then one sequence per
    /// line as comma-separated integers.
    pub fn write_to(&self, w: &mut impl Write) -> Result<(), SampleError> {
        writeln!(
            w,
            "T={},S={},K={},extended={},seed={}",
            self.t,
            self.s,
            self.k,
            if self.extended { 1 } else { 0 },
            self.seed
        )?;
        for row in &self.rows {
            let line: Vec<String> = row.iter().map(|x| x.to_string()).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }

    pub fn read_from(r: impl BufRead) -> Result<Dataset, SampleError> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| SampleError::Parse("empty file".into()))??;
        let mut t = None;
        let mut s = None;
        let mut k = None;
        let mut extended = None;
        let mut seed = None;
        for field in header.split(',') {
            let (key, val) = field
                .split_once('=')
                .ok_or_else(|| SampleError::Parse(format!("bad header field {field:?}")))?;
            let parsed: u64 = val
                .parse()
                .map_err(|_| SampleError::Parse(format!("bad header value {field:?}")))?;
            match key {
                "T" => t = Some(parsed as usize),
                "S" => s = Some(parsed as usize),
                "K" => k = Some(parsed as usize),
                "extended" => extended = Some(parsed != 0),
                "seed" => seed = Some(parsed),
                _ => return Err(SampleError::Parse(format!("unknown header key {key:?}"))),
            }
        }
        let (t, s, k, extended, seed) = match (t, s, k, extended, seed) {
            (Some(t), Some(s), Some(k), Some(e), Some(sd)) => (t, s, k, e, sd),
            _ => return Err(SampleError::Parse("incomplete header".into())),
        };
        let want_len = if extended { t + k + 1 } else { t };
        let mut rows = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let row: Result<Vec<usize>, _> =
                line.split(',').map(|x| x.trim().parse::<usize>()).collect();
            let row = row.map_err(|_| SampleError::Parse(format!("bad sequence line {line:?}")))?;
            if row.len() != want_len {
                return Err(SampleError::Parse(format!(
                    "sequence length {} does not match header ({want_len})",
                    row.len()
                )));
            }
            if let Some(&bad) = row.iter().find(|&&x| x >= s) {
                return Err(SampleError::Parse(format!("state {bad} out of range 0..{s}")));
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(SampleError::Parse("dataset has no sequences".into()));
        }
        Ok(Dataset { t, s, k, extended, seed, rows })
    }
}
