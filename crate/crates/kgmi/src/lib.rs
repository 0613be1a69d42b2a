//! Recovery of K-parent DAG structure by training single-layer multi-head
//! softmax attention on a kernel-guided mutual information objective.
//!
//! The pipeline: a Markov transition kernel on K-tuples drives sequences whose
//! node i is drawn conditionally on its parents' states; per-head information
//! tables score every candidate parent; gradient ascent on the attention
//! objective concentrates each column on the true parent slots; a decoder
//! reads the trained attention back into a graph.

pub mod attention;
pub mod decoder;
pub mod estimator;
pub mod experiment;
pub mod exactdist;
pub mod graph;
pub mod infometric;
pub mod kernel;
pub mod linalg;
pub mod sampler;
