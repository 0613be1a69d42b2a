//! Why the scores must differ per head: a head-blind mutual-information
//! table gives both attention heads the same landscape, so they climb to
//! the same parent and half the structure is never found. The
//! kernel-guided table tilts each head toward a different parent slot.

use kgmi::attention::{train, TrainOptions};
use kgmi::exactdist::enumerate;
use kgmi::graph::Dag;
use kgmi::infometric::{kgmi_table, naive_table, FKind};
use kgmi::kernel::{analyze, Kernel};

fn argmax_col(m: &kgmi::linalg::Matrix, i: usize) -> usize {
    (0..i).max_by(|&a, &b| m.get(a, i).partial_cmp(&m.get(b, i)).unwrap()).unwrap()
}

fn main() {
    let dag = Dag::by_name("ten").unwrap();
    let kernel = Kernel::benchmark(&[0.0; 9]).unwrap();
    let stats = analyze(&kernel).unwrap();
    let dist = enumerate(&dag, &stats).unwrap();

    let blind = naive_table(&dag, &dist, FKind::Kl);
    let guided = kgmi_table(&dag, &stats, &dist, FKind::Kl);
    let opts = TrainOptions { log_every: 0, ..TrainOptions::default() };
    let blind_run = train(&blind, &dag, &opts).unwrap();
    let guided_run = train(&guided, &dag, &opts).unwrap();

    println!("trained argmax per node (head1/head2), ten-node graph, KL scores");
    println!();
    println!("node  true parents  head-blind     kernel-guided");
    let mut collapsed = 0;
    for i in 2..dag.node_count() {
        let b = (
            argmax_col(&blind_run.attention[0], i),
            argmax_col(&blind_run.attention[1], i),
        );
        let g = (
            argmax_col(&guided_run.attention[0], i),
            argmax_col(&guided_run.attention[1], i),
        );
        if b.0 == b.1 {
            collapsed += 1;
        }
        println!(
            "{i:>4}  {:<12}  {:<13}  {:?}",
            format!("{:?}", dag.parents(i)),
            format!("{b:?} {}", if b.0 == b.1 { "<- collapsed" } else { "" }),
            g
        );
    }
    println!();
    println!(
        "head-blind: {collapsed}/{} nodes collapsed onto one parent; kernel-guided: heads split onto the true pair",
        dag.node_count() - 2
    );
}
