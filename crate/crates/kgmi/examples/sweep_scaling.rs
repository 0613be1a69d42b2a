//! How long training takes as the problem grows. Two sweeps: sequence
//! length T (disjoint copies of the base graph keep the score landscape
//! fixed per block) and the top-two score gap (perturbed kernels at fixed
//! T). Epochs to concentration track T^2 log T in the first and 1/gap in
//! the second.

use kgmi::experiment::{default_delta_pvecs, sweep_delta, sweep_t, RunConfig};

fn main() {
    let cfg = RunConfig { log_every: 0, ..RunConfig::default() };

    println!("sequence-length sweep (threshold 0.1):");
    let t_rep = sweep_t(&cfg, &[1, 2, 3, 4], None).unwrap();
    println!("  T     epochs   T^2 ln T");
    for p in &t_rep.points {
        let x = p.x * p.x * p.x.ln();
        println!("  {:<4}  {:<7}  {:.0}", p.x, p.epoch, x);
    }
    println!(
        "  fit: epochs = {:.3} * T^2 ln T + {:.0}   (r2 = {:.4})",
        t_rep.slope, t_rep.intercept, t_rep.r2
    );

    println!();
    println!("gap sweep (threshold 0.001, four perturbed kernels):");
    let d_cfg = RunConfig { eps_attn: 0.001, ..cfg };
    let d_rep = sweep_delta(&d_cfg, &default_delta_pvecs(), None).unwrap();
    println!("  gap          1/gap    epochs");
    for p in &d_rep.points {
        println!("  {:.6}     {:<7.0}  {}", p.x, 1.0 / p.x, p.epoch);
    }
    println!(
        "  fit: epochs = {:.1} / gap + {:.0}   (r2 = {:.4})",
        d_rep.slope, d_rep.intercept, d_rep.r2
    );
}
