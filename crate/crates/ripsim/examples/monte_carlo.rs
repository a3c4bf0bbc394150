//! Replicated simulation of F_k with the empirical law checked against the
//! analytic sandwich.

use ripsim::analytic::{expectation_bounds, variance_bounds, RipsParams};
use ripsim::decomp::enumerate_classes;
use ripsim::montecarlo::run_experiment;

fn main() -> ripsim::Result<()> {
    let p = RipsParams::new(3, 100.0, 0.05, 1)?;
    let summary = run_experiment(&p, 5_000, 42)?;

    println!(
        "{} replications at d={}, t={}, delta={}, k={}",
        summary.replications, p.d, p.t, p.delta, p.k
    );
    println!("empirical mean: {:.4}", summary.empirical_mean);
    println!("empirical var:  {:.4}", summary.empirical_var);

    let e = expectation_bounds(&p)?;
    let v = variance_bounds(&p, &enumerate_classes(p.k + 1, 2)?)?;
    println!("mean sandwich:  [{:.4}, {:.4}]", e.lower, e.upper);
    println!("var sandwich:   [{:.4}, {:.4}]", v.lower, v.upper);

    if let Some(w1) = summary.w1_to_normal {
        println!("W1 distance of standardized samples to N(0,1): {w1:.4}");
    }

    // same seed, same summary — replications are independent streams, so the
    // result does not depend on the worker count either
    let again = run_experiment(&p, 5_000, 42)?;
    assert_eq!(summary, again);
    println!("rerun with seed 42 is bit-identical");
    Ok(())
}
