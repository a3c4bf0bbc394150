//! Closed-form sandwich bounds for E[F_k] and V[F_k], and the phase
//! trichotomy of intensity schedules.

use ripsim::analytic::{
    classify_phase, expectation_bounds, integral_ie, integral_iv, power_law_schedule,
    rate_diagnostics, schedule_intensity, variance_bounds, Regime, RipsParams,
};
use ripsim::decomp::enumerate_classes;

fn main() -> ripsim::Result<()> {
    // the exact integrals behind the bounds
    println!("I_E(1, k) = k + 1:");
    for k in 1..=4 {
        println!("  k = {k}: {}", integral_ie(1, k)?);
    }
    println!("I_V(3, 2, r):");
    for r in 0..=2 {
        println!("  r = {r}: {}", integral_iv(3, 2, r)?);
    }

    // expectation and variance sandwiches at a concrete parameter point
    let p = RipsParams::new(3, 100.0, 0.05, 2)?;
    let e = expectation_bounds(&p)?;
    println!(
        "\nE[F_2] at d=3, t=100, delta=0.05: [{:.6}, {:.6}]",
        e.lower, e.upper
    );
    let decomp = enumerate_classes(p.k + 1, 2)?;
    let v = variance_bounds(&p, &decomp)?;
    println!("V[F_2]:                          [{:.6}, {:.6}]", v.lower, v.upper);

    // the Poisson-phase schedule: pick t so the phase expression equals theta
    let t = schedule_intensity(2.0, 1, 6, 0.1)?;
    println!("\nintensity for theta = 2 at d = 6, delta = 0.1: t = {t}");

    // classify the three canonical power-law schedules
    for (name, growth) in [("gaussian", 1.0), ("poisson", 0.0), ("vanishing", -1.0)] {
        let schedule = power_law_schedule(2.0, 1, 1.0, 2.0, growth);
        let c = classify_phase(schedule, 1, 50)?;
        println!("growth d^{growth:+}: {} (expected {name})", c.label);
    }

    // order-of-magnitude convergence rates in the sparse regime
    let rates = rate_diagnostics(&p, Regime::Sparse)?;
    println!(
        "\nsparse-regime rate orders at the same point: W1 ~ {:.3e}, TV ~ {:.3e}",
        rates.wasserstein_order,
        rates.tv_order.unwrap()
    );
    Ok(())
}
