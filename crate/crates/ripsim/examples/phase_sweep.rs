//! Sweep a Poisson-phase schedule over the dimension and watch the total
//! variation distance to the limiting Poisson law shrink.
//!
//! The limit is asymptotic in d; at desk scale the meaningful check is the
//! monotone trend over the feasible dimensions, not an endpoint value.

use ripsim::analytic::{power_law_schedule, PhaseLabel};
use ripsim::montecarlo::phase_sweep;

fn main() -> ripsim::Result<()> {
    // theta = 2, k = 1, delta_d = d^-2; the scheduled intensity grows fast,
    // so d = 8 already needs ~2 million points per cloud and gets refused
    let schedule = power_law_schedule(2.0, 1, 1.0, 2.0, 0.0);
    let outcomes = phase_sweep(&schedule, 1, &[4, 5, 6, 8], 2_000, 11, &PhaseLabel::Poisson(2.0))?;

    println!("d     t            tv_to_poisson(2)");
    for o in &outcomes {
        match &o.result {
            Ok(s) => println!(
                "{:<5} {:<12.1} {:.4}",
                o.d,
                o.t,
                s.tv_to_poisson.unwrap()
            ),
            Err(e) => println!("{:<5} {:<12.1} infeasible: {e}", o.d, o.t),
        }
    }
    Ok(())
}
