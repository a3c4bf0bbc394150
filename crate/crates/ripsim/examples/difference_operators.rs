//! Add-one-cost (difference) operators and their analytic moment bounds.
//!
//! D_x F_k counts the k-simplices created by inserting a point at x; the
//! second-order operator iterates this for two insertions. Moments of these
//! operators drive the Malliavin-Stein convergence rates.

use ripsim::analytic::{derivative_moment_bound, DerivativeMomentKind, RipsParams};
use ripsim::geometry::sample_poisson;
use ripsim::montecarlo::diff_operator_moments;
use ripsim::rips::{count_simplices, diff1};

fn main() -> ripsim::Result<()> {
    let p = RipsParams::new(2, 50.0, 0.1, 1)?;

    // the identity D_x F = F(cloud + x) - F(cloud), spelled out once
    let cloud = sample_poisson(p.d, p.t, 5)?;
    let x = [0.0, 0.0];
    let before = count_simplices(&cloud, p.delta, p.k)?.count;
    let mut rows = cloud.to_rows();
    rows.push(x.to_vec());
    let extended = ripsim::geometry::PointCloud::from_points(p.d, rows)?;
    let after = count_simplices(&extended, p.delta, p.k)?.count;
    let d1 = diff1(&cloud, p.delta, p.k, &x)?;
    println!("F = {before}, F after inserting origin = {after}, D_x F = {d1}");
    assert_eq!(after - before, d1);

    // estimated moments vs the closed-form upper bounds
    let x2 = [p.delta / 2.0, 0.0];
    let m = diff_operator_moments(&p, &x, &x2, 5_000, 17)?;
    for (i, power) in [2usize, 3, 4].into_iter().enumerate() {
        let bound = derivative_moment_bound(&p, DerivativeMomentKind::FirstOrder { power })?;
        println!(
            "E[(D_x F)^{power}] = {:.3} +- {:.3}   (bound {:.3})",
            m.first_order[i].value, m.first_order[i].standard_error, bound
        );
    }
    let bound = derivative_moment_bound(
        &p,
        DerivativeMomentKind::SecondOrder {
            probes_within_delta: true,
        },
    )?;
    println!(
        "E[(D2_(x1,x2) F)^4] = {:.3} +- {:.3}   (bound {:.3})",
        m.second_order_fourth.value, m.second_order_fourth.standard_error, bound
    );
    Ok(())
}
