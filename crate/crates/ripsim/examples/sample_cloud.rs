//! Sample a Poisson cloud in the unit window and inspect it.
//!
//! Run with: cargo run --example sample_cloud

use ripsim::geometry::{build_grid, neighbors, sample_poisson, uniform_distance};

fn main() -> ripsim::Result<()> {
    let d = 2;
    let t = 120.0; // expected number of points
    let delta = 0.08;

    let cloud = sample_poisson(d, t, 42)?;
    println!("sampled {} points in [-1/2, 1/2]^{d}", cloud.len());

    // fixed-radius neighbor queries go through the cell grid
    let grid = build_grid(&cloud, delta)?;
    let close = neighbors(&grid, &cloud, 0, delta)?;
    println!(
        "point 0 at {:?} has {} neighbors within {delta}",
        cloud.point(0),
        close.len()
    );
    for &j in &close {
        println!(
            "  point {j}: distance {:.4}",
            uniform_distance(cloud.point(0), cloud.point(j))?
        );
    }

    // the same sampler with the same seed replays the identical cloud
    let replay = sample_poisson(d, t, 42)?;
    assert_eq!(replay.to_rows(), cloud.to_rows());
    println!("replay with seed 42 is identical");
    Ok(())
}
