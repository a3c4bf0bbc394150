//! Count the simplices of a random Vietoris-Rips complex.
//!
//! A k-simplex is a (k+1)-subset of points with all pairwise L-infinity
//! distances at most delta, i.e. a (k+1)-clique of the geometric graph.

use ripsim::geometry::sample_poisson;
use ripsim::rips::{count_simplices, f_vector, naive_count};

fn main() -> ripsim::Result<()> {
    let cloud = sample_poisson(3, 200.0, 7)?;
    let delta = 0.12;

    let fv = f_vector(&cloud, delta, 4)?;
    println!("f-vector of the clique complex up to dimension 4:");
    for sc in &fv.counts {
        println!("  f_{} = {}", sc.k, sc.count);
    }

    // per-k counting gives the same numbers
    for k in 0..=4 {
        assert_eq!(count_simplices(&cloud, delta, k)?.count, fv.counts[k].count);
    }

    // the exhaustive reference counter is available for small clouds
    let small = sample_poisson(2, 25.0, 3)?;
    let fast = count_simplices(&small, 0.2, 2)?.count;
    let slow = naive_count(&small, 0.2, 2)?.count;
    println!("small cloud: grid count {fast}, subset-enumeration count {slow}");
    assert_eq!(fast, slow);
    Ok(())
}
