//! Simplex counting for the Vietoris-Rips complex of an L-infinity geometric
//! graph, plus the first and second difference operators (add-one costs) of
//! the k-simplex counting functional.
//!
//! `F_k` counts the (k+1)-subsets of the cloud that are pairwise within
//! `delta` — the k-cliques of the proximity graph. Counting is exact; the
//! accumulator is a checked u128 so overflow surfaces as an error instead of
//! wrapping.

use crate::error::{Error, Result};
use crate::geometry::{build_grid, linf_within, neighbor_pairs, PointCloud};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimplexCount {
    pub k: usize,
    pub count: u128,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FVector {
    pub counts: Vec<SimplexCount>,
}

impl FVector {
    pub fn count(&self, k: usize) -> u128 {
        self.counts[k].count
    }
}

fn validate_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Parameter(format!(
            "radius delta = {delta} must lie in (0, 1)"
        )));
    }
    Ok(())
}

/// True when the radius is outside the analytic range `(0, 1/4)`; counting
/// remains exact but the closed-form bounds no longer apply.
pub fn delta_out_of_analytic_range(delta: f64) -> bool {
    !(delta > 0.0 && delta < 0.25)
}

fn checked_inc(c: &mut u128) -> Result<()> {
    *c = c.checked_add(1).ok_or(Error::Capacity)?;
    Ok(())
}

/// Forward adjacency: for each vertex the sorted list of neighbors with a
/// larger index, so index-increasing clique extension emits each clique once.
fn forward_adjacency(cloud: &PointCloud, delta: f64) -> Result<Vec<Vec<u32>>> {
    let grid = build_grid(cloud, delta)?;
    let mut adj = vec![Vec::new(); cloud.len()];
    for (i, j) in neighbor_pairs(&grid, cloud) {
        adj[i as usize].push(j);
    }
    for list in &mut adj {
        list.sort_unstable();
    }
    Ok(adj)
}

fn sorted_intersection(a: &[u32], b: &[u32]) -> Vec<u32> {
    let mut out = Vec::with_capacity(a.len().min(b.len()));
    let (mut ia, mut ib) = (0, 0);
    while ia < a.len() && ib < b.len() {
        match a[ia].cmp(&b[ib]) {
            std::cmp::Ordering::Less => ia += 1,
            std::cmp::Ordering::Greater => ib += 1,
            std::cmp::Ordering::Equal => {
                out.push(a[ia]);
                ia += 1;
                ib += 1;
            }
        }
    }
    out
}

/// Visits every clique reachable by extending with the candidate set,
/// crediting `counts[depth]` for a clique of `depth + 1` vertices.
fn extend_cliques(
    adj: &[Vec<u32>],
    candidates: &[u32],
    depth: usize,
    max_order: usize,
    counts: &mut [u128],
) -> Result<()> {
    for (pos, &v) in candidates.iter().enumerate() {
        checked_inc(&mut counts[depth])?;
        if depth < max_order {
            let next = sorted_intersection(&candidates[pos + 1..], &adj[v as usize]);
            if !next.is_empty() {
                extend_cliques(adj, &next, depth + 1, max_order, counts)?;
            }
        }
    }
    Ok(())
}

/// Exact count of k-simplices ((k+1)-cliques) at radius `delta`.
pub fn count_simplices(cloud: &PointCloud, delta: f64, k: usize) -> Result<SimplexCount> {
    if k == 0 {
        return Ok(SimplexCount {
            k,
            count: cloud.len() as u128,
        });
    }
    let fv = f_vector(cloud, delta, k)?;
    Ok(fv.counts[k])
}

/// f-vector entries `f_0..f_{k_max}` in one index-increasing clique traversal.
pub fn f_vector(cloud: &PointCloud, delta: f64, k_max: usize) -> Result<FVector> {
    validate_delta(delta)?;
    let mut counts = vec![0u128; k_max + 1];
    counts[0] = cloud.len() as u128;
    if k_max >= 1 && cloud.len() >= 2 {
        let adj = forward_adjacency(cloud, delta)?;
        if k_max == 1 {
            // edges only: no traversal needed
            let mut edges = 0u128;
            for list in &adj {
                edges = edges
                    .checked_add(list.len() as u128)
                    .ok_or(Error::Capacity)?;
            }
            counts[1] = edges;
        } else {
            for i in 0..cloud.len() {
                extend_cliques(&adj, &adj[i], 1, k_max, &mut counts)?;
            }
        }
    }
    Ok(FVector {
        counts: counts
            .into_iter()
            .enumerate()
            .map(|(k, count)| SimplexCount { k, count })
            .collect(),
    })
}

pub const NAIVE_CLOUD_LIMIT: usize = 64;

/// Brute-force oracle: enumerate every (k+1)-subset and test the pairwise
/// indicator directly. Guarded against combinatorial blow-up.
pub fn naive_count(cloud: &PointCloud, delta: f64, k: usize) -> Result<SimplexCount> {
    validate_delta(delta)?;
    if cloud.len() > NAIVE_CLOUD_LIMIT {
        return Err(Error::CloudTooLarge(cloud.len(), NAIVE_CLOUD_LIMIT));
    }
    let n = cloud.len();
    let mut count = 0u128;
    let mut chosen: Vec<usize> = Vec::with_capacity(k + 1);
    fn rec(
        cloud: &PointCloud,
        delta: f64,
        n: usize,
        size: usize,
        start: usize,
        chosen: &mut Vec<usize>,
        count: &mut u128,
    ) -> Result<()> {
        if chosen.len() == size {
            checked_inc(count)?;
            return Ok(());
        }
        for i in start..n {
            if chosen
                .iter()
                .all(|&j| linf_within(cloud.point(j), cloud.point(i), delta))
            {
                chosen.push(i);
                rec(cloud, delta, n, size, i + 1, chosen, count)?;
                chosen.pop();
            }
        }
        Ok(())
    }
    rec(cloud, delta, n, k + 1, 0, &mut chosen, &mut count)?;
    Ok(SimplexCount { k, count })
}

fn validate_probe(cloud: &PointCloud, x: &[f64]) -> Result<()> {
    if x.len() != cloud.dim() {
        return Err(Error::DimensionMismatch {
            left: cloud.dim(),
            right: x.len(),
        });
    }
    if x.iter().any(|c| !(-0.5..=0.5).contains(c)) {
        return Err(Error::Parameter(format!(
            "probe point {x:?} outside the window"
        )));
    }
    Ok(())
}

/// Counts cliques of exactly `size` vertices among `candidates`, where
/// adjacency is the pairwise-within-`delta` relation on the cloud.
fn count_cliques_among(
    cloud: &PointCloud,
    delta: f64,
    candidates: &[usize],
    size: usize,
) -> Result<u128> {
    if size == 0 {
        return Ok(1); // the empty subset
    }
    let mut count = 0u128;
    let mut chosen: Vec<usize> = Vec::with_capacity(size);
    fn rec(
        cloud: &PointCloud,
        delta: f64,
        candidates: &[usize],
        size: usize,
        start: usize,
        chosen: &mut Vec<usize>,
        count: &mut u128,
    ) -> Result<()> {
        if chosen.len() == size {
            checked_inc(count)?;
            return Ok(());
        }
        for pos in start..candidates.len() {
            let i = candidates[pos];
            if chosen
                .iter()
                .all(|&j| linf_within(cloud.point(j), cloud.point(i), delta))
            {
                chosen.push(i);
                rec(cloud, delta, candidates, size, pos + 1, chosen, count)?;
                chosen.pop();
            }
        }
        Ok(())
    }
    rec(cloud, delta, candidates, size, 0, &mut chosen, &mut count)?;
    Ok(count)
}

/// First difference operator `D_x F_k`: the number of k-subsets of the cloud
/// that are pairwise within `delta` and each within `delta` of `x` — the new
/// k-simplices created by adding `x`.
pub fn diff1(cloud: &PointCloud, delta: f64, k: usize, x: &[f64]) -> Result<u128> {
    validate_delta(delta)?;
    if k == 0 {
        return Err(Error::Parameter("simplex order k must be >= 1".into()));
    }
    validate_probe(cloud, x)?;
    let candidates: Vec<usize> = (0..cloud.len())
        .filter(|&j| linf_within(cloud.point(j), x, delta))
        .collect();
    count_cliques_among(cloud, delta, &candidates, k)
}

/// Second difference operator `D^2_{x1,x2} F_k`: the number of (k-1)-subsets
/// pairwise within `delta` and within `delta` of both probes, provided the
/// probes themselves are within `delta`; for k = 1 this is just the indicator
/// that the two probes are neighbors.
pub fn diff2(cloud: &PointCloud, delta: f64, k: usize, x1: &[f64], x2: &[f64]) -> Result<u128> {
    validate_delta(delta)?;
    if k == 0 {
        return Err(Error::Parameter("simplex order k must be >= 1".into()));
    }
    validate_probe(cloud, x1)?;
    validate_probe(cloud, x2)?;
    if !linf_within(x1, x2, delta) {
        return Ok(0);
    }
    let candidates: Vec<usize> = (0..cloud.len())
        .filter(|&j| {
            linf_within(cloud.point(j), x1, delta) && linf_within(cloud.point(j), x2, delta)
        })
        .collect();
    count_cliques_among(cloud, delta, &candidates, k - 1)
}
