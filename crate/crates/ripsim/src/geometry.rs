//! Poisson point process sampling in the unit cube and fixed-radius
//! L-infinity neighbor queries through a sparse cell grid.
//!
//! The observation window is `W = [-1/2, +1/2]^d`. Points are sampled from a
//! stationary Poisson process with intensity `t` (so the point count is
//! `Poisson(t)` since `W` has unit volume) and coordinates i.i.d. uniform.

use std::collections::HashMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{Error, Result};

/// A finite point configuration in `[-1/2, +1/2]^d`.
///
/// Coordinates are stored flat, row-major, for cache-friendly scans over
/// large clouds. All points are pairwise distinct; the sampler rejects
/// duplicate insertions (a probability-zero event that finite precision can
/// nevertheless produce).
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    dim: usize,
    coords: Vec<f64>,
}

impl PointCloud {
    /// Builds a cloud from explicit rows, validating the window invariant.
    pub fn from_points(dim: usize, points: Vec<Vec<f64>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Parameter("dimension must be >= 1".into()));
        }
        let mut coords = Vec::with_capacity(points.len() * dim);
        for p in &points {
            if p.len() != dim {
                return Err(Error::DimensionMismatch {
                    left: dim,
                    right: p.len(),
                });
            }
            for &c in p {
                if !(-0.5..=0.5).contains(&c) {
                    return Err(Error::Parameter(format!(
                        "coordinate {c} outside [-1/2, +1/2]"
                    )));
                }
            }
            coords.extend_from_slice(p);
        }
        let cloud = Self { dim, coords };
        for i in 0..cloud.len() {
            for j in (i + 1)..cloud.len() {
                if cloud.point(i) == cloud.point(j) {
                    return Err(Error::Parameter(format!(
                        "duplicate points at indices {i} and {j}"
                    )));
                }
            }
        }
        Ok(cloud)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    /// Copies the cloud out as row vectors (serialization helper).
    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.iter().map(|p| p.to_vec()).collect()
    }
}

fn mix64(mut h: u64) -> u64 {
    h ^= h >> 33;
    h = h.wrapping_mul(0xff51afd7ed558ccd);
    h ^= h >> 33;
    h = h.wrapping_mul(0xc4ceb9fe1a85ec53);
    h ^= h >> 33;
    h
}

/// Derives an independent stream seed from a base seed and a stream index.
pub(crate) fn derive_seed(base: u64, stream: u64) -> u64 {
    mix64(base ^ mix64(stream.wrapping_add(0x9e3779b97f4a7c15)))
}

fn point_fingerprint(p: &[f64]) -> u64 {
    let mut h = 0x9e3779b97f4a7c15u64;
    for &c in p {
        h = mix64(h ^ c.to_bits());
    }
    h
}

/// Samples a Poisson point process in `W` with intensity `t`.
///
/// The point count is `Poisson(t)` and coordinates are i.i.d. uniform on
/// `[-1/2, +1/2]`. Fully deterministic given `seed`. A freshly drawn point
/// that collides with an existing one is resampled.
pub fn sample_poisson(d: usize, t: f64, seed: u64) -> Result<PointCloud> {
    if d == 0 {
        return Err(Error::Parameter("dimension must be >= 1".into()));
    }
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::Parameter(format!("intensity t = {t} must be > 0")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = Poisson::new(t)
        .map_err(|e| Error::Parameter(format!("poisson sampler: {e}")))?
        .sample(&mut rng) as usize;

    let mut coords = Vec::with_capacity(n * d);
    let mut seen: HashMap<u64, Vec<usize>> = HashMap::with_capacity(n * 2);
    let mut buf = vec![0.0f64; d];
    let mut idx = 0usize;
    while idx < n {
        for c in buf.iter_mut() {
            *c = rng.random::<f64>() - 0.5;
        }
        let fp = point_fingerprint(&buf);
        let bucket = seen.entry(fp).or_default();
        let duplicate = bucket
            .iter()
            .any(|&j| &coords[j * d..(j + 1) * d] == buf.as_slice());
        if duplicate {
            continue; // resample this point
        }
        bucket.push(idx);
        coords.extend_from_slice(&buf);
        idx += 1;
    }
    Ok(PointCloud { dim: d, coords })
}

/// L-infinity distance between two points of equal dimension.
pub fn uniform_distance(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    Ok(linf(x, y))
}

#[inline]
pub(crate) fn linf(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

/// Early-exit test `||x - y||_inf <= delta`.
#[inline]
pub(crate) fn linf_within(x: &[f64], y: &[f64], delta: f64) -> bool {
    x.iter().zip(y).all(|(a, b)| (a - b).abs() <= delta)
}

/// Sparse uniform grid with cell width `delta`.
///
/// Buckets are keyed by the cell index of the first `index_dims` coordinates.
/// Indexing only a prefix of the coordinates keeps the expected bucket
/// occupancy near one even when `(1/delta)^d` dwarfs the point count; the
/// remaining coordinates are resolved by the exact distance filter, so
/// neighbor queries stay exact.
#[derive(Debug, Clone)]
pub struct CellGrid {
    cell_width: f64,
    index_dims: usize,
    cells_per_dim: u64,
    buckets: HashMap<u64, Vec<u32>>,
}

fn choose_index_dims(d: usize, n: usize, delta: f64) -> usize {
    let target = (n.max(2) as f64).ln() / (1.0 / delta).ln();
    let mut g = target.floor() as usize;
    g = g.clamp(1, d).min(6);
    // keep the packed u64 key well away from overflow
    let cells = (1.0 / delta).floor() as u128 + 2;
    while g > 1 && cells.pow(g as u32) > u64::MAX as u128 / 4 {
        g -= 1;
    }
    g
}

impl CellGrid {
    pub fn cell_width(&self) -> f64 {
        self.cell_width
    }

    pub fn index_dims(&self) -> usize {
        self.index_dims
    }

    pub fn bucket_count(&self) -> usize {
        self.buckets.len()
    }

    #[inline]
    fn cell_coord(&self, c: f64) -> u64 {
        // c + 0.5 in [0, 1]; the topmost boundary folds into the last cell
        let idx = ((c + 0.5) / self.cell_width).floor() as i64;
        idx.clamp(0, self.cells_per_dim as i64 - 1) as u64
    }

    #[inline]
    fn key_of(&self, p: &[f64]) -> u64 {
        let mut key = 0u64;
        for &c in &p[..self.index_dims] {
            key = key * self.cells_per_dim + self.cell_coord(c);
        }
        key
    }

    fn coords_of_key(&self, mut key: u64) -> Vec<u64> {
        let mut out = vec![0u64; self.index_dims];
        for slot in out.iter_mut().rev() {
            *slot = key % self.cells_per_dim;
            key /= self.cells_per_dim;
        }
        out
    }
}

/// Builds the cell grid for `cloud` with cell width `delta`.
pub fn build_grid(cloud: &PointCloud, delta: f64) -> Result<CellGrid> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Parameter(format!(
            "grid cell width delta = {delta} must lie in (0, 1)"
        )));
    }
    let index_dims = choose_index_dims(cloud.dim(), cloud.len(), delta);
    let cells_per_dim = ((1.0 / delta).floor() as u64 + 1).max(1);
    let mut grid = CellGrid {
        cell_width: delta,
        index_dims,
        cells_per_dim,
        buckets: HashMap::with_capacity(cloud.len()),
    };
    for (i, p) in cloud.iter().enumerate() {
        let key = grid.key_of(p);
        grid.buckets.entry(key).or_default().push(i as u32);
    }
    Ok(grid)
}

/// Indices `j != i` with `||x_j - x_i||_inf <= delta`, ascending.
pub fn neighbors(
    grid: &CellGrid,
    cloud: &PointCloud,
    i: usize,
    delta: f64,
) -> Result<Vec<usize>> {
    if delta != grid.cell_width {
        return Err(Error::GridMismatch {
            delta,
            cell_width: grid.cell_width,
        });
    }
    if i >= cloud.len() {
        return Err(Error::IndexOutOfRange {
            index: i,
            len: cloud.len(),
        });
    }
    let p = cloud.point(i);
    let center: Vec<u64> = p[..grid.index_dims]
        .iter()
        .map(|&c| grid.cell_coord(c))
        .collect();
    let mut out = Vec::new();
    let mut offset = vec![-1i64; grid.index_dims];
    'cells: loop {
        let mut key = 0u64;
        let mut in_range = true;
        for (dim, &o) in offset.iter().enumerate() {
            let c = center[dim] as i64 + o;
            if c < 0 || c >= grid.cells_per_dim as i64 {
                in_range = false;
                break;
            }
            key = key * grid.cells_per_dim + c as u64;
        }
        if in_range {
            if let Some(bucket) = grid.buckets.get(&key) {
                for &j in bucket {
                    let j = j as usize;
                    if j != i && linf_within(p, cloud.point(j), delta) {
                        out.push(j);
                    }
                }
            }
        }
        // odometer over {-1, 0, +1}^g
        for dim in (0..grid.index_dims).rev() {
            if offset[dim] < 1 {
                offset[dim] += 1;
                continue 'cells;
            }
            offset[dim] = -1;
        }
        break;
    }
    out.sort_unstable();
    Ok(out)
}

/// All unordered pairs `(i, j)`, `i < j`, at L-infinity distance `<= delta`.
///
/// Walks each occupied cell once and joins it against the lexicographically
/// positive half of its `3^g` neighborhood, so every candidate cell pair is
/// visited exactly once.
pub fn neighbor_pairs(grid: &CellGrid, cloud: &PointCloud) -> Vec<(u32, u32)> {
    let delta = grid.cell_width;
    let g = grid.index_dims;
    let mut pairs = Vec::new();

    // lexicographically positive offsets in {-1,0,1}^g
    let mut half_offsets: Vec<Vec<i64>> = Vec::new();
    let mut offset = vec![-1i64; g];
    loop {
        if offset.iter().find(|&&o| o != 0).map(|&o| o > 0) == Some(true) {
            half_offsets.push(offset.clone());
        }
        let mut done = true;
        for dim in (0..g).rev() {
            if offset[dim] < 1 {
                offset[dim] += 1;
                done = false;
                break;
            }
            offset[dim] = -1;
        }
        if done {
            break;
        }
    }

    for (&key, bucket) in &grid.buckets {
        for (a, &i) in bucket.iter().enumerate() {
            for &j in &bucket[a + 1..] {
                if linf_within(cloud.point(i as usize), cloud.point(j as usize), delta) {
                    pairs.push(if i < j { (i, j) } else { (j, i) });
                }
            }
        }
        let coords = grid.coords_of_key(key);
        'offsets: for off in &half_offsets {
            let mut nkey = 0u64;
            for (dim, &o) in off.iter().enumerate() {
                let c = coords[dim] as i64 + o;
                if c < 0 || c >= grid.cells_per_dim as i64 {
                    continue 'offsets;
                }
                nkey = nkey * grid.cells_per_dim + c as u64;
            }
            if let Some(other) = grid.buckets.get(&nkey) {
                for &i in bucket {
                    let p = cloud.point(i as usize);
                    for &j in other {
                        if linf_within(p, cloud.point(j as usize), delta) {
                            pairs.push(if i < j { (i, j) } else { (j, i) });
                        }
                    }
                }
            }
        }
    }
    pairs
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force_neighbors(cloud: &PointCloud, i: usize, delta: f64) -> Vec<usize> {
        (0..cloud.len())
            .filter(|&j| j != i && linf(cloud.point(i), cloud.point(j)) <= delta)
            .collect()
    }

    #[test]
    fn uniform_distance_basics() {
        assert_eq!(uniform_distance(&[0.1, -0.2], &[0.1, -0.2]).unwrap(), 0.0);
        assert_eq!(uniform_distance(&[0.0, 0.0], &[0.3, -0.4]).unwrap(), 0.4);
        let x = vec![-0.5; 7];
        let y = vec![0.5; 7];
        assert_eq!(uniform_distance(&x, &y).unwrap(), 1.0);
        assert!(uniform_distance(&[0.0], &[0.0, 0.0]).is_err());
    }

    #[test]
    fn uniform_distance_is_a_metric() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let d = rng.random_range(1..6usize);
            let p: Vec<Vec<f64>> = (0..3)
                .map(|_| (0..d).map(|_| rng.random::<f64>() - 0.5).collect())
                .collect();
            let dxy = uniform_distance(&p[0], &p[1]).unwrap();
            let dyx = uniform_distance(&p[1], &p[0]).unwrap();
            let dyz = uniform_distance(&p[1], &p[2]).unwrap();
            let dxz = uniform_distance(&p[0], &p[2]).unwrap();
            assert_eq!(dxy, dyx);
            assert!(dxz <= dxy + dyz + 1e-15);
            assert!(dxy > 0.0);
        }
    }

    #[test]
    fn sampler_rejects_bad_params() {
        assert!(sample_poisson(0, 1.0, 0).is_err());
        assert!(sample_poisson(3, 0.0, 0).is_err());
        assert!(sample_poisson(3, -1.0, 0).is_err());
    }

    #[test]
    fn sampler_is_deterministic() {
        let a = sample_poisson(5, 50.0, 7).unwrap();
        let b = sample_poisson(5, 50.0, 7).unwrap();
        assert_eq!(a, b);
        let c = sample_poisson(5, 50.0, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn sampler_stays_in_window_and_distinct() {
        let cloud = sample_poisson(3, 200.0, 11).unwrap();
        for p in cloud.iter() {
            assert!(p.iter().all(|c| (-0.5..=0.5).contains(c)));
        }
        for i in 0..cloud.len() {
            for j in (i + 1)..cloud.len() {
                assert_ne!(cloud.point(i), cloud.point(j));
            }
        }
    }

    #[test]
    fn sampler_poisson_count_moments() {
        // mean and variance of the count both estimate t (Poisson identity)
        let t = 100.0;
        let reps = 10_000;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for i in 0..reps {
            let n = sample_poisson(2, t, 1_000 + i).unwrap().len() as f64;
            sum += n;
            sumsq += n * n;
        }
        let mean = sum / reps as f64;
        let var = sumsq / reps as f64 - mean * mean;
        let se_mean = (t / reps as f64).sqrt();
        assert!(
            (mean - t).abs() <= 4.0 * se_mean,
            "count mean {mean} vs t {t}"
        );
        // SE of the variance estimator for Poisson: sqrt((2t^2 + t)/R)
        let se_var = ((2.0 * t * t + t) / reps as f64).sqrt();
        assert!(
            (var - t).abs() <= 4.0 * se_var,
            "count variance {var} vs t {t}"
        );
    }

    #[test]
    fn grid_single_point_single_bucket() {
        let cloud = PointCloud::from_points(2, vec![vec![0.1, 0.1]]).unwrap();
        let grid = build_grid(&cloud, 0.25).unwrap();
        assert_eq!(grid.bucket_count(), 1);
    }

    #[test]
    fn grid_rejects_bad_delta() {
        let cloud = PointCloud::from_points(2, vec![vec![0.1, 0.1]]).unwrap();
        assert!(build_grid(&cloud, 0.0).is_err());
        assert!(build_grid(&cloud, 1.0).is_err());
    }

    #[test]
    fn close_pair_is_mutually_visible() {
        let cloud =
            PointCloud::from_points(2, vec![vec![0.0, 0.0], vec![0.09, 0.05]]).unwrap();
        let grid = build_grid(&cloud, 0.1).unwrap();
        assert_eq!(neighbors(&grid, &cloud, 0, 0.1).unwrap(), vec![1]);
        assert_eq!(neighbors(&grid, &cloud, 1, 0.1).unwrap(), vec![0]);
    }

    #[test]
    fn neighbors_error_paths() {
        let cloud = PointCloud::from_points(2, vec![vec![0.0, 0.0]]).unwrap();
        let grid = build_grid(&cloud, 0.1).unwrap();
        assert!(matches!(
            neighbors(&grid, &cloud, 5, 0.1),
            Err(Error::IndexOutOfRange { .. })
        ));
        assert!(matches!(
            neighbors(&grid, &cloud, 0, 0.2),
            Err(Error::GridMismatch { .. })
        ));
    }

    #[test]
    fn grid_matches_all_pairs_oracle() {
        let cloud = sample_poisson(3, 500.0, 3).unwrap();
        let delta = 0.1;
        let grid = build_grid(&cloud, delta).unwrap();
        for i in 0..cloud.len() {
            assert_eq!(
                neighbors(&grid, &cloud, i, delta).unwrap(),
                brute_force_neighbors(&cloud, i, delta),
                "mismatch at point {i}"
            );
        }
        // pair enumeration agrees with the per-point queries
        let mut pairs = neighbor_pairs(&grid, &cloud);
        pairs.sort_unstable();
        let mut brute: Vec<(u32, u32)> = Vec::new();
        for i in 0..cloud.len() {
            for j in (i + 1)..cloud.len() {
                if linf(cloud.point(i), cloud.point(j)) <= delta {
                    brute.push((i as u32, j as u32));
                }
            }
        }
        assert_eq!(pairs, brute);
    }

    #[test]
    fn neighbor_symmetry_on_random_clouds() {
        for seed in 0..5 {
            let cloud = sample_poisson(2, 80.0, seed).unwrap();
            let grid = build_grid(&cloud, 0.15).unwrap();
            let lists: Vec<Vec<usize>> = (0..cloud.len())
                .map(|i| neighbors(&grid, &cloud, i, 0.15).unwrap())
                .collect();
            for (i, list) in lists.iter().enumerate() {
                for &j in list {
                    assert!(lists[j].contains(&i));
                }
            }
        }
    }
}
