//! Replication harness: samples many independent clouds, counts simplices,
//! and compares the empirical law of F_k against the analytic sandwich and
//! against the Gaussian/Poisson limits with quantitative distance estimates.

use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::analytic::{
    expectation_bounds, ln_phase_expression, variance_bounds, PhaseLabel, RipsParams,
};
use crate::decomp::{enumerate_classes, MomentEstimate};
use crate::error::{Error, Result};
use crate::geometry::{derive_seed, sample_poisson};
use crate::rips::{count_simplices, diff1, diff2};

/// Largest mean cloud size a replication run will attempt; sweeps are
/// expected to stop at the largest dimension whose scheduled intensity fits.
pub const MAX_INTENSITY: f64 = 1e5;

/// Empirical distribution of F_k over independent replications, plus the
/// distance-to-limit estimates that apply to the run's phase.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ExperimentSummary {
    pub params: RipsParams,
    pub replications: usize,
    /// F_k per replication, ordered by replication index
    pub samples: Vec<u64>,
    pub empirical_mean: f64,
    /// unbiased sample variance
    pub empirical_var: f64,
    /// W1 distance of the empirically-standardized samples to N(0,1);
    /// absent when the sample is degenerate or too small
    pub w1_to_normal: Option<f64>,
    /// same, standardized by the analytic sandwich midpoints instead
    pub w1_to_normal_analytic: Option<f64>,
    /// total variation distance to Poisson(theta); present iff a theta was
    /// supplied
    pub tv_to_poisson: Option<f64>,
    pub theta_used: Option<f64>,
    pub seed_base: u64,
}

/// Runs `replications` independent clouds with seeds derived from `seed` and
/// summarizes the F_k samples. Deterministic given `(p, replications, seed)`,
/// independent of thread count.
pub fn run_experiment(p: &RipsParams, replications: usize, seed: u64) -> Result<ExperimentSummary> {
    run_experiment_with_theta(p, replications, seed, None)
}

/// `run_experiment` with a Poisson reference parameter attached, enabling the
/// total-variation estimate.
pub fn run_experiment_with_theta(
    p: &RipsParams,
    replications: usize,
    seed: u64,
    theta: Option<f64>,
) -> Result<ExperimentSummary> {
    p.validate()?;
    if replications < 2 {
        return Err(Error::Parameter("need at least 2 replications".into()));
    }
    if p.t > MAX_INTENSITY {
        return Err(Error::Parameter(format!(
            "intensity t = {} exceeds the per-cloud cap {MAX_INTENSITY}",
            p.t
        )));
    }
    if let Some(th) = theta {
        if !(th > 0.0) || !th.is_finite() {
            return Err(Error::Parameter(format!("theta = {th} must be > 0")));
        }
    }
    let samples: Vec<u64> = (0..replications)
        .into_par_iter()
        .map(|i| -> Result<u64> {
            let run = || -> Result<u64> {
                let cloud = sample_poisson(p.d, p.t, derive_seed(seed, i as u64))?;
                let count = count_simplices(&cloud, p.delta, p.k)?.count;
                u64::try_from(count).map_err(|_| Error::Capacity)
            };
            run().map_err(|e| Error::Replication {
                replication: i,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;
    summarize(p, samples, seed, theta)
}

/// Assembles a summary from already-counted samples (also the test hook for
/// forced sample sets).
pub(crate) fn summarize(
    p: &RipsParams,
    samples: Vec<u64>,
    seed_base: u64,
    theta: Option<f64>,
) -> Result<ExperimentSummary> {
    let n = samples.len();
    let mean = samples.iter().map(|&s| s as f64).sum::<f64>() / n as f64;
    let var = samples
        .iter()
        .map(|&s| (s as f64 - mean).powi(2))
        .sum::<f64>()
        / (n - 1) as f64;

    let standardized_w1 = |center: f64, scale2: f64| -> Option<f64> {
        if n < 100 || !(scale2 > 0.0) {
            return None;
        }
        let sd = scale2.sqrt();
        let z: Vec<f64> = samples.iter().map(|&s| (s as f64 - center) / sd).collect();
        w1_to_standard_normal(&z).ok()
    };
    let w1 = standardized_w1(mean, var);
    let w1_analytic = (|| {
        let e = expectation_bounds(p).ok()?;
        let decomp = enumerate_classes(p.k + 1, 2).ok()?;
        let v = variance_bounds(p, &decomp).ok()?;
        standardized_w1((e.lower + e.upper) / 2.0, (v.lower + v.upper) / 2.0)
    })();
    let tv = match theta {
        Some(th) => {
            let as_f64: Vec<f64> = samples.iter().map(|&s| s as f64).collect();
            Some(tv_to_poisson(&as_f64, th)?)
        }
        None => None,
    };
    Ok(ExperimentSummary {
        params: *p,
        replications: n,
        samples,
        empirical_mean: mean,
        empirical_var: var,
        w1_to_normal: w1,
        w1_to_normal_analytic: w1_analytic,
        tv_to_poisson: tv,
        theta_used: theta,
        seed_base,
    })
}

/// W1 distance between the empirical law of (already standardized) samples
/// and N(0,1): the average absolute gap between the sorted samples and the
/// normal quantiles at plotting positions `(i - 1/2) / n`.
pub fn w1_to_standard_normal(samples: &[f64]) -> Result<f64> {
    let n = samples.len();
    if n < 100 {
        return Err(Error::Degenerate(format!(
            "need >= 100 samples for the W1 estimate, got {n}"
        )));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("W1 sample".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let normal = Normal::standard();
    let total: f64 = sorted
        .iter()
        .enumerate()
        .map(|(i, &v)| (v - normal.inverse_cdf((i as f64 + 0.5) / n as f64)).abs())
        .sum();
    Ok(total / n as f64)
}

/// Total variation distance between the empirical law of integer samples and
/// Poisson(theta): half the l1 gap over the observed support plus the Poisson
/// tail mass beyond it.
pub fn tv_to_poisson(samples: &[f64], theta: f64) -> Result<f64> {
    if !(theta > 0.0) || !theta.is_finite() {
        return Err(Error::Parameter(format!("theta = {theta} must be > 0")));
    }
    if samples.is_empty() {
        return Err(Error::Degenerate("empty sample set".into()));
    }
    let mut max = 0usize;
    for &s in samples {
        if !s.is_finite() || s < 0.0 || s.fract() != 0.0 || s > u32::MAX as f64 {
            return Err(Error::NonIntegerSample(s));
        }
        max = max.max(s as usize);
    }
    let mut freq = vec![0.0f64; max + 1];
    for &s in samples {
        freq[s as usize] += 1.0 / samples.len() as f64;
    }
    let mut l1 = 0.0;
    let mut pmf = (-theta).exp();
    let mut covered = 0.0;
    for (j, &f) in freq.iter().enumerate() {
        l1 += (f - pmf).abs();
        covered += pmf;
        pmf *= theta / (j + 1) as f64;
    }
    Ok(0.5 * (l1 + (1.0 - covered).max(0.0)))
}

/// One dimension of a sweep; failed runs carry the error instead of aborting
/// the remaining dimensions.
#[derive(Debug)]
pub struct SweepOutcome {
    pub d: usize,
    pub t: f64,
    pub delta: f64,
    pub result: Result<ExperimentSummary>,
}

/// Runs `run_experiment` along a schedule at each listed dimension. In the
/// Poisson phase the schedule's own phase-expression value is attached as
/// theta; elsewhere only the standardized Gaussian distance applies.
pub fn phase_sweep<F: Fn(usize) -> (f64, f64)>(
    schedule: F,
    k: usize,
    d_list: &[usize],
    replications: usize,
    seed: u64,
    label: &PhaseLabel,
) -> Result<Vec<SweepOutcome>> {
    if d_list.is_empty() {
        return Err(Error::Parameter("empty dimension list".into()));
    }
    let mut out = Vec::with_capacity(d_list.len());
    for &d in d_list {
        let (t, delta) = schedule(d);
        let result = (|| {
            let p = RipsParams::new(d, t, delta, k)?;
            let theta = match label {
                PhaseLabel::Poisson(_) => Some(ln_phase_expression(d, t, delta, k).exp()),
                _ => None,
            };
            run_experiment_with_theta(&p, replications, derive_seed(seed, d as u64), theta)
        })();
        out.push(SweepOutcome {
            d,
            t,
            delta,
            result,
        });
    }
    Ok(out)
}

/// Monte Carlo estimates of the difference-operator moments at probe points
/// `x1` (first order) and `(x1, x2)` (second order).
#[derive(Debug, Clone, PartialEq)]
pub struct DiffOperatorMoments {
    /// `E[(D_x1 F_k)^p]` for p = 2, 3, 4
    pub first_order: [MomentEstimate; 3],
    /// `E[((D_x1 F_k)(D_x1 F_k - 1))^2]`
    pub factorial_square: MomentEstimate,
    /// `E[(D^2_{x1,x2} F_k)^4]`
    pub second_order_fourth: MomentEstimate,
}

/// Estimates the add-one-cost moments over `replications` clouds.
pub fn diff_operator_moments(
    p: &RipsParams,
    x1: &[f64],
    x2: &[f64],
    replications: usize,
    seed: u64,
) -> Result<DiffOperatorMoments> {
    p.validate()?;
    if replications < 2 {
        return Err(Error::Parameter("need at least 2 replications".into()));
    }
    if p.t > MAX_INTENSITY {
        return Err(Error::Parameter(format!(
            "intensity t = {} exceeds the per-cloud cap {MAX_INTENSITY}",
            p.t
        )));
    }
    // six tracked statistics: D^2, D^3, D^4, (D(D-1))^2, (D^2 op)^4
    let per_rep: Vec<[f64; 5]> = (0..replications)
        .into_par_iter()
        .map(|i| -> Result<[f64; 5]> {
            let run = || -> Result<[f64; 5]> {
                let cloud = sample_poisson(p.d, p.t, derive_seed(seed, i as u64))?;
                let d1 = diff1(&cloud, p.delta, p.k, x1)? as f64;
                let d2 = diff2(&cloud, p.delta, p.k, x1, x2)? as f64;
                Ok([
                    d1 * d1,
                    d1 * d1 * d1,
                    d1 * d1 * d1 * d1,
                    (d1 * (d1 - 1.0)).powi(2),
                    d2 * d2 * d2 * d2,
                ])
            };
            run().map_err(|e| Error::Replication {
                replication: i,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;
    let estimate = |idx: usize| -> MomentEstimate {
        let n = per_rep.len() as f64;
        let mean = per_rep.iter().map(|r| r[idx]).sum::<f64>() / n;
        let var = per_rep.iter().map(|r| (r[idx] - mean).powi(2)).sum::<f64>() / (n - 1.0);
        MomentEstimate {
            value: mean,
            standard_error: (var / n).sqrt(),
        }
    };
    Ok(DiffOperatorMoments {
        first_order: [estimate(0), estimate(1), estimate(2)],
        factorial_square: estimate(3),
        second_order_fourth: estimate(4),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{
        derivative_moment_bound, power_law_schedule, DerivativeMomentKind,
    };
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn forced_identical_samples_drop_w1() {
        let p = RipsParams::new(2, 10.0, 0.1, 1).unwrap();
        let s = summarize(&p, vec![5, 5], 0, None).unwrap();
        assert_eq!(s.empirical_var, 0.0);
        assert_eq!(s.empirical_mean, 5.0);
        assert!(s.w1_to_normal.is_none());
        assert!(s.tv_to_poisson.is_none());
    }

    #[test]
    fn run_experiment_is_deterministic() {
        let p = RipsParams::new(2, 40.0, 0.08, 1).unwrap();
        let a = run_experiment(&p, 300, 7).unwrap();
        let b = run_experiment(&p, 300, 7).unwrap();
        assert_eq!(a, b);
        let c = run_experiment(&p, 300, 8).unwrap();
        assert_ne!(a.samples, c.samples);
    }

    #[test]
    fn run_experiment_mean_in_sandwich() {
        // d=3, k=1, t=100, delta=0.05, R=10^4
        let p = RipsParams::new(3, 100.0, 0.05, 1).unwrap();
        let s = run_experiment(&p, 10_000, 42).unwrap();
        let e = expectation_bounds(&p).unwrap();
        let se = (s.empirical_var / s.replications as f64).sqrt();
        assert!(
            s.empirical_mean >= e.lower - 4.0 * se && s.empirical_mean <= e.upper + 4.0 * se,
            "mean {} outside [{}, {}] +- 4se {}",
            s.empirical_mean,
            e.lower,
            e.upper,
            se
        );
    }

    #[test]
    fn run_experiment_guards() {
        let p = RipsParams::new(2, 10.0, 0.1, 1).unwrap();
        assert!(run_experiment(&p, 1, 0).is_err());
        let big = RipsParams::new(2, 2e5, 0.1, 1).unwrap();
        assert!(run_experiment(&big, 10, 0).is_err());
    }

    #[test]
    fn w1_on_exact_normal_draws_is_small_and_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut draw = |n: usize| -> Vec<f64> {
            (0..n)
                .map(|_| <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
                .collect()
        };
        let w_small = w1_to_standard_normal(&draw(1_000)).unwrap();
        let w_big = w1_to_standard_normal(&draw(100_000)).unwrap();
        assert!(w_big < 0.02, "w1 = {w_big}");
        assert!(w_big < w_small);
    }

    #[test]
    fn w1_point_mass_and_translation() {
        let zeros = vec![0.0; 10_000];
        let w = w1_to_standard_normal(&zeros).unwrap();
        let expected = (2.0 / std::f64::consts::PI).sqrt();
        assert!((w - expected).abs() < 0.01, "w1 = {w}");

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let base: Vec<f64> = (0..5_000).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
        let shifted: Vec<f64> = base.iter().map(|v| v + 0.3).collect();
        let (w0, w1) = (
            w1_to_standard_normal(&base).unwrap(),
            w1_to_standard_normal(&shifted).unwrap(),
        );
        assert!(w1 <= w0 + 0.3 + 1e-12);

        assert!(w1_to_standard_normal(&zeros[..50]).is_err());
    }

    #[test]
    fn tv_closed_forms() {
        // point mass at 0 vs Poisson(ln 2): TV = 1 - e^{-theta} = 1/2
        let zeros = vec![0.0; 1000];
        let tv = tv_to_poisson(&zeros, 2f64.ln()).unwrap();
        assert!((tv - 0.5).abs() < 1e-12, "tv = {tv}");

        // matching the pmf exactly on {0,1} leaves only the tail mass
        let theta = 0.3f64;
        let p0 = (-theta).exp();
        let p1 = p0 * theta;
        let n = 100_000usize;
        let n0 = (p0 * n as f64).round() as usize;
        let n1 = (p1 * n as f64).round() as usize;
        let mut samples = vec![0.0; n0];
        samples.extend(vec![1.0; n1]);
        let scale = (n0 + n1) as f64;
        // rescale so empirical frequencies are exactly p0', p1' close to pmf
        let tv = tv_to_poisson(&samples, theta).unwrap();
        let tail = 1.0 - p0 - p1;
        let slack = (n0 as f64 / scale - p0 / (p0 + p1)).abs()
            + (n1 as f64 / scale - p1 / (p0 + p1)).abs();
        assert!(tv <= 0.5 * (tail + slack) + tail + 1e-3, "tv = {tv}");
        assert!((0.0..=1.0).contains(&tv));

        assert!(tv_to_poisson(&[0.5], 1.0).is_err());
        assert!(tv_to_poisson(&[-1.0], 1.0).is_err());
        assert!(tv_to_poisson(&[1.0], 0.0).is_err());
    }

    #[test]
    fn tv_is_always_a_probability_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let samples: Vec<f64> = (0..500).map(|_| (rng.random::<u32>() % 7) as f64).collect();
            let theta = rng.random::<f64>() * 5.0 + 0.1;
            let tv = tv_to_poisson(&samples, theta).unwrap();
            assert!((0.0..=1.0).contains(&tv), "tv = {tv}");
        }
    }

    #[test]
    fn sweep_records_failures_and_continues() {
        // d = 1 makes delta = 0.3 invalid; d = 3 runs fine
        let schedule = |d: usize| (20.0, if d == 1 { 0.3 } else { 0.05 });
        let out = phase_sweep(schedule, 1, &[1, 3], 100, 1, &PhaseLabel::Gaussian).unwrap();
        assert_eq!(out.len(), 2);
        assert!(out[0].result.is_err());
        assert!(out[1].result.is_ok());
    }

    #[test]
    fn sweep_attaches_theta_in_poisson_phase() {
        let schedule = power_law_schedule(2.0, 1, 1.0, 2.0, 0.0);
        let out = phase_sweep(&schedule, 1, &[4], 200, 9, &PhaseLabel::Poisson(2.0)).unwrap();
        let s = out[0].result.as_ref().unwrap();
        let theta = s.theta_used.unwrap();
        assert!((theta - 2.0).abs() < 1e-9, "theta = {theta}");
        assert!(s.tv_to_poisson.is_some());
    }

    #[test]
    fn diff_moments_respect_analytic_bounds() {
        let p = RipsParams::new(2, 50.0, 0.1, 1).unwrap();
        let origin = [0.0, 0.0];
        let near = [0.05, 0.0];
        let m = diff_operator_moments(&p, &origin, &near, 4_000, 13).unwrap();
        for (i, power) in [2usize, 3, 4].iter().enumerate() {
            let bound =
                derivative_moment_bound(&p, DerivativeMomentKind::FirstOrder { power: *power })
                    .unwrap();
            let est = m.first_order[i];
            assert!(
                est.value <= bound + 4.0 * est.standard_error,
                "p = {power}: {} > {bound}",
                est.value
            );
        }
        let fb = derivative_moment_bound(&p, DerivativeMomentKind::FirstOrderFactorial).unwrap();
        assert!(m.factorial_square.value <= fb + 4.0 * m.factorial_square.standard_error);
        let sb = derivative_moment_bound(
            &p,
            DerivativeMomentKind::SecondOrder {
                probes_within_delta: true,
            },
        )
        .unwrap();
        assert!(
            m.second_order_fourth.value <= sb + 4.0 * m.second_order_fourth.standard_error
        );
        // Jensen: E[D^2] >= (E[D])^2 is implied by variance >= 0 of D; check
        // the estimate at least dominates the squared first moment trend
        assert!(m.first_order[0].value >= 0.0);
    }

    #[test]
    fn diff_moments_vanish_far_from_everything() {
        let p = RipsParams::new(2, 20.0, 0.02, 1).unwrap();
        // second-order probes farther apart than delta force a zero operator
        let m = diff_operator_moments(&p, &[0.4, 0.4], &[-0.4, -0.4], 500, 2).unwrap();
        assert_eq!(m.second_order_fourth.value, 0.0);
        assert_eq!(m.second_order_fourth.standard_error, 0.0);
    }
}
