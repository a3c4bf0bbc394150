//! Closed-form quantities for the k-simplex counting functional: the exact
//! integrals behind the expectation/variance sandwich bounds, phase
//! classification of intensity schedules, and order-of-magnitude diagnostics
//! for the Gaussian/Poisson convergence rates.
//!
//! Products like `t (t delta^d)^k (k+1)^d` overflow f64 around d = 30 when
//! formed directly, so every bound is assembled as a sum of logarithms with a
//! single final exponentiation.

use crate::decomp::MomentDecomposition;
use crate::error::{Error, Result};

/// Model parameters: dimension, intensity, radius, simplex order.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RipsParams {
    pub d: usize,
    pub t: f64,
    pub delta: f64,
    pub k: usize,
}

impl RipsParams {
    pub fn new(d: usize, t: f64, delta: f64, k: usize) -> Result<Self> {
        let p = Self { d, t, delta, k };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::Parameter("dimension d must be >= 1".into()));
        }
        if !(self.t > 0.0) || !self.t.is_finite() {
            return Err(Error::Parameter(format!(
                "intensity t = {} must be positive and finite",
                self.t
            )));
        }
        if !(self.delta > 0.0 && self.delta < 0.25) {
            return Err(Error::Parameter(format!(
                "radius delta = {} must lie in (0, 1/4)",
                self.delta
            )));
        }
        if self.k == 0 {
            return Err(Error::Parameter("simplex order k must be >= 1".into()));
        }
        Ok(())
    }
}

/// Sandwich values; `lower = inner_volume * upper` with
/// `inner_volume = (1 - 2 delta)^d`, the volume of the inner parallel set.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AnalyticBounds {
    pub lower: f64,
    pub upper: f64,
    pub inner_volume: f64,
}

/// Limit of `(1/(k+1)!) t (t delta^d)^k (k+1)^d` along a schedule.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum PhaseLabel {
    Gaussian,
    Poisson(f64),
    Vanishing,
}

impl std::fmt::Display for PhaseLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PhaseLabel::Gaussian => write!(f, "GAUSSIAN"),
            PhaseLabel::Poisson(theta) => write!(f, "POISSON({theta})"),
            PhaseLabel::Vanishing => write!(f, "VANISHING"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseClassification {
    pub label: PhaseLabel,
    pub warnings: Vec<String>,
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|i| (i as f64).ln()).sum()
}

/// `I_E(d, k) = (k+1)^d`, the expectation integral.
pub fn integral_ie(d: usize, k: usize) -> Result<f64> {
    if d == 0 || k == 0 {
        return Err(Error::Parameter("require d >= 1 and k >= 1".into()));
    }
    Ok(((k + 1) as f64).powi(d as i32))
}

/// One-dimensional base of the variance integral,
/// `2(k+2)(k-r)/(r+2) + r + 1`, evaluated with a single division so the
/// special values at r = 0, 1, k are reproduced exactly.
fn iv_base(k: usize, r: usize) -> f64 {
    let num = (2 * (k + 2) * (k - r) + (r + 1) * (r + 2)) as f64;
    num / (r + 2) as f64
}

/// `I_V(d, k, r) = (2(k+2)(k-r)/(r+2) + r + 1)^d`, the variance integral.
pub fn integral_iv(d: usize, k: usize, r: usize) -> Result<f64> {
    if d == 0 || k == 0 {
        return Err(Error::Parameter("require d >= 1 and k >= 1".into()));
    }
    if r > k {
        return Err(Error::Parameter(format!(
            "shared-variable index r = {r} out of range 0..={k}"
        )));
    }
    Ok(iv_base(k, r).powi(d as i32))
}

fn ln_expectation_upper(p: &RipsParams) -> f64 {
    let (d, t, delta, k) = (p.d as f64, p.t, p.delta, p.k as f64);
    (k + 1.0) * t.ln() + d * k * delta.ln() + d * (k + 1.0).ln() - ln_factorial(p.k + 1)
}

fn finite_or_overflow(x: f64, what: &str) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::Overflow(what.into()))
    }
}

/// Sandwich for `E[F_k]`:
/// `(1-2delta)^d t (t delta^d)^k (k+1)^d / (k+1)! <= E <= t (t delta^d)^k (k+1)^d / (k+1)!`.
pub fn expectation_bounds(p: &RipsParams) -> Result<AnalyticBounds> {
    p.validate()?;
    let upper = finite_or_overflow(ln_expectation_upper(p).exp(), "expectation upper bound")?;
    let inner_volume = (1.0 - 2.0 * p.delta).powi(p.d as i32);
    Ok(AnalyticBounds {
        lower: inner_volume * upper,
        upper,
        inner_volume,
    })
}

/// The variance correction `R = t (t delta^d)^k sum_{r=1}^k C(k+1,r)
/// (t delta^d)^{k+1-r} I_V(d,k,r-1)` shared by both variance bounds. The
/// constants come from the order-(k+1) second-moment decomposition.
fn variance_correction(p: &RipsParams, decomp: &MomentDecomposition) -> Result<f64> {
    if decomp.p != 2 || decomp.n != p.k + 1 {
        return Err(Error::Parameter(format!(
            "variance bounds need the second-moment decomposition of order {} \
             (got p = {}, n = {})",
            p.k + 1,
            decomp.p,
            decomp.n
        )));
    }
    let (d, t, delta, k) = (p.d as f64, p.t, p.delta, p.k);
    let ln_x = t.ln() + d * delta.ln(); // ln(t delta^d)
    let mut sum = 0.0;
    for r in 1..=k {
        let c = decomp
            .constant_for(&[r])
            .ok_or_else(|| Error::Parameter(format!("missing constant C({}, {r})", k + 1)))?;
        let ln_term =
            c.ln() + t.ln() + (2 * k + 1 - r) as f64 * ln_x + d * iv_base(k, r - 1).ln();
        sum += ln_term.exp();
    }
    finite_or_overflow(sum, "variance correction term")
}

/// Sandwich for `V[F_k]`: the expectation bound plus the correction `R`,
/// with the lower bound carrying the inner-volume factor on both parts.
pub fn variance_bounds(p: &RipsParams, decomp: &MomentDecomposition) -> Result<AnalyticBounds> {
    p.validate()?;
    let e = expectation_bounds(p)?;
    let r = variance_correction(p, decomp)?;
    let upper = finite_or_overflow(e.upper + r, "variance upper bound")?;
    Ok(AnalyticBounds {
        lower: e.inner_volume * upper,
        upper,
        inner_volume: e.inner_volume,
    })
}

/// `ln` of the phase expression `(1/(k+1)!) t (t delta^d)^k (k+1)^d`.
pub fn ln_phase_expression(d: usize, t: f64, delta: f64, k: usize) -> f64 {
    let df = d as f64;
    let kf = k as f64;
    (kf + 1.0) * t.ln() + df * kf * delta.ln() + df * (kf + 1.0).ln() - ln_factorial(k + 1)
}

/// Inverts the phase-2 equation: the intensity `t` such that
/// `(1/(k+1)!) t (t delta^d)^k (k+1)^d = theta`.
pub fn schedule_intensity(theta: f64, k: usize, d: usize, delta: f64) -> Result<f64> {
    if !(theta > 0.0) || !theta.is_finite() {
        return Err(Error::Parameter(format!("theta = {theta} must be > 0")));
    }
    if d == 0 || k == 0 {
        return Err(Error::Parameter("require d >= 1 and k >= 1".into()));
    }
    if !(delta > 0.0 && delta < 0.25) {
        return Err(Error::Parameter(format!(
            "radius delta = {delta} must lie in (0, 1/4)"
        )));
    }
    let (df, kf) = (d as f64, k as f64);
    let ln_t = (theta.ln() + ln_factorial(k + 1) - df * kf * delta.ln() - df * (kf + 1.0).ln())
        / (kf + 1.0);
    finite_or_overflow(ln_t.exp(), "schedule intensity")
}

/// Canonical power-law schedule: `delta_d = c d^{-alpha}` and
/// `t_d = d^{growth_power} *` (the phase-2 intensity for `theta`).
/// `growth_power = 0` is the Poisson-phase schedule; positive powers push
/// into the Gaussian phase, negative ones into the vanishing phase.
pub fn power_law_schedule(
    theta: f64,
    k: usize,
    c: f64,
    alpha: f64,
    growth_power: f64,
) -> impl Fn(usize) -> (f64, f64) {
    move |d| {
        let delta = c * (d as f64).powf(-alpha);
        let t = match schedule_intensity(theta, k, d, delta) {
            Ok(t) => t * (d as f64).powf(growth_power),
            Err(_) => f64::NAN,
        };
        (t, delta)
    }
}

/// Classifies a schedule by the numeric tail of the phase expression.
/// The tail (last 20% of `1..=d_max`) is declared convergent
/// when its max/min ratio stays below 1.01; otherwise a monotone tail decides
/// between the diverging and vanishing phases.
pub fn classify_phase<F: Fn(usize) -> (f64, f64)>(
    schedule: F,
    k: usize,
    d_max: usize,
) -> Result<PhaseClassification> {
    if k == 0 || d_max < 10 {
        return Err(Error::Parameter(
            "require k >= 1 and d_max >= 10 for tail classification".into(),
        ));
    }
    let mut warnings = Vec::new();

    // dimension-radius product d*delta_d must not diverge, and should vanish
    let w_at = |d: usize| d as f64 * schedule(d).1;
    let (w_mid, w_end) = (w_at(4 * d_max / 5), w_at(d_max));
    let dd_vanishes = if w_end > w_mid * 1.001 {
        return Err(Error::Parameter(format!(
            "schedule violates d*delta_d -> 0: increasing from {w_mid} to {w_end}"
        )));
    } else if w_end >= 0.1 || w_end > 0.999 * w_mid {
        warnings.push(format!(
            "d*delta_d does not vanish (value {w_end} at d = {d_max}); \
             acceptable in the Gaussian phase only"
        ));
        false
    } else {
        true
    };

    // only the tail decides the limit; small d may fall outside the
    // schedule's valid range (e.g. delta_d >= 1/4) and is ignored
    let tail_len = (d_max / 5).max(2);
    let mut ln_vals = Vec::with_capacity(tail_len);
    for d in (d_max - tail_len + 1)..=d_max {
        let (t, delta) = schedule(d);
        if !(t > 0.0) || !t.is_finite() || !(delta > 0.0 && delta < 1.0) {
            return Err(Error::Parameter(format!(
                "schedule produced invalid (t, delta) = ({t}, {delta}) at d = {d}"
            )));
        }
        ln_vals.push(ln_phase_expression(d, t, delta, k));
    }
    let tail = &ln_vals[..];
    let (tail_min, tail_max) = tail
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });

    let label = if tail_max - tail_min < 1.01f64.ln() && tail_max.is_finite() {
        let theta = tail.iter().map(|v| v.exp()).sum::<f64>() / tail.len() as f64;
        PhaseLabel::Poisson(theta)
    } else if tail.windows(2).all(|w| w[1] > w[0]) {
        PhaseLabel::Gaussian
    } else if tail.windows(2).all(|w| w[1] < w[0]) {
        PhaseLabel::Vanishing
    } else {
        return Err(Error::InconclusivePhase(format!(
            "non-monotone, non-convergent tail over d = {}..={d_max}",
            d_max - tail_len + 1
        )));
    };
    if !dd_vanishes && label != PhaseLabel::Gaussian {
        return Err(Error::Parameter(format!(
            "schedule with non-vanishing d*delta_d classified as {label}; \
             only the Gaussian phase tolerates a finite limit"
        )));
    }
    Ok(PhaseClassification { label, warnings })
}

/// Which moment of which difference operator to bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivativeMomentKind {
    /// `E[(D_x F_k)^p]` for p in {2, 3, 4}.
    FirstOrder { power: usize },
    /// `E[((D_x F_k)(D_x F_k - 1))^2]`.
    FirstOrderFactorial,
    /// `E[(D^2_{x1,x2} F_k)^4]`; zero unless the probes are within delta.
    SecondOrder { probes_within_delta: bool },
}

fn enumerated_constant_sum(n: usize, p: usize) -> Result<f64> {
    use num_traits::ToPrimitive;
    let decomp = crate::decomp::enumerate_classes(n, p)?;
    Ok(decomp
        .terms
        .iter()
        .map(|t| t.constant.to_f64().unwrap_or(f64::INFINITY))
        .sum())
}

/// Upper bound for a difference-operator moment: the enumerated constant
/// times the sum `sum_q (t delta^d)^q (base * ((q - q0)/(p-1) + 1)^{p-1})^d`
/// over the admissible exponent range. Conservative: the constant is the sum
/// of all decomposition-class constants, which dominates every single term.
pub fn derivative_moment_bound(p: &RipsParams, kind: DerivativeMomentKind) -> Result<f64> {
    p.validate()?;
    let k = p.k;
    let (constant, q_range, inner_power, base) = match kind {
        DerivativeMomentKind::FirstOrder { power } => {
            if !(2..=4).contains(&power) {
                return Err(Error::Parameter(format!(
                    "moment power {power} must be 2, 3, or 4"
                )));
            }
            (
                enumerated_constant_sum(k, power)?,
                (k, power * k, k),
                power - 1,
                k + 1,
            )
        }
        DerivativeMomentKind::FirstOrderFactorial => (
            enumerated_constant_sum(k, 2)? + enumerated_constant_sum(k, 4)?,
            (k + 1, 4 * k, k),
            3,
            k + 1,
        ),
        DerivativeMomentKind::SecondOrder {
            probes_within_delta,
        } => {
            if !probes_within_delta {
                return Ok(0.0);
            }
            let c = if k == 1 {
                1.0 // exact: E[(D^2 F_1)^4] is the pair indicator itself
            } else {
                enumerated_constant_sum(k - 1, 4)?
            };
            (c, (k - 1, 4 * (k - 1), k - 1), 3, k)
        }
    };
    let (q_lo, q_hi, q0) = q_range;
    let ln_x = p.t.ln() + p.d as f64 * p.delta.ln();
    let mut sum = 0.0;
    for q in q_lo..=q_hi {
        let inner = ((q - q0) as f64 / inner_power as f64 + 1.0).powi(inner_power as i32);
        let ln_term = q as f64 * ln_x + p.d as f64 * (base as f64 * inner).ln();
        sum += ln_term.exp();
    }
    finite_or_overflow(constant * sum, "derivative moment bound")
}

/// Limit regime of `t delta^d` along the schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Regime {
    /// `t delta^d -> 0`
    Sparse,
    /// `t delta^d -> c` in `(0, inf)`
    Critical,
    /// `t delta^d -> inf`
    Dense,
}

/// Order expressions (multiplicative constants set to 1) for the Malliavin-
/// Stein error terms of the standardized functional and the headline rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateDiagnostics {
    pub regime: Regime,
    pub gamma1_order: f64,
    pub gamma2_order: f64,
    pub gamma3_order: f64,
    pub wasserstein_order: f64,
    /// Poisson-approximation rate; only meaningful in the sparse regime.
    pub tv_order: Option<f64>,
}

/// Wasserstein-rate order of the central limit theorem. The two case
/// expressions (`low_k_branch` selects the k <= 3 form) coincide at k = 3.
pub fn wasserstein_rate_order(p: &RipsParams, regime: Regime, low_k_branch: bool) -> Result<f64> {
    p.validate()?;
    let (d, k) = (p.d as f64, p.k as f64);
    let ln = match regime {
        Regime::Sparse => {
            let ln_e = ln_expectation_upper(p);
            if low_k_branch {
                -0.5 * ln_e + 1.5 * d * (k + 1.0).ln() + d * 2f64.ln()
            } else {
                -0.5 * ln_e + 2.0 * d * (k + 1.0).ln()
            }
        }
        Regime::Critical | Regime::Dense => {
            -0.5 * p.t.ln() + d * (1.0 + 1.0 / (k * k + 2.0 * k)).ln() + d * 2f64.ln()
        }
    };
    Ok(ln.exp())
}

/// Total-variation-rate order of the Poisson limit theorem (sparse regime).
pub fn tv_rate_order(p: &RipsParams, low_k_branch: bool) -> Result<f64> {
    p.validate()?;
    let (d, k) = (p.d as f64, p.k as f64);
    let ln = if low_k_branch {
        -p.t.ln() / (2.0 * k) + d * (3.0 * k - 1.0) / (2.0 * k) * (k + 1.0).ln() + d * 2f64.ln()
    } else {
        -p.t.ln() / (2.0 * k) + d * (4.0 * k - 1.0) / (2.0 * k) * (k + 1.0).ln()
    };
    Ok(ln.exp())
}

/// Gamma-term and rate orders for the given regime, constants set to 1.
pub fn rate_diagnostics(p: &RipsParams, regime: Regime) -> Result<RateDiagnostics> {
    p.validate()?;
    let (d, t, k) = (p.d as f64, p.t, p.k as f64);
    let ln_x = t.ln() + d * p.delta.ln();
    let ln4d = d * 4f64.ln();
    let kk = k * k + 2.0 * k;
    let (g1, g2, g3) = match regime {
        Regime::Sparse => (
            ln4d + 2.0 * d * (k + 1.0).ln() - t.ln() + (1.5 - k) * ln_x,
            ln4d + 2.0 * d * k.ln() + 2.0 * d * (k.ln() - (k + 1.0).ln()) - t.ln()
                + (1.0 - k) * ln_x,
            1.5 * d * (k + 1.0).ln() - 0.5 * t.ln() - 0.5 * k * ln_x,
        ),
        Regime::Critical => (
            ln4d - t.ln() + 2.0 * d * (1.0 + 1.0 / kk).ln(),
            ln4d - t.ln() + 2.0 * d * (k * k / kk).ln(),
            -0.5 * t.ln() + 1.5 * d * (1.0 + 1.0 / kk).ln(),
        ),
        Regime::Dense => (
            ln4d - t.ln() + 2.0 * d * (1.0 + 1.0 / kk).ln(),
            ln4d - t.ln() - 2.0 * ln_x + 2.0 * d * (k * k / kk).ln(),
            -0.5 * t.ln() + 1.5 * d * (1.0 + 1.0 / kk).ln(),
        ),
    };
    let low_k = p.k <= 3;
    Ok(RateDiagnostics {
        regime,
        gamma1_order: g1.exp(),
        gamma2_order: g2.exp(),
        gamma3_order: g3.exp(),
        wasserstein_order: wasserstein_rate_order(p, regime, low_k)?,
        tv_order: match regime {
            Regime::Sparse => Some(tv_rate_order(p, low_k)?),
            _ => None,
        },
    })
}
