//! Moment decompositions for Poisson U-statistics of order n: the p-th power
//! (p = 2, 3, 4) of the statistic splits into a finite sum of diagonal-free
//! terms, each an integral of a product of p kernels against a power of the
//! intensity measure, weighted by an exact rational combinatorial constant.
//!
//! The construction mirrors the injective-map argument: kernel q (q >= 2)
//! brings n fresh variables, each of which is either kept distinct or
//! identified with one existing variable. Terms are grouped one level finer
//! than the shared-count signature (r), (r, s_Y, s_Z),
//! (r, s_Y, s_Z, m_Y, m_Z, m_W): two identification patterns with equal
//! shared counts can still place a later kernel on differently-connected
//! variables and integrate to different values, so classes here are keyed by
//! the multiset of kernel-membership patterns. The count signature is derived
//! from the pattern, and aggregating class constants per signature recovers
//! the count-level constants C(n, .).

use std::collections::HashMap;

use num_bigint::{BigInt, BigUint};
use num_rational::Ratio;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analytic::RipsParams;
use crate::error::{Error, Result};
use crate::geometry::linf_within;

pub type Rational = Ratio<BigInt>;

/// Shared-variable counts: `[r]` for p = 2, `[r, s_Y, s_Z]` for p = 3,
/// `[r, s_Y, s_Z, m_Y, m_Z, m_W]` for p = 4.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct IndexSignature {
    pub n: usize,
    pub shared: Vec<usize>,
}

impl IndexSignature {
    pub fn label(&self) -> String {
        let parts: Vec<String> = self.shared.iter().map(|v| v.to_string()).collect();
        format!("({})", parts.join(","))
    }
}

/// One diagonal-free term: `constant * integral over X^arity of the product
/// of p kernels`, where kernel q takes the variables listed in `kernels[q]`.
#[derive(Debug, Clone)]
pub struct MomentTerm {
    pub signature: IndexSignature,
    pub constant: Rational,
    pub class_size: BigUint,
    pub arity: usize,
    /// variable ids per kernel; every kernel has exactly n entries
    pub kernels: Vec<Vec<usize>>,
}

#[derive(Debug, Clone)]
pub struct MomentDecomposition {
    pub p: usize,
    pub n: usize,
    pub terms: Vec<MomentTerm>,
}

impl MomentDecomposition {
    /// Count-level constant `C(n, signature)`: the sum of the constants of
    /// all pattern classes sharing the given shared-count signature.
    pub fn constant_for(&self, shared: &[usize]) -> Option<f64> {
        let mut sum = Rational::zero();
        let mut found = false;
        for t in &self.terms {
            if t.signature.shared == shared {
                sum += t.constant.clone();
                found = true;
            }
        }
        if found {
            sum.to_f64()
        } else {
            None
        }
    }
}

pub const ENUMERATION_GUARD: usize = 20;

fn factorial(n: usize) -> BigUint {
    (1..=n as u64).map(BigUint::from).fold(BigUint::one(), |a, b| a * b)
}

fn falling(n: usize, j: usize) -> BigUint {
    ((n - j + 1) as u64..=n as u64)
        .map(BigUint::from)
        .fold(BigUint::one(), |a, b| a * b)
}

fn binomial(n: usize, k: usize) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    falling(n, k) / factorial(k)
}

/// Pattern-count state: sorted (kernel-membership bitmask, variable count).
type State = Vec<(u8, usize)>;

fn enumerate_reuse(
    entries: &State,
    pos: usize,
    picked: &mut Vec<usize>,
    weight: BigUint,
    n: usize,
    out: &mut dyn FnMut(&[usize], usize, BigUint),
) {
    if pos == entries.len() {
        let j: usize = picked.iter().sum();
        out(picked, j, weight);
        return;
    }
    let budget = n - picked.iter().sum::<usize>();
    let (_, count) = entries[pos];
    for a in 0..=count.min(budget) {
        picked.push(a);
        enumerate_reuse(
            entries,
            pos + 1,
            picked,
            weight.clone() * binomial(count, a),
            n,
            out,
        );
        picked.pop();
    }
}

fn signature_counts(state: &State, p: usize) -> Vec<usize> {
    let sum_where = |f: &dyn Fn(u8) -> bool| -> usize {
        state
            .iter()
            .filter(|(m, _)| f(*m))
            .map(|(_, c)| *c)
            .sum()
    };
    let has = |m: u8, b: usize| m & (1 << b) != 0;
    let mut sig = vec![sum_where(&|m| has(m, 0) && has(m, 1))];
    if p >= 3 {
        sig.push(sum_where(&|m| has(m, 0) && has(m, 2)));
        sig.push(sum_where(&|m| !has(m, 0) && has(m, 1) && has(m, 2)));
    }
    if p >= 4 {
        sig.push(sum_where(&|m| has(m, 0) && has(m, 3)));
        sig.push(sum_where(&|m| !has(m, 0) && has(m, 1) && has(m, 3)));
        sig.push(sum_where(&|m| {
            !has(m, 0) && !has(m, 1) && has(m, 2) && has(m, 3)
        }));
    }
    sig
}

/// Enumerates all identification classes of the p-th moment of an order-n
/// U-statistic, with exact rational constants `|class| / n!^p`.
pub fn enumerate_classes(n: usize, p: usize) -> Result<MomentDecomposition> {
    if n == 0 {
        return Err(Error::Parameter("kernel order n must be >= 1".into()));
    }
    if !(2..=4).contains(&p) {
        return Err(Error::Parameter(format!("power p = {p} must be 2, 3, or 4")));
    }
    if n * p > ENUMERATION_GUARD {
        return Err(Error::SizeGuard(n * p, ENUMERATION_GUARD));
    }

    let mut states: HashMap<State, BigUint> = HashMap::new();
    states.insert(vec![(0b1, n)], BigUint::one());

    for stage in 1..p {
        let bit = 1u8 << stage;
        let mut next: HashMap<State, BigUint> = HashMap::new();
        for (state, ways) in &states {
            let mut picked = Vec::new();
            enumerate_reuse(state, 0, &mut picked, BigUint::one(), n, &mut |a, j, w| {
                let weight = ways.clone() * w * falling(n, j);
                let mut new_state: State = Vec::new();
                for (idx, &(mask, count)) in state.iter().enumerate() {
                    if count - a[idx] > 0 {
                        new_state.push((mask, count - a[idx]));
                    }
                    if a[idx] > 0 {
                        new_state.push((mask | bit, a[idx]));
                    }
                }
                if n - j > 0 {
                    new_state.push((bit, n - j));
                }
                new_state.sort_unstable();
                *next.entry(new_state).or_default() += weight;
            });
        }
        states = next;
    }

    let denom = BigInt::from(factorial(n).pow(p as u32));
    let mut terms: Vec<MomentTerm> = states
        .into_iter()
        .map(|(state, size)| {
            // assign variable ids in state order and list each kernel's slots
            let mut kernels = vec![Vec::new(); p];
            let mut var = 0usize;
            for &(mask, count) in &state {
                for _ in 0..count {
                    for (q, kernel) in kernels.iter_mut().enumerate() {
                        if mask & (1 << q) != 0 {
                            kernel.push(var);
                        }
                    }
                    var += 1;
                }
            }
            debug_assert!(kernels.iter().all(|k| k.len() == n));
            MomentTerm {
                signature: IndexSignature {
                    n,
                    shared: signature_counts(&state, p),
                },
                constant: Rational::new(BigInt::from(size.clone()), denom.clone()),
                class_size: size,
                arity: var,
                kernels,
            }
        })
        .collect();
    terms.sort_by(|a, b| {
        (&a.signature.shared, &a.kernels).cmp(&(&b.signature.shared, &b.kernels))
    });
    Ok(MomentDecomposition { p, n, terms })
}

/// Total number of admissible identification-map tuples, computed by a
/// direct recursion over stages that is independent of the class grouping
/// (partition-of-unity oracle).
pub fn total_map_tuples(n: usize, p: usize) -> BigUint {
    fn rec(stage: usize, p: usize, n: usize, existing: usize) -> BigUint {
        if stage == p {
            return BigUint::one();
        }
        let mut total = BigUint::zero();
        for j in 0..=n.min(existing) {
            total += binomial(n, j) * falling(existing, j) * rec(stage + 1, p, n, existing + n - j);
        }
        total
    }
    rec(1, p, n, n)
}

/// A row of the exact constants table, aggregated per count signature.
#[derive(Debug, Clone)]
pub struct ConstantsRow {
    pub p: usize,
    pub n: usize,
    pub signature: IndexSignature,
    pub constant: Rational,
}

/// Exact constants for all p in {2,3,4} and n <= n_max, in stable
/// (p, n, signature) order.
pub fn constants_table(n_max: usize) -> Result<Vec<ConstantsRow>> {
    if n_max == 0 || n_max > 5 {
        return Err(Error::SizeGuard(n_max, 5));
    }
    let mut rows = Vec::new();
    for p in 2..=4 {
        for n in 1..=n_max {
            if n * p > ENUMERATION_GUARD {
                continue;
            }
            let decomp = enumerate_classes(n, p)?;
            let mut by_sig: Vec<(IndexSignature, Rational)> = Vec::new();
            for term in &decomp.terms {
                match by_sig.iter_mut().find(|(s, _)| *s == term.signature) {
                    Some((_, c)) => *c += term.constant.clone(),
                    None => by_sig.push((term.signature.clone(), term.constant.clone())),
                }
            }
            by_sig.sort_by(|a, b| a.0.cmp(&b.0));
            for (signature, constant) in by_sig {
                rows.push(ConstantsRow {
                    p,
                    n,
                    signature,
                    constant,
                });
            }
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentEstimate {
    pub value: f64,
    pub standard_error: f64,
}

struct TermGeometry {
    /// per component: (variable ids, kernel ids, offset scale in delta units)
    components: Vec<(Vec<usize>, Vec<usize>, usize)>,
}

fn term_geometry(term: &MomentTerm) -> TermGeometry {
    let v = term.arity;
    let mut parent: Vec<usize> = (0..v).collect();
    fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for kernel in &term.kernels {
        for w in kernel.windows(2) {
            let (a, b) = (find(&mut parent, w[0]), find(&mut parent, w[1]));
            if a != b {
                parent[a] = b;
            }
        }
    }
    let mut comps: HashMap<usize, (Vec<usize>, Vec<usize>)> = HashMap::new();
    for x in 0..v {
        let root = find(&mut parent, x);
        comps.entry(root).or_default().0.push(x);
    }
    for (q, kernel) in term.kernels.iter().enumerate() {
        let root = find(&mut parent, kernel[0]);
        comps.get_mut(&root).unwrap().1.push(q);
    }
    let mut components: Vec<(Vec<usize>, Vec<usize>, usize)> = comps
        .into_values()
        .map(|(vars, kernels)| {
            let scale = kernels.len(); // graph diameter in delta-steps
            (vars, kernels, scale)
        })
        .collect();
    components.sort();
    TermGeometry { components }
}

/// Monte Carlo estimate of one term's integral
/// `t^arity * Integral over W^arity of the product of pairwise indicators`.
///
/// Each connected component of the kernel hypergraph is sampled around a
/// uniform anchor: the remaining variables are anchor plus a uniform offset
/// in `[-c delta, c delta]^d`, where `c` bounds the component diameter in
/// delta-steps, so the sampling box covers the integrand's support exactly.
fn estimate_term(
    term: &MomentTerm,
    d: usize,
    t: f64,
    delta: f64,
    samples: usize,
    seed: u64,
) -> Result<MomentEstimate> {
    let geo = term_geometry(term);
    let mut ln_prefactor = term.arity as f64 * t.ln();
    for (vars, _, scale) in &geo.components {
        ln_prefactor +=
            (vars.len() as f64 - 1.0) * d as f64 * (2.0 * *scale as f64 * delta).ln();
    }
    let prefactor = ln_prefactor.exp();
    if !prefactor.is_finite() {
        return Err(Error::Overflow("decomposition term prefactor".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut positions = vec![0.0f64; term.arity * d];
    let mut hits = 0usize;
    for _ in 0..samples {
        let mut ok = true;
        'comps: for (vars, kernels, scale) in &geo.components {
            let anchor = vars[0];
            for j in 0..d {
                positions[anchor * d + j] = rng.random::<f64>() - 0.5;
            }
            let half = *scale as f64 * delta;
            for &v in &vars[1..] {
                let mut inside = true;
                for j in 0..d {
                    let x = positions[anchor * d + j] + (rng.random::<f64>() * 2.0 - 1.0) * half;
                    positions[v * d + j] = x;
                    inside &= (-0.5..=0.5).contains(&x);
                }
                if !inside {
                    ok = false;
                    break 'comps;
                }
            }
            for &q in kernels {
                let kernel = &term.kernels[q];
                for (i, &a) in kernel.iter().enumerate() {
                    for &b in &kernel[i + 1..] {
                        if !linf_within(
                            &positions[a * d..(a + 1) * d],
                            &positions[b * d..(b + 1) * d],
                            delta,
                        ) {
                            ok = false;
                            break 'comps;
                        }
                    }
                }
            }
        }
        hits += ok as usize;
    }
    let p_hat = hits as f64 / samples as f64;
    let se = (p_hat * (1.0 - p_hat) / samples as f64).sqrt();
    Ok(MomentEstimate {
        value: prefactor * p_hat,
        standard_error: prefactor * se,
    })
}

fn check_rips_order(decomp: &MomentDecomposition, params: &RipsParams) -> Result<()> {
    params.validate()?;
    if decomp.n != params.k + 1 {
        return Err(Error::Parameter(format!(
            "decomposition order n = {} does not match kernel order k + 1 = {}",
            decomp.n,
            params.k + 1
        )));
    }
    Ok(())
}

/// Estimates `E[F_k^p]` by evaluating every decomposition term's integral by
/// Monte Carlo and summing with the exact constants.
pub fn moment_estimate(
    decomp: &MomentDecomposition,
    params: &RipsParams,
    mc_samples: usize,
    seed: u64,
) -> Result<MomentEstimate> {
    check_rips_order(decomp, params)?;
    if mc_samples < 2 {
        return Err(Error::Parameter("mc_samples must be >= 2".into()));
    }
    let mut value = 0.0;
    let mut var = 0.0;
    for (idx, term) in decomp.terms.iter().enumerate() {
        let est = estimate_term(
            term,
            params.d,
            params.t,
            params.delta,
            mc_samples,
            crate::geometry::derive_seed(seed, idx as u64),
        )?;
        let c = term
            .constant
            .to_f64()
            .ok_or_else(|| Error::NonFinite("decomposition constant".into()))?;
        value += c * est.value;
        var += (c * est.standard_error).powi(2);
    }
    if !value.is_finite() {
        return Err(Error::NonFinite(format!("moment estimate {value}")));
    }
    Ok(MomentEstimate {
        value,
        standard_error: var.sqrt(),
    })
}

/// The r = 1..n terms of the variance corollary (the r = 0 term cancels
/// against `(E F)^2`), estimated by Monte Carlo. Entry `i` is the r = i + 1
/// term.
pub fn variance_terms(
    decomp: &MomentDecomposition,
    params: &RipsParams,
    mc_samples: usize,
    seed: u64,
) -> Result<Vec<MomentEstimate>> {
    if decomp.p != 2 {
        return Err(Error::Parameter(
            "variance terms require the second-moment decomposition".into(),
        ));
    }
    check_rips_order(decomp, params)?;
    let mut out = Vec::with_capacity(decomp.n);
    for r in 1..=decomp.n {
        let term = decomp
            .terms
            .iter()
            .find(|t| t.signature.shared == [r])
            .ok_or_else(|| Error::Parameter(format!("missing r = {r} term")))?;
        let est = estimate_term(
            term,
            params.d,
            params.t,
            params.delta,
            mc_samples,
            crate::geometry::derive_seed(seed, r as u64),
        )?;
        let c = term
            .constant
            .to_f64()
            .ok_or_else(|| Error::NonFinite("decomposition constant".into()))?;
        out.push(MomentEstimate {
            value: c * est.value,
            standard_error: c * est.standard_error,
        });
    }
    Ok(out)
}

/// A purely atomic intensity measure `mu = sum_i weights[i] * delta_{atoms[i]}`;
/// the decomposition integrals become finite sums over atom assignments,
/// which gives an exact cross-check target for tiny configurations.
#[derive(Debug, Clone)]
pub struct AtomicMeasure {
    pub atoms: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

/// Evaluates the decomposition exactly against an atomic measure with the
/// pairwise-distance kernel at radius `delta`.
pub fn moment_exact_atomic(
    decomp: &MomentDecomposition,
    measure: &AtomicMeasure,
    delta: f64,
) -> Result<f64> {
    if measure.atoms.len() != measure.weights.len() || measure.atoms.is_empty() {
        return Err(Error::Parameter("atoms and weights must match".into()));
    }
    let m = measure.atoms.len();
    let close: Vec<Vec<bool>> = (0..m)
        .map(|i| {
            (0..m)
                .map(|j| linf_within(&measure.atoms[i], &measure.atoms[j], delta))
                .collect()
        })
        .collect();
    let mut total = 0.0;
    for term in &decomp.terms {
        let mut assignment = vec![0usize; term.arity];
        let mut term_sum = 0.0;
        loop {
            let ok = term.kernels.iter().all(|kernel| {
                kernel.iter().enumerate().all(|(i, &a)| {
                    kernel[i + 1..]
                        .iter()
                        .all(|&b| close[assignment[a]][assignment[b]])
                })
            });
            if ok {
                term_sum += assignment
                    .iter()
                    .map(|&a| measure.weights[a])
                    .product::<f64>();
            }
            // odometer over atom assignments
            let mut pos = 0;
            loop {
                if pos == term.arity {
                    break;
                }
                assignment[pos] += 1;
                if assignment[pos] < m {
                    break;
                }
                assignment[pos] = 0;
                pos += 1;
            }
            if pos == term.arity {
                break;
            }
        }
        let c = term
            .constant
            .to_f64()
            .ok_or_else(|| Error::NonFinite("decomposition constant".into()))?;
        total += c * term_sum;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rational(num: i64, den: i64) -> Rational {
        Rational::new(BigInt::from(num), BigInt::from(den))
    }

    #[test]
    fn second_moment_constants_n2() {
        let d = enumerate_classes(2, 2).unwrap();
        assert_eq!(d.constant_for(&[0]).unwrap(), 0.25);
        assert_eq!(d.constant_for(&[1]).unwrap(), 1.0);
        assert_eq!(d.constant_for(&[2]).unwrap(), 0.5);
        let sizes: Vec<u64> = d
            .terms
            .iter()
            .map(|t| t.class_size.to_u64().unwrap())
            .collect();
        assert_eq!(sizes.iter().sum::<u64>(), 7);
        assert_eq!(total_map_tuples(2, 2).to_u64().unwrap(), 7);
    }

    #[test]
    fn second_moment_constants_n1() {
        let d = enumerate_classes(1, 2).unwrap();
        assert_eq!(d.constant_for(&[0]).unwrap(), 1.0);
        assert_eq!(d.constant_for(&[1]).unwrap(), 1.0);
    }

    #[test]
    fn general_anchor_constants() {
        // C(n, 0) = 1/n!^2 and C(n, n) = 1/n! for all enumerable n
        for n in 1..=5 {
            let d = enumerate_classes(n, 2).unwrap();
            let zero = d
                .terms
                .iter()
                .find(|t| t.signature.shared == [0])
                .unwrap();
            assert_eq!(
                zero.constant,
                Rational::new(BigInt::from(1), BigInt::from(factorial(n).pow(2)))
            );
            let full = d
                .terms
                .iter()
                .find(|t| t.signature.shared == [n])
                .unwrap();
            assert_eq!(
                full.constant,
                Rational::new(BigInt::from(1), BigInt::from(factorial(n)))
            );
        }
    }

    #[test]
    fn partition_of_unity() {
        for p in 2..=4 {
            for n in 1..=4 {
                if n * p > ENUMERATION_GUARD {
                    continue;
                }
                let d = enumerate_classes(n, p).unwrap();
                let total: BigUint = d.terms.iter().map(|t| t.class_size.clone()).sum();
                assert_eq!(total, total_map_tuples(n, p), "n={n} p={p}");
            }
        }
    }

    /// Brute-force construction of every identification-map tuple, classified
    /// by the same membership-pattern key: an independent oracle for both the
    /// class sizes and the partition of unity.
    fn brute_force_classes(n: usize, p: usize) -> HashMap<State, u64> {
        // configuration: list of (mask, label) per variable; labels only make
        // variables distinguishable during enumeration
        let mut configs: Vec<Vec<u8>> = vec![vec![0b1; n]];
        for stage in 1..p {
            let bit = 1u8 << stage;
            let mut next = Vec::new();
            for config in &configs {
                let existing = config.len();
                // choose an ordered injective assignment of a subset of the n
                // fresh variables onto existing variables
                let mut stack: Vec<(usize, Vec<Option<usize>>)> = vec![(0, Vec::new())];
                while let Some((idx, assign)) = stack.pop() {
                    if idx == n {
                        let mut cfg = config.clone();
                        let mut fresh = 0;
                        for target in &assign {
                            match target {
                                Some(t) => cfg[*t] |= bit,
                                None => fresh += 1,
                            }
                        }
                        for _ in 0..fresh {
                            cfg.push(bit);
                        }
                        next.push(cfg);
                        continue;
                    }
                    let mut with_none = assign.clone();
                    with_none.push(None);
                    stack.push((idx + 1, with_none));
                    for target in 0..existing {
                        if assign.contains(&Some(target)) {
                            continue;
                        }
                        let mut with_t = assign.clone();
                        with_t.push(Some(target));
                        stack.push((idx + 1, with_t));
                    }
                }
            }
            configs = next;
        }
        let mut classes: HashMap<State, u64> = HashMap::new();
        for config in configs {
            let mut counts: HashMap<u8, usize> = HashMap::new();
            for mask in config {
                *counts.entry(mask).or_default() += 1;
            }
            let mut key: State = counts.into_iter().collect();
            key.sort_unstable();
            *classes.entry(key).or_default() += 1;
        }
        classes
    }

    #[test]
    fn class_sizes_match_explicit_map_enumeration() {
        for (n, p) in [(1, 2), (1, 3), (1, 4), (2, 2), (2, 3), (2, 4), (3, 2), (3, 3), (4, 2)] {
            let brute = brute_force_classes(n, p);
            let d = enumerate_classes(n, p).unwrap();
            assert_eq!(d.terms.len(), brute.len(), "n={n} p={p}: class count");
            for term in &d.terms {
                // reconstruct the state key from the kernels
                let mut counts: HashMap<u8, usize> = HashMap::new();
                for v in 0..term.arity {
                    let mut mask = 0u8;
                    for (q, kernel) in term.kernels.iter().enumerate() {
                        if kernel.contains(&v) {
                            mask |= 1 << q;
                        }
                    }
                    *counts.entry(mask).or_default() += 1;
                }
                let mut key: State = counts.into_iter().collect();
                key.sort_unstable();
                assert_eq!(
                    brute.get(&key).copied().unwrap(),
                    term.class_size.to_u64().unwrap(),
                    "n={n} p={p} key={key:?}"
                );
            }
        }
    }

    #[test]
    fn third_moment_signature_splits_into_distinct_classes() {
        // p = 3, n = 2, signature (r, s_Y, s_Z) = (1, 1, 0) covers maps that
        // hit the doubly-shared variable and maps that hit the other one;
        // these integrate differently and must stay separate terms
        let d = enumerate_classes(2, 3).unwrap();
        let matching: Vec<_> = d
            .terms
            .iter()
            .filter(|t| t.signature.shared == [1, 1, 0])
            .collect();
        assert_eq!(matching.len(), 2);
        assert_ne!(matching[0].kernels, matching[1].kernels);
    }

    #[test]
    fn constants_table_ordering_and_guard() {
        let rows = constants_table(2).unwrap();
        let p2n2: Vec<_> = rows.iter().filter(|r| r.p == 2 && r.n == 2).collect();
        assert_eq!(p2n2.len(), 3);
        assert_eq!(p2n2[0].constant, rational(1, 4));
        assert_eq!(p2n2[1].constant, rational(1, 1));
        assert_eq!(p2n2[2].constant, rational(1, 2));
        let mut keys: Vec<(usize, usize, Vec<usize>)> = rows
            .iter()
            .map(|r| (r.p, r.n, r.signature.shared.clone()))
            .collect();
        let sorted = {
            let mut s = keys.clone();
            s.sort();
            s
        };
        assert_eq!(keys, sorted);
        keys.dedup();
        assert_eq!(keys.len(), rows.len());
        assert!(constants_table(6).is_err());
        assert!(enumerate_classes(6, 4).is_err());
    }

    fn test_measure() -> AtomicMeasure {
        AtomicMeasure {
            atoms: vec![
                vec![0.00, 0.00],
                vec![0.15, 0.05],
                vec![0.05, 0.18],
                vec![-0.35, -0.30],
            ],
            weights: vec![0.9, 0.7, 1.1, 0.5],
        }
    }

    /// Exhaustive moments of the U-statistic under the atomic measure:
    /// atom i carries Poisson(weight_i) many point instances, and
    /// `F = sum_alpha h(alpha) prod_i C(N_i, alpha_i)` over compositions
    /// alpha of n. Truncating the Poisson sums at 30 leaves error far below
    /// the 10-digit comparison tolerance.
    fn exhaustive_moment(measure: &AtomicMeasure, delta: f64, n: usize, p: usize) -> f64 {
        let m = measure.atoms.len();
        let close: Vec<Vec<bool>> = (0..m)
            .map(|i| {
                (0..m)
                    .map(|j| linf_within(&measure.atoms[i], &measure.atoms[j], delta))
                    .collect()
            })
            .collect();
        // compositions alpha of n over m atoms with h(alpha) = 1
        let mut good: Vec<Vec<usize>> = Vec::new();
        let mut alpha = vec![0usize; m];
        fn gen(
            alpha: &mut Vec<usize>,
            pos: usize,
            left: usize,
            close: &[Vec<bool>],
            good: &mut Vec<Vec<usize>>,
        ) {
            if pos + 1 == alpha.len() {
                alpha[pos] = left;
                let support: Vec<usize> = (0..alpha.len()).filter(|&i| alpha[i] > 0).collect();
                let ok = support
                    .iter()
                    .enumerate()
                    .all(|(i, &a)| support[i + 1..].iter().all(|&b| close[a][b]));
                if ok {
                    good.push(alpha.clone());
                }
                alpha[pos] = 0;
                return;
            }
            for take in 0..=left {
                alpha[pos] = take;
                gen(alpha, pos + 1, left - take, close, good);
            }
            alpha[pos] = 0;
        }
        gen(&mut alpha, 0, n, &close, &mut good);

        const CAP: usize = 30;
        let pmf: Vec<Vec<f64>> = measure
            .weights
            .iter()
            .map(|&w| {
                (0..=CAP)
                    .map(|j| {
                        ((j as f64) * w.ln() - w - (1..=j).map(|i| (i as f64).ln()).sum::<f64>())
                            .exp()
                    })
                    .collect()
            })
            .collect();
        let choose = |nn: usize, kk: usize| -> f64 {
            if kk > nn {
                0.0
            } else {
                binomial(nn, kk).to_f64().unwrap()
            }
        };
        let mut counts = vec![0usize; m];
        let mut total = 0.0;
        loop {
            let f: f64 = good
                .iter()
                .map(|a| {
                    (0..m)
                        .map(|i| choose(counts[i], a[i]))
                        .product::<f64>()
                })
                .sum();
            let weight: f64 = (0..m).map(|i| pmf[i][counts[i]]).product();
            total += weight * f.powi(p as i32);
            let mut pos = 0;
            loop {
                if pos == m {
                    break;
                }
                counts[pos] += 1;
                if counts[pos] <= CAP {
                    break;
                }
                counts[pos] = 0;
                pos += 1;
            }
            if pos == m {
                break;
            }
        }
        total
    }

    #[test]
    fn decomposition_matches_exhaustive_atomic_moments() {
        let measure = test_measure();
        let delta = 0.2;
        for (n, p) in [(1, 2), (1, 3), (1, 4), (2, 2), (2, 3), (2, 4), (3, 2), (4, 2)] {
            let decomp = enumerate_classes(n, p).unwrap();
            let predicted = moment_exact_atomic(&decomp, &measure, delta).unwrap();
            let exhaustive = exhaustive_moment(&measure, delta, n, p);
            assert!(
                (predicted - exhaustive).abs() <= 1e-10 * exhaustive.abs().max(1.0),
                "n={n} p={p}: {predicted} vs {exhaustive}"
            );
        }
    }

    #[test]
    fn variance_terms_k1_shapes() {
        // k = 1, n = 2: the r = 2 term is the expectation, the r = 1 term is
        // close to t^3 (2 delta)^{2d} (equality up to boundary effects)
        let params = RipsParams::new(2, 50.0, 0.1, 1).unwrap();
        let decomp = enumerate_classes(2, 2).unwrap();
        let terms = variance_terms(&decomp, &params, 400_000, 9).unwrap();
        assert_eq!(terms.len(), 2);
        let e = crate::analytic::expectation_bounds(&params).unwrap();
        let r2 = terms[1].value;
        assert!(
            r2 > e.lower - 4.0 * terms[1].standard_error
                && r2 < e.upper + 4.0 * terms[1].standard_error,
            "r = 2 term {r2} outside expectation sandwich [{}, {}]",
            e.lower,
            e.upper
        );
        let direct = 50f64.powi(3) * (2.0f64 * 0.1).powi(4);
        let r1 = terms[0].value;
        assert!(r1 <= direct * 1.001 && r1 > direct * (1.0f64 - 2.0 * 0.1).powi(2));
        let total: f64 = terms.iter().map(|t| t.value).sum();
        assert!(total >= 0.0);
    }

    #[test]
    fn moment_estimate_dominates_squared_expectation() {
        let params = RipsParams::new(2, 30.0, 0.1, 1).unwrap();
        let decomp = enumerate_classes(2, 2).unwrap();
        let second = moment_estimate(&decomp, &params, 200_000, 4).unwrap();
        let e = crate::analytic::expectation_bounds(&params).unwrap();
        // E[F^2] >= (E F)^2; compare against the lower expectation bound
        assert!(second.value + 4.0 * second.standard_error >= e.lower * e.lower);
    }

    #[test]
    fn moment_estimate_validates_inputs() {
        let params = RipsParams::new(2, 30.0, 0.1, 2).unwrap();
        let decomp = enumerate_classes(2, 2).unwrap();
        // n = 2 but k + 1 = 3
        assert!(moment_estimate(&decomp, &params, 1000, 1).is_err());
    }
}
