//! Exact weights, enumeration oracles and exact samplers for the Jack
//! measure, the multilevel Jack measure and the discrete beta-ensemble,
//! together with the conditional gap law and the finite-N expectation
//! identities (degree-one polynomial structure and gamma-ratio shift
//! identities) used by the verification harness.
//!
//! Beta-ensemble states are always represented by the underlying integer
//! partition; real-valued lattice coordinates are derived on demand so that
//! support membership tests stay exact.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::jack::{gamma_ratio_f, log_j_principal, log_skew_j_one, signed_lgamma, LogValue};
use crate::partitions::{
    box_stats, interlaces, interlacing_predecessors, partitions_of, GTPattern, Partition,
};

#[derive(Debug, Error, PartialEq)]
pub enum MeasureError {
    #[error("invalid measure spec: N = {n}, s = {s}, theta = {theta}")]
    BadSpec { n: usize, s: f64, theta: f64 },
    #[error("cotransition kernel needs len(lambda) <= k and k >= 2, got len = {len}, k = {k}")]
    CotransitionLevel { len: usize, k: usize },
    #[error("weight cutoff {cutoff} leaves tail mass {tail_bound:.3e} > requested {requested:.3e}")]
    TailBoundTooLarge {
        cutoff: u32,
        tail_bound: f64,
        requested: f64,
    },
    #[error("probe point {xi} is within {dist:.3e} of a support lattice point")]
    ProbeNearLattice { xi: f64, dist: f64 },
    #[error("identity checks need N >= 2, got N = {0}")]
    UnsupportedSingleRow(usize),
    #[error("conditional gap law has empty support")]
    EmptySupport,
    #[error("conditioning data malformed: {0} top coordinates, {1} second-row coordinates")]
    BadConditioning(usize, usize),
    #[error("state has {len} rows, at most {max} allowed")]
    BadState { len: usize, max: usize },
}

/// Parameters of the fixed-time Jack measure: `N` levels, time `s`, theta.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JackMeasureSpec {
    pub n_levels: usize,
    pub s: f64,
    pub theta: f64,
}

impl JackMeasureSpec {
    pub fn new(n_levels: usize, s: f64, theta: f64) -> Result<Self, MeasureError> {
        if n_levels < 1 || !(s >= 0.0) || !(theta > 0.0) {
            return Err(MeasureError::BadSpec {
                n: n_levels,
                s,
                theta,
            });
        }
        Ok(JackMeasureSpec { n_levels, s, theta })
    }
}

/// Log-weight of `lambda` under the fixed-time Jack measure:
/// `exp(-theta s N) (s theta)^{|lambda|} prod (N theta + coarm - theta coleg)
/// / ((arm + theta leg + theta)(arm + theta leg + 1))`,
/// exactly zero when the diagram has more than `N` rows.
pub fn log_weight_jack(lambda: &Partition, spec: &JackMeasureSpec) -> LogValue {
    let (n, s, theta) = (spec.n_levels, spec.s, spec.theta);
    if lambda.length() > n {
        return LogValue::ZERO;
    }
    let mut v = LogValue::from_log(-theta * s * n as f64);
    v *= LogValue::from_f64(s * theta).powi(lambda.weight() as i32);
    for (i, j) in lambda.boxes() {
        let st = box_stats(lambda, i, j).expect("box from iterator");
        let num = n as f64 * theta + st.coarm as f64 - theta * st.coleg as f64;
        let c = st.arm as f64 + theta * st.leg as f64;
        v *= LogValue::from_f64(num / ((c + theta) * (c + 1.0)));
    }
    v
}

/// The gamma-ratio chain factor: one-variable skew value
/// `J_{lambda/mu}(1^1)` written as a product of ratios of
/// `f(z) = Gamma(z+1)/Gamma(z+theta)` over pairs `1 <= i <= j <= k-1`.
///
/// This is an independent evaluation route from
/// [`log_skew_j_one`](crate::jack::log_skew_j_one); the two are
/// cross-checked in tests.
pub fn log_skew_one_gamma_form(
    lambda: &Partition,
    mu: &Partition,
    level: usize,
    theta: f64,
) -> LogValue {
    if !interlaces(mu, lambda) {
        return LogValue::ZERO;
    }
    let f = |z: f64| gamma_ratio_f(z, theta).expect("nonnegative argument");
    let mut v = LogValue::ONE;
    for j in 1..level {
        for i in 1..=j {
            let off = theta * (j - i) as f64;
            v *= f(mu.part(i) as f64 - mu.part(j) as f64 + off);
            v *= f(lambda.part(i) as f64 - lambda.part(j + 1) as f64 + off);
            v = v.div(f(mu.part(i) as f64 - lambda.part(j + 1) as f64 + off));
            v = v.div(f(lambda.part(i) as f64 - mu.part(j) as f64 + off));
        }
    }
    v
}

/// Log-weight of a Gelfand-Tsetlin pattern under the multilevel Jack
/// measure at time `s`: Plancherel top factor, principal bottom factor and
/// the chain of one-variable skew factors between consecutive rows.
pub fn log_weight_multilevel(p: &GTPattern, s: f64, theta: f64) -> LogValue {
    let n = p.base_level();
    let top = p.top_level();
    let lam_top = p.row(top);
    let lam_bot = p.row(n);
    if lam_bot.length() > n {
        return LogValue::ZERO;
    }
    let mut v = LogValue::from_log(-theta * s * top as f64);
    v *= LogValue::from_f64(s * theta).powi(lam_top.weight() as i32);
    for (i, j) in lam_top.boxes() {
        let st = box_stats(lam_top, i, j).expect("box from iterator");
        let c = st.arm as f64 + theta * st.leg as f64;
        v = v.div(LogValue::from_f64(c + 1.0));
    }
    for (i, j) in lam_bot.boxes() {
        let st = box_stats(lam_bot, i, j).expect("box from iterator");
        let num = n as f64 * theta + st.coarm as f64 - theta * st.coleg as f64;
        let c = st.arm as f64 + theta * st.leg as f64;
        v *= LogValue::from_f64(num / (c + theta));
    }
    for k in (n + 1)..=top {
        v *= log_skew_one_gamma_form(p.row(k), p.row(k - 1), k, theta);
    }
    v
}

/// A finite distribution over explicit states.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiscreteDistribution<S> {
    pub states: Vec<S>,
    pub probs: Vec<f64>,
}

impl<S> DiscreteDistribution<S> {
    /// Inverse-CDF draw; `u` uniform in `[0, 1)`.
    pub fn sample_index(&self, u: f64) -> usize {
        let mut acc = 0.0;
        for (i, &p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        self.probs.len() - 1
    }
}

/// Cotransition kernel at level `k`: the distribution of the row below a
/// given `lambda`, proportional to `J_mu(1^{k-1}) J_{lambda/mu}(1^1)`;
/// stochasticity (normalization by `J_lambda(1^k)`) is exact.
pub fn cotransition_pmf(
    lambda: &Partition,
    k: usize,
    theta: f64,
) -> Result<DiscreteDistribution<Partition>, MeasureError> {
    if k < 2 || lambda.length() > k {
        return Err(MeasureError::CotransitionLevel {
            len: lambda.length(),
            k,
        });
    }
    let mut states = Vec::new();
    let mut weights = Vec::new();
    for mu in interlacing_predecessors(lambda) {
        if mu.length() > k - 1 {
            continue;
        }
        let w = log_j_principal(&mu, k - 1, 1.0, theta)
            .mul(log_skew_j_one(lambda, &mu, 1.0, theta));
        states.push(mu);
        weights.push(w);
    }
    let max_log = weights
        .iter()
        .filter(|w| !w.is_zero())
        .map(|w| w.log_abs)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut probs: Vec<f64> = weights
        .iter()
        .map(|w| {
            if w.is_zero() {
                0.0
            } else {
                f64::from(w.sign) * (w.log_abs - max_log).exp()
            }
        })
        .collect();
    let total: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= total;
    }
    Ok(DiscreteDistribution { states, probs })
}

/// A truncated, normalized measure over explicit states together with a
/// rigorous bound on the omitted mass.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnumeratedMeasure<S> {
    pub states: Vec<S>,
    pub probs: Vec<f64>,
    pub tail_bound: f64,
}

impl<S> EnumeratedMeasure<S> {
    pub fn expectation(&self, f: impl Fn(&S) -> f64) -> f64 {
        self.states
            .iter()
            .zip(&self.probs)
            .map(|(s, &p)| p * f(s))
            .sum()
    }
}

impl<S: Serialize> EnumeratedMeasure<S> {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("enumerated measure serializes")
    }
}

/// Upper tail `P(X > m)` of a Poisson variable with the given mean, summed
/// upward from `m + 1` for accuracy at small tails.
pub fn poisson_upper_tail(mean: f64, m: u32) -> f64 {
    if mean == 0.0 {
        return 0.0;
    }
    let k0 = m as f64 + 1.0;
    let (lg, _) = signed_lgamma(k0 + 1.0);
    let mut term = (k0 * mean.ln() - mean - lg).exp();
    let mut total = 0.0;
    let mut k = k0;
    while term > total * 1e-18 + 1e-320 {
        total += term;
        k += 1.0;
        term *= mean / k;
    }
    total
}

fn normalize_logs(weights: &[LogValue]) -> Vec<f64> {
    let max_log = weights
        .iter()
        .filter(|w| !w.is_zero())
        .map(|w| w.log_abs)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut probs: Vec<f64> = weights
        .iter()
        .map(|w| {
            if w.is_zero() {
                0.0
            } else {
                f64::from(w.sign) * (w.log_abs - max_log).exp()
            }
        })
        .collect();
    let total: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= total;
    }
    probs
}

/// Enumerates the fixed-time Jack measure over `|lambda| <= cutoff`,
/// normalized on the truncation. The tail bound is the exact Poisson upper
/// tail of `|lambda|` at mean `N theta s`; errors if it exceeds
/// `requested_tol`.
pub fn enumerate(
    spec: &JackMeasureSpec,
    cutoff: u32,
    requested_tol: f64,
) -> Result<EnumeratedMeasure<Partition>, MeasureError> {
    let mean = spec.n_levels as f64 * spec.theta * spec.s;
    let tail_bound = poisson_upper_tail(mean, cutoff);
    if tail_bound > requested_tol {
        return Err(MeasureError::TailBoundTooLarge {
            cutoff,
            tail_bound,
            requested: requested_tol,
        });
    }
    let mut states = Vec::new();
    let mut weights = Vec::new();
    for w in 0..=cutoff {
        for lambda in partitions_of(w, spec.n_levels) {
            let lw = log_weight_jack(&lambda, spec);
            states.push(lambda);
            weights.push(lw);
        }
    }
    let probs = normalize_logs(&weights);
    Ok(EnumeratedMeasure {
        states,
        probs,
        tail_bound,
    })
}

/// Enumerates the multilevel measure on patterns with rows `n..=N` and
/// `|lambda^N| <= cutoff`.
pub fn enumerate_multilevel(
    base: usize,
    top: usize,
    s: f64,
    theta: f64,
    cutoff: u32,
    requested_tol: f64,
) -> Result<EnumeratedMeasure<GTPattern>, MeasureError> {
    let mean = top as f64 * theta * s;
    let tail_bound = poisson_upper_tail(mean, cutoff);
    if tail_bound > requested_tol {
        return Err(MeasureError::TailBoundTooLarge {
            cutoff,
            tail_bound,
            requested: requested_tol,
        });
    }
    let mut states = Vec::new();
    let mut weights = Vec::new();
    let mut stack: Vec<Vec<Partition>> = Vec::new();
    for w in 0..=cutoff {
        for lam_top in partitions_of(w, top) {
            stack.clear();
            stack.push(vec![lam_top.clone()]);
            // depth-first extension downward to the base level
            while let Some(chain) = stack.pop() {
                let level = top - chain.len() + 1;
                if level == base {
                    let rows: Vec<Partition> = chain.iter().rev().cloned().collect();
                    let p = GTPattern::new(base, rows).expect("interlacing by construction");
                    let lw = log_weight_multilevel(&p, s, theta);
                    states.push(p);
                    weights.push(lw);
                    continue;
                }
                let cur = chain.last().unwrap();
                for mu in interlacing_predecessors(cur) {
                    if mu.length() > level - 1 {
                        continue;
                    }
                    let mut next = chain.clone();
                    next.push(mu);
                    stack.push(next);
                }
            }
        }
    }
    let probs = normalize_logs(&weights);
    Ok(EnumeratedMeasure {
        states,
        probs,
        tail_bound,
    })
}

/// Exact sampler for the multilevel measure at a fixed time: draws the top
/// row from the enumerated fixed-time law, then walks down with the
/// cotransition kernel level by level.
pub struct MultilevelSampler {
    spec: JackMeasureSpec,
    top_row: EnumeratedMeasure<Partition>,
    kernel_cache: HashMap<(Partition, usize), DiscreteDistribution<Partition>>,
}

impl MultilevelSampler {
    pub fn new(
        spec: JackMeasureSpec,
        cutoff: u32,
        requested_tol: f64,
    ) -> Result<Self, MeasureError> {
        let top_row = enumerate(&spec, cutoff, requested_tol)?;
        Ok(MultilevelSampler {
            spec,
            top_row,
            kernel_cache: HashMap::new(),
        })
    }

    pub fn tail_bound(&self) -> f64 {
        self.top_row.tail_bound
    }

    /// One pattern with rows `1..=N`, distributed per the multilevel law
    /// (up to the enumeration tail on the top row).
    pub fn sample(&mut self, rng: &mut impl rand::Rng) -> GTPattern {
        let u: f64 = rng.random();
        let idx = {
            let mut acc = 0.0;
            let mut pick = self.top_row.states.len() - 1;
            for (i, &p) in self.top_row.probs.iter().enumerate() {
                acc += p;
                if u < acc {
                    pick = i;
                    break;
                }
            }
            pick
        };
        let mut rows = vec![self.top_row.states[idx].clone()];
        let theta = self.spec.theta;
        for k in (2..=self.spec.n_levels).rev() {
            let cur = rows.last().unwrap().clone();
            let kernel = self
                .kernel_cache
                .entry((cur.clone(), k))
                .or_insert_with(|| cotransition_pmf(&cur, k, theta).expect("valid level"));
            let u: f64 = rng.random();
            let mu = kernel.states[kernel.sample_index(u)].clone();
            rows.push(mu);
        }
        rows.reverse();
        GTPattern::new(1, rows).expect("cotransition preserves interlacing")
    }
}

/// The lattice on which the product-form ensemble weight lives:
/// `x_i = lambda_{N-i+1} + theta (i-1)`, increasing in `i`. Gaps agree with
/// those of [`ell_coordinates`](crate::partitions::ell_coordinates), which
/// is offset by a constant `theta`.
pub fn product_lattice(lambda: &Partition, n: usize, theta: f64) -> Vec<f64> {
    (1..=n)
        .map(|i| lambda.part(n - i + 1) as f64 + theta * (i - 1) as f64)
        .collect()
}

/// Log-weight of the discrete beta-ensemble equivalent of the fixed-time
/// Jack measure: pairwise gamma-ratio interaction
/// `Gamma(g+1)Gamma(g+theta) / (Gamma(g)Gamma(g+1-theta))` over gaps `g`,
/// single-site weight `(s theta)^x / Gamma(x+1)` on the product lattice,
/// and the explicit normalization prefactor. Equals [`log_weight_jack`] of
/// the underlying partition.
pub fn log_weight_beta_ensemble(
    lambda: &Partition,
    n: usize,
    s: f64,
    theta: f64,
) -> Result<LogValue, MeasureError> {
    if lambda.length() > n {
        return Err(MeasureError::BadState {
            len: lambda.length(),
            max: n,
        });
    }
    if s == 0.0 {
        return Ok(if lambda.is_empty() {
            LogValue::ONE
        } else {
            LogValue::ZERO
        });
    }
    let lattice = product_lattice(lambda, n, theta);
    let mut log = 0.0f64;
    let (lg_theta, _) = signed_lgamma(theta);
    log += n as f64 * lg_theta;
    for i in 1..=n {
        let (lg, _) = signed_lgamma(i as f64 * theta);
        log -= lg;
    }
    log += -s * theta * n as f64 + lambda.weight() as f64 * (s * theta).ln();
    for i in 0..n {
        for j in (i + 1)..n {
            let g = lattice[j] - lattice[i];
            let (a, _) = signed_lgamma(g + 1.0);
            let (b, _) = signed_lgamma(g + theta);
            let (c, _) = signed_lgamma(g);
            let (d, _) = signed_lgamma(g + 1.0 - theta);
            log += a + b - c - d;
        }
    }
    for &x in &lattice {
        let (lg, _) = signed_lgamma(x + 1.0);
        log -= lg;
    }
    Ok(LogValue::from_log(log))
}

/// The degree-one observable of the ensemble: for a probe `xi` off the
/// support lattice,
/// `R(xi) = xi E[prod (1 - theta/(xi - x_i))] + s theta E[prod (1 + theta/(xi - x_i - 1))]`
/// with `x_i` on the product lattice. Expectations are taken over the
/// enumerated measure.
pub fn nekrasov_r(
    xi: f64,
    n: usize,
    s: f64,
    theta: f64,
    em: &EnumeratedMeasure<Partition>,
) -> Result<f64, MeasureError> {
    const MIN_DIST: f64 = 1e-6;
    for lambda in &em.states {
        for &x in &product_lattice(lambda, n, theta) {
            let d = (xi - x).abs().min((xi - x - 1.0).abs());
            if d < MIN_DIST {
                return Err(MeasureError::ProbeNearLattice { xi, dist: d });
            }
        }
    }
    let mut first = 0.0;
    let mut second = 0.0;
    for (lambda, &p) in em.states.iter().zip(&em.probs) {
        let lattice = product_lattice(lambda, n, theta);
        let mut prod_minus = 1.0;
        let mut prod_plus = 1.0;
        for &x in &lattice {
            prod_minus *= 1.0 - theta / (xi - x);
            prod_plus *= 1.0 + theta / (xi - x - 1.0);
        }
        first += p * prod_minus;
        second += p * prod_plus;
    }
    Ok(xi * first + s * theta * second)
}

/// Residuals of the two exact shift identities for the top particle: with
/// `D(x)` the interaction product and `x_N` the largest lattice coordinate,
/// `E[D(x_N - 1)/D(x_N)] = E[s theta / (x_N + 1)]` and
/// `E[D(x_N + 1)/D(x_N)] = E[(x_N / (s theta)) 1{top gap > theta}]`.
/// Requires `N >= 2`; the first identity hinges on a boundary vanishing
/// that has no analogue for a single row.
pub fn lemma54_check(
    n: usize,
    s: f64,
    theta: f64,
    em: &EnumeratedMeasure<Partition>,
) -> Result<(f64, f64), MeasureError> {
    if n < 2 {
        return Err(MeasureError::UnsupportedSingleRow(n));
    }
    let mut e_down = 0.0;
    let mut e_up = 0.0;
    let mut e_sink = 0.0;
    let mut e_source = 0.0;
    for (lambda, &p) in em.states.iter().zip(&em.probs) {
        let lattice = product_lattice(lambda, n, theta);
        let x_top = lattice[n - 1];
        let mut down = 1.0;
        let mut up = 1.0;
        for &x in &lattice[..n - 1] {
            let g = x_top - x;
            // D(x-1)/D(x) and D(x+1)/D(x) expanded per gap via the gamma
            // functional equation
            down *= (g - 1.0) * (g - theta) / (g * (g + theta - 1.0));
            up *= (g + 1.0) * (g + theta) / (g * (g + 1.0 - theta));
        }
        e_down += p * down;
        e_up += p * up;
        e_sink += p * s * theta / (x_top + 1.0);
        // the indicator `top gap > theta` is the integer test lambda_1 > lambda_2
        if lambda.part(1) > lambda.part(2) {
            e_source += p * x_top / (s * theta);
        }
    }
    Ok(((e_down - e_sink).abs(), (e_up - e_source).abs()))
}

/// The conditional law of the top gap given both full rows except the
/// second row's first coordinate: a pmf on `k = 0..=top_gap - theta`
/// proportional to
/// `Gamma(theta+k)/Gamma(1+k) * prod_i (l_N - m_i - k - theta) *
/// prod_i Gamma(l_N - l_i - k) / Gamma(l_N - l_i - k + 1 - theta)`.
///
/// `ell` are the `N` increasing top-row coordinates and `m` the `N-2`
/// lowest second-row coordinates (the largest one is integrated out).
pub fn conditional_gap_pmf(
    ell: &[f64],
    m: &[f64],
    theta: f64,
) -> Result<DiscreteDistribution<u32>, MeasureError> {
    let n = ell.len();
    if n < 2 || m.len() + 2 != n {
        return Err(MeasureError::BadConditioning(n, m.len()));
    }
    let span = ell[n - 1] - ell[n - 2] - theta;
    let k_max = span.round();
    if k_max < -1e-9 {
        return Err(MeasureError::EmptySupport);
    }
    let k_max = k_max.max(0.0) as u32;
    let mut weights = Vec::with_capacity(k_max as usize + 1);
    for k in 0..=k_max {
        let kf = k as f64;
        let mut w = LogValue::from_log({
            let (a, _) = signed_lgamma(theta + kf);
            let (b, _) = signed_lgamma(1.0 + kf);
            a - b
        });
        for &mi in m {
            w *= LogValue::from_f64(ell[n - 1] - mi - kf - theta);
        }
        for &li in &ell[..n - 1] {
            let z = ell[n - 1] - li - kf;
            let (a, _) = signed_lgamma(z);
            let (b, _) = signed_lgamma(z + 1.0 - theta);
            w *= LogValue::from_log(a - b);
        }
        weights.push(w);
    }
    if weights.iter().all(|w| w.is_zero()) {
        return Err(MeasureError::EmptySupport);
    }
    let probs = normalize_logs(&weights);
    Ok(DiscreteDistribution {
        states: (0..=k_max).collect(),
        probs,
    })
}

/// Closed-form ratio `f(k)/f(0)` of the conditional gap law:
/// `Gamma(theta+k)/(Gamma(1+k)Gamma(theta)) * prod_i (1 - k/(l_N - m_i - theta))
/// * prod_i prod_{j=1}^k (1 - (theta-1)/(l_N - l_i - j))`.
pub fn conditional_gap_ratio(ell: &[f64], m: &[f64], theta: f64, k: u32) -> f64 {
    let n = ell.len();
    let kf = k as f64;
    if kf > ell[n - 1] - ell[n - 2] - theta + 1e-9 {
        return 0.0;
    }
    let (a, _) = signed_lgamma(theta + kf);
    let (b, _) = signed_lgamma(1.0 + kf);
    let (c, _) = signed_lgamma(theta);
    let mut r = (a - b - c).exp();
    for &mi in m {
        r *= 1.0 - kf / (ell[n - 1] - mi - theta);
    }
    for &li in &ell[..n - 1] {
        for j in 1..=k {
            r *= 1.0 - (theta - 1.0) / (ell[n - 1] - li - j as f64);
        }
    }
    r
}
