//! Numerically stable evaluation of Jack-polynomial specializations in
//! signed log-space: principal and Plancherel values, dual conversion
//! factors, one-variable skew polynomials and the normalization constant of
//! the Cauchy identity.
//!
//! Gamma-function ratios at integer-offset arguments are evaluated as
//! explicit finite products or via a signed log-gamma, never as the
//! difference of two log-gamma values straddling a pole.

use crate::partitions::{box_stats, interlaces, Partition};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum JackError {
    #[error("gamma ratio is singular at z = {z} (numerator pole, no cancellation)")]
    SingularGammaRatio { z: f64 },
    #[error("adding a box to row {row} of {mu} does not give a valid diagram")]
    InvalidBox { mu: Partition, row: usize },
    #[error("unsupported specialization pair for the Cauchy normalization")]
    UnsupportedPair,
    #[error("theta must be positive, got {0}")]
    BadTheta(f64),
}

/// Jack parameter `theta > 0` (`beta = 2 theta`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JackParams {
    pub theta: f64,
}

impl JackParams {
    pub fn new(theta: f64) -> Result<Self, JackError> {
        if !(theta > 0.0) || !theta.is_finite() {
            return Err(JackError::BadTheta(theta));
        }
        Ok(JackParams { theta })
    }
}

/// A real number in signed log representation: `sign * exp(log_abs)`.
/// `sign == 0` encodes an exact zero (`log_abs` is then unused).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogValue {
    pub log_abs: f64,
    pub sign: i8,
}

impl LogValue {
    pub const ZERO: LogValue = LogValue {
        log_abs: f64::NEG_INFINITY,
        sign: 0,
    };
    pub const ONE: LogValue = LogValue {
        log_abs: 0.0,
        sign: 1,
    };

    pub fn from_f64(v: f64) -> LogValue {
        if v == 0.0 {
            LogValue::ZERO
        } else {
            LogValue {
                log_abs: v.abs().ln(),
                sign: if v > 0.0 { 1 } else { -1 },
            }
        }
    }

    /// Positive value given by its logarithm.
    pub fn from_log(log_abs: f64) -> LogValue {
        LogValue { log_abs, sign: 1 }
    }

    pub fn is_zero(&self) -> bool {
        self.sign == 0
    }

    pub fn value(&self) -> f64 {
        match self.sign {
            0 => 0.0,
            s => f64::from(s) * self.log_abs.exp(),
        }
    }

    /// Natural log for positive values; `None` for zero or negative.
    pub fn ln(&self) -> Option<f64> {
        (self.sign > 0).then_some(self.log_abs)
    }

    pub fn mul(self, rhs: LogValue) -> LogValue {
        if self.sign == 0 || rhs.sign == 0 {
            return LogValue::ZERO;
        }
        LogValue {
            log_abs: self.log_abs + rhs.log_abs,
            sign: self.sign * rhs.sign,
        }
    }

    pub fn div(self, rhs: LogValue) -> LogValue {
        assert!(rhs.sign != 0, "division by exact zero LogValue");
        if self.sign == 0 {
            return LogValue::ZERO;
        }
        LogValue {
            log_abs: self.log_abs - rhs.log_abs,
            sign: self.sign * rhs.sign,
        }
    }

    /// Integer power of the absolute scale of `base` applied `k` times.
    pub fn powi(self, k: i32) -> LogValue {
        if self.sign == 0 {
            return if k == 0 { LogValue::ONE } else { LogValue::ZERO };
        }
        let sign = if k % 2 == 0 { self.sign.abs() } else { self.sign };
        LogValue {
            log_abs: self.log_abs * f64::from(k),
            sign,
        }
    }
}

impl std::ops::Mul for LogValue {
    type Output = LogValue;
    fn mul(self, rhs: LogValue) -> LogValue {
        LogValue::mul(self, rhs)
    }
}

impl std::ops::Div for LogValue {
    type Output = LogValue;
    fn div(self, rhs: LogValue) -> LogValue {
        LogValue::div(self, rhs)
    }
}

impl std::ops::MulAssign for LogValue {
    fn mul_assign(&mut self, rhs: LogValue) {
        *self = LogValue::mul(*self, rhs);
    }
}

/// Signed log-gamma: returns `(ln |Gamma(x)|, sign)`; sign 0 at poles.
pub fn signed_lgamma(x: f64) -> (f64, i8) {
    if x <= 0.0 && (x - x.round()).abs() < 1e-12 {
        return (f64::INFINITY, 0);
    }
    let (lg, sign) = libm::lgamma_r(x);
    (lg, sign as i8)
}

fn near_nonpositive_integer(x: f64) -> Option<i64> {
    let r = x.round();
    if r <= 0.0 && (x - r).abs() < 1e-9 {
        Some(r as i64)
    } else {
        None
    }
}

/// The ratio `f(z) = Gamma(z+1) / Gamma(z+theta)` in signed log form.
///
/// When both arguments sit on nonpositive-integer poles the finite limit
/// `(-1)^{a-b} Gamma(b+1)/Gamma(a+1)` (with `z+1 = -a`, `z+theta = -b`) is
/// returned; a lone numerator pole is an error.
pub fn gamma_ratio_f(z: f64, theta: f64) -> Result<LogValue, JackError> {
    let num_pole = near_nonpositive_integer(z + 1.0);
    let den_pole = near_nonpositive_integer(z + theta);
    match (num_pole, den_pole) {
        (None, None) => {
            let (ln_num, s_num) = signed_lgamma(z + 1.0);
            let (ln_den, s_den) = signed_lgamma(z + theta);
            Ok(LogValue {
                log_abs: ln_num - ln_den,
                sign: s_num * s_den,
            })
        }
        (None, Some(_)) => Ok(LogValue::ZERO),
        (Some(a), Some(b)) => {
            let (a, b) = ((-a) as f64, (-b) as f64);
            let (ln_num, _) = signed_lgamma(b + 1.0);
            let (ln_den, _) = signed_lgamma(a + 1.0);
            let sign = if ((a - b) as i64) % 2 == 0 { 1 } else { -1 };
            Ok(LogValue {
                log_abs: ln_num - ln_den,
                sign,
            })
        }
        (Some(_), None) => Err(JackError::SingularGammaRatio { z }),
    }
}

/// Principal specialization `J_lambda(a^N)`: zero unless the diagram has at
/// most `N` rows, otherwise
/// `a^{|lambda|} prod (N theta + coarm - theta coleg) / (arm + theta leg + theta)`.
pub fn log_j_principal(lambda: &Partition, n: usize, a: f64, theta: f64) -> LogValue {
    if lambda.length() > n {
        return LogValue::ZERO;
    }
    if lambda.is_empty() {
        return LogValue::ONE;
    }
    let mut v = LogValue::from_f64(a).powi(lambda.weight() as i32);
    for (i, j) in lambda.boxes() {
        let s = box_stats(lambda, i, j).expect("box from iterator");
        let num = n as f64 * theta + s.coarm as f64 - theta * s.coleg as f64;
        let den = s.arm as f64 + theta * s.leg as f64 + theta;
        v *= LogValue::from_f64(num / den);
    }
    v
}

/// Plancherel specialization `J_lambda(r_s) = (s theta)^{|lambda|} prod 1/(arm + theta leg + theta)`.
pub fn log_j_plancherel(lambda: &Partition, s: f64, theta: f64) -> LogValue {
    if lambda.is_empty() {
        return LogValue::ONE;
    }
    let mut v = LogValue::from_f64(s * theta).powi(lambda.weight() as i32);
    for (i, j) in lambda.boxes() {
        let st = box_stats(lambda, i, j).expect("box from iterator");
        let den = st.arm as f64 + theta * st.leg as f64 + theta;
        v = v.div(LogValue::from_f64(den));
    }
    v
}

/// Conversion factor between `J_lambda` and its dual:
/// `prod (arm + theta leg + theta) / (arm + theta leg + 1)`.
pub fn log_dual_factor(lambda: &Partition, theta: f64) -> LogValue {
    let mut v = LogValue::ONE;
    for (i, j) in lambda.boxes() {
        let s = box_stats(lambda, i, j).expect("box from iterator");
        let c = s.arm as f64 + theta * s.leg as f64;
        v *= LogValue::from_f64((c + theta) / (c + 1.0));
    }
    v
}

/// Pochhammer ratio helper: `prod_{m=0}^{n-1} (num + m) / (den + m)`.
fn pochhammer_ratio(num: f64, den: f64, n: u32) -> LogValue {
    let mut v = LogValue::ONE;
    for m in 0..n {
        v *= LogValue::from_f64((num + m as f64) / (den + m as f64));
    }
    v
}

fn log_skew_j_one_padded(
    lambda: &Partition,
    mu: &Partition,
    a: f64,
    theta: f64,
    k: usize,
) -> LogValue {
    let mut v = LogValue::from_f64(a).powi((lambda.weight() - mu.weight()) as i32);
    for j in 1..k {
        let run = mu.part(j) - lambda.part(j + 1);
        if run == 0 {
            continue;
        }
        for i in 1..=j {
            let mm = mu.part(i) as f64 - mu.part(j) as f64 + theta * (j - i) as f64;
            let lm = lambda.part(i) as f64 - mu.part(j) as f64 + theta * (j - i) as f64;
            v *= pochhammer_ratio(mm + theta, mm + 1.0, run);
            v *= pochhammer_ratio(lm + 1.0, lm + theta, run);
        }
    }
    v
}

/// One-variable skew value `J_{lambda/mu}(a^1)`: zero unless `mu` interlaces
/// `lambda`, otherwise `a^{|lambda|-|mu|}` times a product of Pochhammer
/// ratios over pairs `1 <= i <= j <= k-1`. The value is the same for every
/// padding length `k >= max(len(lambda), len(mu) + 1)`; the smallest is
/// used.
pub fn log_skew_j_one(lambda: &Partition, mu: &Partition, a: f64, theta: f64) -> LogValue {
    if !interlaces(mu, lambda) {
        return LogValue::ZERO;
    }
    let k = lambda.length().max(mu.length() + 1).max(1);
    log_skew_j_one_padded(lambda, mu, a, theta, k)
}

/// Dual one-variable skew value for a single added box: with
/// `lambda = mu + box(i, mu_i + 1)`,
/// `a theta prod_{r<i} [(arm_r + theta(i-r+1)) / (arm_r + theta(i-r))] *
/// [(arm_r + 1 + theta(i-r-1)) / (arm_r + 1 + theta(i-r))]`
/// where `arm_r = mu_r - mu_i - 1` is taken in `mu`.
pub fn log_skew_j_single_box_dual(
    mu: &Partition,
    row: usize,
    theta: f64,
    a: f64,
) -> Result<LogValue, JackError> {
    if !mu.can_add_box(row) {
        return Err(JackError::InvalidBox {
            mu: mu.clone(),
            row,
        });
    }
    let mut v = LogValue::from_f64(a * theta);
    let col = mu.part(row) + 1;
    for r in 1..row {
        let arm = mu.part(r) as f64 - col as f64;
        let d = (row - r) as f64;
        v *= LogValue::from_f64((arm + theta * (d + 1.0)) / (arm + theta * d));
        v *= LogValue::from_f64((arm + 1.0 + theta * (d - 1.0)) / (arm + 1.0 + theta * d));
    }
    Ok(v)
}

/// A Jack-positive specialization supported by this crate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Specialization {
    /// `N` variables all equal to one.
    PrincipalOnes { n: usize },
    /// Plancherel specialization with parameter `s`.
    Plancherel { s: f64 },
}

/// Log of the Cauchy normalization `H_theta(rho_1; rho_2)`; only the
/// principal/Plancherel pair (in either order) is finite and supported,
/// where it equals `theta * s * N`.
pub fn log_h(rho1: Specialization, rho2: Specialization, theta: f64) -> Result<f64, JackError> {
    use Specialization::*;
    match (rho1, rho2) {
        (PrincipalOnes { n }, Plancherel { s }) | (Plancherel { s }, PrincipalOnes { n }) => {
            Ok(theta * s * n as f64)
        }
        _ => Err(JackError::UnsupportedPair),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partitions::{interlacing_predecessors, partitions_of};
    use proptest::prelude::*;

    fn pt(parts: &[u32]) -> Partition {
        Partition::new(parts.to_vec()).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) {
        assert!(
            (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs())),
            "{a} vs {b}"
        );
    }

    #[test]
    fn gamma_ratio_examples() {
        close(gamma_ratio_f(3.7, 1.0).unwrap().value(), 1.0, 1e-14);
        close(gamma_ratio_f(-2.3, 1.0).unwrap().value(), 1.0, 1e-12);
        close(gamma_ratio_f(0.0, 2.0).unwrap().value(), 1.0, 1e-14);
        close(gamma_ratio_f(1.0, 2.0).unwrap().value(), 0.5, 1e-14);
        // double pole: f(-2) with theta = 1 must still be 1
        close(gamma_ratio_f(-2.0, 1.0).unwrap().value(), 1.0, 1e-12);
        // numerator pole alone is singular
        assert!(matches!(
            gamma_ratio_f(-2.0, 1.5),
            Err(JackError::SingularGammaRatio { .. })
        ));
    }

    #[test]
    fn principal_examples() {
        for n in 1..=5usize {
            close(
                log_j_principal(&pt(&[1]), n, 1.0, 1.7).value(),
                n as f64,
                1e-13,
            );
        }
        // equals Schur s_{(2)}(1,1) = 3 at theta = 1
        close(log_j_principal(&pt(&[2]), 2, 1.0, 1.0).value(), 3.0, 1e-13);
        assert!(log_j_principal(&pt(&[1, 1]), 1, 0.7, 1.3).is_zero());
    }

    #[test]
    fn plancherel_examples() {
        let s = 0.8;
        close(log_j_plancherel(&pt(&[1]), s, 2.3).value(), s, 1e-13);
        assert_eq!(log_j_plancherel(&Partition::empty(), s, 2.3), LogValue::ONE);
        close(
            log_j_plancherel(&pt(&[1, 1]), s, 1.9).value(),
            s * s / 2.0,
            1e-13,
        );
        assert!(log_j_plancherel(&pt(&[2]), 0.0, 1.0).is_zero());
    }

    #[test]
    fn dual_factor_examples() {
        close(log_dual_factor(&pt(&[3, 1]), 1.0).value(), 1.0, 1e-14);
        close(log_dual_factor(&pt(&[1]), 2.6).value(), 2.6, 1e-14);
        close(log_dual_factor(&pt(&[2]), 2.0).value(), 3.0, 1e-14);
    }

    #[test]
    fn skew_one_examples() {
        let l = pt(&[3, 1]);
        assert_eq!(log_skew_j_one(&l, &l, 1.0, 1.4), LogValue::ONE);
        assert!(log_skew_j_one(&pt(&[1, 1]), &pt(&[2]), 1.0, 1.4).is_zero());
        // mu = empty gives J_lambda(a^1), nonzero only for one-row lambda
        close(
            log_skew_j_one(&pt(&[2]), &Partition::empty(), 0.5, 1.3).value(),
            log_j_principal(&pt(&[2]), 1, 0.5, 1.3).value(),
            1e-12,
        );
    }

    #[test]
    fn single_box_dual_examples() {
        let v = log_skew_j_single_box_dual(&Partition::empty(), 1, 1.8, 1.0).unwrap();
        close(v.value(), 1.8, 1e-14);
        let v = log_skew_j_single_box_dual(&pt(&[2, 2]), 1, 1.3, 0.7).unwrap();
        close(v.value(), 0.7 * 1.3, 1e-14);
        assert!(log_skew_j_single_box_dual(&pt(&[2, 2]), 3, 1.3, 1.0).is_ok());
        assert!(matches!(
            log_skew_j_single_box_dual(&pt(&[2, 2]), 2, 1.3, 1.0),
            Err(JackError::InvalidBox { .. })
        ));
    }

    /// Single-box skew values: the plain form of the Pochhammer product and
    /// the dual simplification must agree after dual-factor conversion on
    /// random (mu, box, theta) cases.
    #[test]
    fn single_box_cross_evaluation() {
        let mut cases = 0;
        for w in 0..=6u32 {
            for mu in partitions_of(w, 4) {
                for row in 1..=mu.length() + 1 {
                    if !mu.can_add_box(row) {
                        continue;
                    }
                    let lambda = mu.with_box(row).unwrap();
                    for &theta in &[0.5, 1.0, 1.37, 2.0, 3.25] {
                        for &a in &[1.0, 0.6] {
                            let plain = log_skew_j_one(&lambda, &mu, a, theta);
                            // J~_{lambda/mu} = J_{lambda/mu} * dual(lambda)/dual(mu)
                            let dual_from_plain = plain
                                .mul(log_dual_factor(&lambda, theta))
                                .div(log_dual_factor(&mu, theta));
                            let dual =
                                log_skew_j_single_box_dual(&mu, row, theta, a).unwrap();
                            let rel = (dual_from_plain.value() - dual.value()).abs()
                                / dual.value().abs().max(1e-300);
                            assert!(
                                rel < 1e-12,
                                "mu={mu} row={row} theta={theta}: {} vs {}",
                                dual_from_plain.value(),
                                dual.value()
                            );
                            cases += 1;
                        }
                    }
                }
            }
        }
        assert!(cases >= 100, "only {cases} cases exercised");
    }

    /// The Pochhammer product is independent of the padding length k.
    #[test]
    fn skew_one_padding_invariance() {
        let lambda = pt(&[4, 2, 1]);
        for mu in interlacing_predecessors(&lambda) {
            let k = lambda.length().max(mu.length() + 1);
            let v = log_skew_j_one_padded(&lambda, &mu, 1.0, 1.6, k).value();
            let w = log_skew_j_one_padded(&lambda, &mu, 1.0, 1.6, k + 3).value();
            close(v, w, 1e-13);
            close(v, log_skew_j_one(&lambda, &mu, 1.0, 1.6).value(), 1e-13);
        }
    }

    #[test]
    fn log_h_examples() {
        use Specialization::*;
        close(
            log_h(PrincipalOnes { n: 3 }, Plancherel { s: 2.0 }, 1.0).unwrap(),
            6.0,
            1e-15,
        );
        close(
            log_h(Plancherel { s: 0.0 }, PrincipalOnes { n: 5 }, 1.7).unwrap(),
            0.0,
            1e-15,
        );
        close(
            log_h(PrincipalOnes { n: 4 }, Plancherel { s: 1.0 }, 0.5).unwrap(),
            2.0,
            1e-15,
        );
        assert!(log_h(PrincipalOnes { n: 2 }, PrincipalOnes { n: 3 }, 1.0).is_err());
        assert!(log_h(Plancherel { s: 1.0 }, Plancherel { s: 2.0 }, 1.0).is_err());
    }

    /// Truncated Cauchy identity: partial sums of J_lambda(1^N) J~_lambda(r_s)
    /// approach exp(theta s N).
    #[test]
    fn truncated_cauchy_identity() {
        let (n, theta, s, cutoff) = (2usize, 1.5, 0.5, 40u32);
        let mut total = 0.0f64;
        for w in 0..=cutoff {
            for lambda in partitions_of(w, n) {
                let j = log_j_principal(&lambda, n, 1.0, theta);
                let jd = log_j_plancherel(&lambda, s, theta)
                    .mul(log_dual_factor(&lambda, theta));
                total += j.mul(jd).value();
            }
        }
        let target = (theta * s * n as f64).exp();
        assert!(
            (total - target).abs() < 1e-8 * target,
            "{total} vs {target}"
        );
    }

    /// Branching normalization: sum over interlacing mu of
    /// J_mu(1^{k-1}) J_{lambda/mu}(1^1) equals J_lambda(1^k).
    #[test]
    fn branching_normalization() {
        for &theta in &[0.5, 1.0, 2.0] {
            for k in 2..=4usize {
                for w in 0..=8u32 {
                    for lambda in partitions_of(w, k) {
                        let mut total = 0.0;
                        for mu in interlacing_predecessors(&lambda) {
                            if mu.length() > k - 1 {
                                continue;
                            }
                            total += log_j_principal(&mu, k - 1, 1.0, theta)
                                .mul(log_skew_j_one(&lambda, &mu, 1.0, theta))
                                .value();
                        }
                        let target = log_j_principal(&lambda, k, 1.0, theta).value();
                        let rel = (total - target).abs() / target.abs().max(1e-300);
                        assert!(
                            rel < 1e-10,
                            "theta={theta} k={k} lambda={lambda}: {total} vs {target}"
                        );
                    }
                }
            }
        }
    }

    proptest! {
        /// Sign bookkeeping is exact: products involving a zero are zero,
        /// and products of nonzeros carry the product sign.
        #[test]
        fn logvalue_sign_exactness(a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let (la, lb) = (LogValue::from_f64(a), LogValue::from_f64(b));
            let prod = la.mul(lb);
            if a == 0.0 || b == 0.0 {
                prop_assert!(prod.is_zero());
            } else {
                prop_assert_eq!(prod.sign as f64, (a * b).signum());
                prop_assert!((prod.value() - a * b).abs() <= 1e-12 * (a * b).abs());
            }
            prop_assert!(LogValue::ZERO.mul(la).is_zero());
            prop_assert!(la.mul(LogValue::ZERO).is_zero());
        }
    }
}
