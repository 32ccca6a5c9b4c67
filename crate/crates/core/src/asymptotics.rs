//! Closed-form limiting objects: the negative-binomial gap law, the
//! equilibrium density of the rescaled particle positions, its Stieltjes
//! transform and the support edge quantities.

use num_complex::Complex64;
use thiserror::Error;

use crate::jack::signed_lgamma;

#[derive(Debug, Error, PartialEq)]
pub enum AsymptoticsError {
    #[error("point {z} lies on the support [0, {edge}]")]
    OnSupport { z: Complex64, edge: f64 },
}

/// Parameters of the equilibrium measure: time ratio `t > 0` and theta.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumSpec {
    pub t: f64,
    pub theta: f64,
}

impl EquilibriumSpec {
    pub fn new(t: f64, theta: f64) -> Self {
        assert!(t > 0.0 && theta > 0.0);
        EquilibriumSpec { t, theta }
    }
}

/// Negative-binomial gap law: success parameter derived from the time
/// ratio, `p = sqrt(t) / (1 + sqrt(t))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NbParams {
    pub theta: f64,
    pub p: f64,
}

impl NbParams {
    pub fn new(theta: f64, t: f64) -> Self {
        let p = t.sqrt() / (1.0 + t.sqrt());
        assert!((0.0..1.0).contains(&p));
        NbParams { theta, p }
    }
}

/// `P(Q = n) = (1-p)^theta Gamma(n+theta) / (Gamma(n+1) Gamma(theta)) p^n`.
///
/// The prefactor exponent is `+theta`, the unique choice normalizing the
/// series `sum_n p^n Gamma(n+theta)/(n! Gamma(theta)) = (1-p)^{-theta}`.
pub fn nb_pmf(n: u32, params: &NbParams) -> f64 {
    let (theta, p) = (params.theta, params.p);
    if p == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let (a, _) = signed_lgamma(n as f64 + theta);
    let (b, _) = signed_lgamma(n as f64 + 1.0);
    let (c, _) = signed_lgamma(theta);
    (theta * (1.0 - p).ln() + a - b - c + n as f64 * p.ln()).exp()
}

/// Upper edge of the support: `theta (1 + sqrt t)^2`.
pub fn edge_b(spec: &EquilibriumSpec) -> f64 {
    spec.theta * (1.0 + spec.t.sqrt()).powi(2)
}

/// Lower edge of the oscillating band: `theta (sqrt t - 1)^2`.
pub fn edge_lower(spec: &EquilibriumSpec) -> f64 {
    spec.theta * (spec.t.sqrt() - 1.0).powi(2)
}

/// Continuous arccot mapping the real line onto `(0, pi)` (decreasing).
fn arccot(x: f64) -> f64 {
    std::f64::consts::FRAC_PI_2 - x.atan()
}

/// Density of the equilibrium measure at `x`: zero above the upper edge,
/// flat at `1/theta` below the band when `t < 1`, and
/// `(theta pi)^{-1} arccot((x + theta(t-1)) / sqrt(4 theta t x - (x + theta(t-1))^2))`
/// on the band, with the continuous arccot so the density does not jump
/// when the argument changes sign.
pub fn density(x: f64, spec: &EquilibriumSpec) -> f64 {
    let (t, theta) = (spec.t, spec.theta);
    let upper = edge_b(spec);
    let lower = edge_lower(spec);
    if x < 0.0 || x >= upper {
        return 0.0;
    }
    if x <= lower {
        return if t < 1.0 { 1.0 / theta } else { 0.0 };
    }
    let w = x + theta * (t - 1.0);
    let disc = 4.0 * theta * t * x - w * w;
    if disc <= 0.0 {
        // band edges by continuous extension
        return if w < 0.0 { 1.0 / theta } else { 0.0 };
    }
    arccot(w / disc.sqrt()) / (theta * std::f64::consts::PI)
}

/// `exp(theta G(z))` for `z` off the support: the branch of
/// `(z + theta(t-1) - sqrt((z + theta(t-1))^2 - 4 t theta z)) / (2 t theta)`
/// with `sqrt((z-b_-)(z-b_+))` cut along the band, so the value tends to
/// `1 + theta/z` at infinity.
pub fn stieltjes_exp(z: Complex64, spec: &EquilibriumSpec) -> Result<Complex64, AsymptoticsError> {
    let upper = edge_b(spec);
    if z.im.abs() < 1e-12 && z.re >= -1e-12 && z.re <= upper + 1e-12 {
        return Err(AsymptoticsError::OnSupport { z, edge: upper });
    }
    let (t, theta) = (spec.t, spec.theta);
    let b_minus = Complex64::new(edge_lower(spec), 0.0);
    let b_plus = Complex64::new(upper, 0.0);
    let root = ((z - b_minus).sqrt()) * ((z - b_plus).sqrt());
    let w = z + theta * (t - 1.0);
    Ok((w - root) / (2.0 * t * theta))
}

/// Residual of the functional equation satisfied by the Stieltjes
/// transform: `z + theta(t-1) - z/E - t theta E` with `E = exp(theta G(z))`.
pub fn stieltjes_functional_residual(z: Complex64, spec: &EquilibriumSpec) -> f64 {
    let e = stieltjes_exp(z, spec).expect("off support");
    let (t, theta) = (spec.t, spec.theta);
    (z + theta * (t - 1.0) - z / e - t * theta * e).norm()
}

/// Limit of the edge gap sums `sum_j 1/(l_N - l_j)`:
/// `log(1 + 1/sqrt(t)) / theta`, which is also the boundary value of the
/// Stieltjes transform at the upper edge.
pub fn edge_gap_sum_limit(spec: &EquilibriumSpec) -> f64 {
    (1.0 + 1.0 / spec.t.sqrt()).ln() / spec.theta
}

/// Adaptive Simpson quadrature with interval-doubling error control.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        ((b - a) / 6.0 * (fa + 4.0 * fm + fb), m, fm)
    }
    fn rec(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        whole: f64,
        m: f64,
        fm: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (left, lm, flm) = simpson(f, a, fa, m, fm);
        let (right, rm, frm) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            rec(f, a, fa, m, fm, left, lm, flm, tol / 2.0, depth - 1)
                + rec(f, m, fm, b, fb, right, rm, frm, tol / 2.0, depth - 1)
        }
    }
    let (fa, fb) = (f(a), f(b));
    let (whole, m, fm) = simpson(f, a, fa, b, fb);
    rec(f, a, fa, b, fb, whole, m, fm, tol, 48)
}

/// `integral of x^k d mu` over the support by adaptive quadrature, split at
/// the band edges where the integrand kinks.
pub fn density_moment(spec: &EquilibriumSpec, k: u32, tol: f64) -> f64 {
    let f = move |x: f64| x.powi(k as i32) * density(x, spec);
    let lower = edge_lower(spec);
    let upper = edge_b(spec);
    let mut total = 0.0;
    if spec.t < 1.0 && lower > 0.0 {
        total += integrate(&f, 0.0, lower, tol / 2.0);
        total += integrate(&f, lower, upper, tol / 2.0);
    } else {
        total += integrate(&f, lower, upper, tol);
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol * (1.0 + a.abs().max(b.abs())), "{a} vs {b}");
    }

    #[test]
    fn nb_examples() {
        // theta = 1: geometric
        let p1 = NbParams::new(1.0, 1.0);
        for n in 0..10u32 {
            close(nb_pmf(n, &p1), (1.0 - p1.p) * p1.p.powi(n as i32), 1e-13);
        }
        // normalization over the grid
        for &theta in &[1.0, 1.5, 2.0] {
            for &t in &[0.5, 1.0, 2.0] {
                let params = NbParams::new(theta, t);
                let total: f64 = (0..=200).map(|n| nb_pmf(n, &params)).sum();
                assert!((total - 1.0).abs() < 1e-12, "theta={theta} t={t}: {total}");
                let mean: f64 = (0..=400).map(|n| n as f64 * nb_pmf(n, &params)).sum();
                close(mean, theta * t.sqrt(), 1e-9);
            }
        }
    }

    #[test]
    fn edge_examples() {
        close(edge_b(&EquilibriumSpec::new(1.0, 1.0)), 4.0, 1e-15);
        // t -> 0 limit: the staircase edge theta
        close(edge_b(&EquilibriumSpec::new(1e-18, 2.0)), 2.0, 1e-8);
        for &t in &[0.3, 1.0, 2.5] {
            let spec = EquilibriumSpec::new(t, 1.3);
            assert!(edge_b(&spec) > edge_lower(&spec));
        }
    }

    #[test]
    fn density_examples() {
        let spec = EquilibriumSpec::new(1.0, 1.0);
        close(density(2.0, &spec), 0.25, 1e-13); // arccot(1)/pi
        let spec = EquilibriumSpec::new(0.25, 2.0);
        close(density(0.1, &spec), 0.5, 1e-13); // flat part 1/theta
        assert_eq!(density(edge_b(&spec) + 0.1, &spec), 0.0);
        assert_eq!(density(-0.5, &spec), 0.0);
    }

    #[test]
    fn density_is_bounded_and_normalized() {
        for &t in &[0.25, 0.5, 1.0, 2.0, 4.0] {
            for &theta in &[0.5, 1.0, 1.5, 2.0] {
                let spec = EquilibriumSpec::new(t, theta);
                let mass = density_moment(&spec, 0, 1e-9);
                assert!((mass - 1.0).abs() < 1e-6, "t={t} theta={theta}: {mass}");
                let mean = density_moment(&spec, 1, 1e-9);
                close(mean, theta * (t + 0.5), 1e-6);
                let upper = edge_b(&spec);
                for i in 0..=500 {
                    let x = upper * i as f64 / 500.0;
                    assert!(density(x, &spec) <= 1.0 / theta + 1e-12);
                }
            }
        }
    }

    #[test]
    fn stieltjes_large_z() {
        for &t in &[0.5, 1.0, 3.0] {
            for &theta in &[0.7, 1.0, 2.0] {
                let spec = EquilibriumSpec::new(t, theta);
                let z = Complex64::new(1e6, 0.0);
                let e = stieltjes_exp(z, &spec).unwrap();
                let expect = Complex64::new(1.0 + theta / 1e6, 0.0);
                assert!((e - expect).norm() < 1e-5 * expect.norm());
            }
        }
    }

    #[test]
    fn stieltjes_functional_equation() {
        let spec = EquilibriumSpec::new(1.0, 1.5);
        let pts = [
            Complex64::new(7.0, 0.0),
            Complex64::new(-3.0, 0.0),
            Complex64::new(2.0, 1.5),
            Complex64::new(1.0, -2.0),
            Complex64::new(20.0, 0.3),
        ];
        for &z in &pts {
            assert!(stieltjes_functional_residual(z, &spec) < 1e-10, "{z}");
        }
        assert!(stieltjes_exp(Complex64::new(2.0, 0.0), &spec).is_err());
    }

    #[test]
    fn stieltjes_edge_limit() {
        for &t in &[0.5, 1.0, 2.0] {
            let theta = 1.3;
            let spec = EquilibriumSpec::new(t, theta);
            let b = edge_b(&spec);
            let e = stieltjes_exp(Complex64::new(b + 1e-9, 0.0), &spec).unwrap();
            let g = e.re.ln() / theta;
            close(g, edge_gap_sum_limit(&spec), 1e-4);
            // exact value at the edge itself: E(b) = (1 + sqrt t)/sqrt t
            let at_edge = (b + theta * (t - 1.0)) / (2.0 * t * theta);
            close(at_edge.ln() / theta, edge_gap_sum_limit(&spec), 1e-12);
        }
    }

    #[test]
    fn gap_sum_examples() {
        close(
            edge_gap_sum_limit(&EquilibriumSpec::new(1.0, 1.0)),
            2.0f64.ln(),
            1e-15,
        );
        assert!(edge_gap_sum_limit(&EquilibriumSpec::new(1e8, 1.0)) < 1e-3);
    }

    /// Quadrature of the density against 1/(z-x) reproduces log(E)/theta.
    #[test]
    fn stieltjes_consistency_with_density() {
        let spec = EquilibriumSpec::new(1.5, 1.2);
        let upper = edge_b(&spec);
        for i in 0..20 {
            let z = upper + 0.5 + i as f64 * 0.7;
            let g_quad = integrate(
                &|x| density(x, &spec) / (z - x),
                edge_lower(&spec),
                upper,
                1e-10,
            );
            let e = stieltjes_exp(Complex64::new(z, 0.0), &spec).unwrap();
            let g_closed = e.re.ln() / spec.theta;
            assert!((g_quad - g_closed).abs() < 1e-6, "z={z}: {g_quad} vs {g_closed}");
        }
    }
}
