//! Planar Grötzsch and Teichmüller ring moduli via complete elliptic
//! integrals, the constant A₂, and the dimension-n bounds for λₙ, Aₙ, Qₙ.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const AGM_TOL: f64 = 1e-15;
const AGM_MAX_ITER: usize = 60;

/// Arithmetic-geometric mean of `a, b ≥ 0`.
pub fn agm(mut a: f64, mut b: f64) -> f64 {
    if a == 0.0 || b == 0.0 {
        return 0.0;
    }
    for _ in 0..AGM_MAX_ITER {
        if (a - b).abs() < AGM_TOL * a {
            break;
        }
        let next = 0.5 * (a + b);
        b = (a * b).sqrt();
        a = next;
    }
    0.5 * (a + b)
}

/// Complete elliptic integral of the first kind `K(k)`, modulus convention,
/// `0 ≤ k < 1`.
pub fn elliptic_k(k: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&k) {
        return Err(Error::OutOfRange(format!("elliptic_k needs 0 <= k < 1, got {k}")));
    }
    let kp = ((1.0 - k) * (1.0 + k)).sqrt();
    Ok(PI / (2.0 * agm(1.0, kp)))
}

/// `μ(r) = (π/2)·K(r′)/K(r)` from `r` and its complement `r′ = √(1−r²)`,
/// both supplied so callers can keep full precision near either end.
fn mu_pair(r: f64, r_comp: f64) -> f64 {
    if r_comp == 0.0 {
        return 0.0;
    }
    0.5 * PI * agm(1.0, r_comp) / agm(1.0, r)
}

/// Modulus of the planar Grötzsch ring `𝔹² ∖ [0, r]`, `0 < r ≤ 1`.
pub fn grotzsch_mu(r: f64) -> Result<f64> {
    if !(r > 0.0 && r <= 1.0) {
        return Err(Error::OutOfRange(format!("grotzsch_mu needs 0 < r <= 1, got {r}")));
    }
    Ok(mu_pair(r, ((1.0 - r) * (1.0 + r)).sqrt()))
}

/// `mo R_{G,2}(s) = μ(1/s)`, `s > 1`.
pub fn mo_grotzsch2(s: f64) -> Result<f64> {
    if !(s > 1.0 && s.is_finite()) {
        return Err(Error::OutOfRange(format!("mo_grotzsch2 needs s > 1, got {s}")));
    }
    let r = 1.0 / s;
    let r_comp = ((s - 1.0) * (s + 1.0)).sqrt() / s;
    Ok(mu_pair(r, r_comp))
}

/// `mo R_{T,2}(t) = 2·μ(1/√(t+1))`, `t > 0`.
pub fn mo_teichmuller2(t: f64) -> Result<f64> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::OutOfRange(format!("mo_teichmuller2 needs t > 0, got {t}")));
    }
    let r = 1.0 / (t + 1.0).sqrt();
    let r_comp = (t / (t + 1.0)).sqrt();
    Ok(2.0 * mu_pair(r, r_comp))
}

/// `Φ₂(s) = exp(mo R_{G,2}(s))`.
pub fn phi2(s: f64) -> Result<f64> {
    mo_grotzsch2(s).map(f64::exp)
}

/// `Ψ₂(t) = exp(mo R_{T,2}(t))`.
pub fn psi2(t: f64) -> Result<f64> {
    mo_teichmuller2(t).map(f64::exp)
}

/// `g(t) = mo R_{T,2}(t) − log t`, the quantity maximised by A₂.
pub fn a2_objective(t: f64) -> Result<f64> {
    Ok(mo_teichmuller2(t)? - t.ln())
}

/// `g` in the variable `s` with `t = 1 + eˢ`.
fn a2_objective_log(s: f64) -> f64 {
    let es = s.exp();
    let t = 1.0 + es;
    // t ≥ 1 always, so mo_teichmuller2 cannot fail
    mo_teichmuller2(t).unwrap_or(f64::NAN) - es.ln_1p()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct A2Result {
    pub value: f64,
    pub argmax_t: f64,
    /// The sup over the open interval is the limit at an end of the search range.
    pub attained_at_boundary: bool,
}

const A2_S_MIN: f64 = -40.0;
const A2_S_MAX: f64 = 40.0;
const A2_GRID: usize = 801;

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() < 1e-12 * (1.0 + a.abs().max(b.abs())) {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// `A₂ = sup_{1<t<∞} [mo R_{T,2}(t) − log t]`, searched over `t = 1 + eˢ`,
/// `s ∈ [−40, 40]`, on a coarse grid refined by golden-section search.
pub fn compute_a2() -> A2Result {
    let step = (A2_S_MAX - A2_S_MIN) / (A2_GRID - 1) as f64;
    let grid: Vec<f64> = (0..A2_GRID).map(|i| A2_S_MIN + step * i as f64).collect();
    let values: Vec<f64> = grid.iter().map(|&s| a2_objective_log(s)).collect();
    let (best, top) =
        values
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
    // ties with the left end are rounding noise on the flat part of g near t = 1
    if best == 0 || top - values[0] <= 1e-12 * top.abs() {
        // g decreases away from t = 1; the sup is the one-sided limit g(1⁺) = mo R_{T,2}(1)
        let value = mo_teichmuller2(1.0).unwrap_or(f64::NAN);
        return A2Result { value, argmax_t: 1.0, attained_at_boundary: true };
    }
    if best == A2_GRID - 1 {
        let s = grid[best];
        return A2Result { value: a2_objective_log(s), argmax_t: 1.0 + s.exp(), attained_at_boundary: true };
    }
    let (s, v) = golden_max(a2_objective_log, grid[best - 1], grid[best + 1]);
    A2Result { value: v, argmax_t: 1.0 + s.exp(), attained_at_boundary: false }
}

/// Constants governing the separation and boundary estimates in dimension n.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpecialConstants {
    pub n: usize,
    pub lambda_lower: f64,
    pub lambda_upper: f64,
    /// Exact A₂ for n = 2; an upper bound for Aₙ otherwise.
    pub a_value_or_upper: f64,
    pub a_is_exact: bool,
    /// `Qₙ = 4·exp(A/2)` computed from `a_value_or_upper`.
    pub q_value: f64,
}

/// Upper bound `2^{n/(n−1)} e^{n(n−2)/(n−1)}` for the Grötzsch constant λₙ.
pub fn lambda_upper(n: usize) -> f64 {
    let nf = n as f64;
    2f64.powf(nf / (nf - 1.0)) * (nf * (nf - 2.0) / (nf - 1.0)).exp()
}

/// Upper bound `log((3+2√2)λ²/4)` for Aₙ given an upper bound λ for λₙ.
pub fn a_upper_from_lambda(lambda: f64) -> f64 {
    ((3.0 + 2.0 * SQRT_2) * lambda * lambda / 4.0).ln()
}

pub fn constants_for(n: usize) -> Result<SpecialConstants> {
    if n < 2 {
        return Err(Error::OutOfRange(format!("dimension must be >= 2, got {n}")));
    }
    let (lambda_upper, a, exact) = if n == 2 {
        (4.0, PI, true)
    } else {
        let l = lambda_upper(n);
        (l, a_upper_from_lambda(l), false)
    };
    Ok(SpecialConstants {
        n,
        lambda_lower: 4.0,
        lambda_upper,
        a_value_or_upper: a,
        a_is_exact: exact,
        q_value: 4.0 * (a / 2.0).exp(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    // Independent oracle: composite Gauss–Legendre on the defining integral
    // ∫₀^{π/2} dθ/√(1−k² sin²θ).
    fn k_by_quadrature(k: f64) -> f64 {
        let rule = gauss_quad::GaussLegendre::new(40).unwrap();
        let pieces = 64;
        let h = 0.5 * PI / pieces as f64;
        (0..pieces)
            .map(|i| {
                let a = i as f64 * h;
                rule.integrate(a, a + h, |t| 1.0 / (1.0 - k * k * t.sin().powi(2)).sqrt())
            })
            .sum()
    }

    #[test]
    fn elliptic_k_values() {
        assert!((elliptic_k(0.0).unwrap() - PI / 2.0).abs() < 1e-15);
        let k = 1.0 / SQRT_2;
        // oracle-frozen values
        assert!((k_by_quadrature(k) - 1.854074677).abs() < 1e-9);
        assert!((k_by_quadrature(0.5) - 1.685750355).abs() < 1e-9);
        assert!((elliptic_k(k).unwrap() - 1.854074677).abs() < 1e-9);
        assert!((elliptic_k(0.5).unwrap() - 1.685750355).abs() < 1e-9);
        for &k in &[0.1, 0.3, 0.6, 0.9, 0.99] {
            assert!((elliptic_k(k).unwrap() - k_by_quadrature(k)).abs() < 1e-12, "k={k}");
        }
        assert!(elliptic_k(1.0).is_err());
        assert!(elliptic_k(-0.1).is_err());
    }

    #[test]
    fn mu_values() {
        assert!((grotzsch_mu(1.0 / SQRT_2).unwrap() - PI / 2.0).abs() < 1e-14);
        assert_eq!(grotzsch_mu(1.0).unwrap(), 0.0);
        assert!((grotzsch_mu(1e-3).unwrap() - 4000f64.ln()).abs() < 1e-6);
        assert!(grotzsch_mu(0.0).is_err());
        assert!(grotzsch_mu(1.5).is_err());
    }

    #[test]
    fn mu_complementary_identity() {
        for i in 1..10 {
            let r = i as f64 / 10.0;
            let rp = ((1.0 - r) * (1.0 + r)).sqrt();
            let prod = grotzsch_mu(r).unwrap() * grotzsch_mu(rp).unwrap();
            assert!((prod - PI * PI / 4.0).abs() < 1e-9, "r={r}");
        }
    }

    #[test]
    fn teichmuller_values() {
        assert!((mo_teichmuller2(1.0).unwrap() - PI).abs() < 1e-14);
        for &t in &[0.5, 2.0, 10.0] {
            let lhs = mo_teichmuller2(t).unwrap();
            let rhs = 2.0 * mo_grotzsch2((t + 1.0).sqrt()).unwrap();
            assert!((lhs - rhs).abs() < 1e-12);
        }
        let s = 1e8;
        assert!((mo_grotzsch2(s).unwrap() - s.ln() - 4f64.ln()).abs() < 1e-6);
        assert!(mo_teichmuller2(0.0).is_err());
        assert!(mo_grotzsch2(1.0).is_err());
    }

    #[test]
    fn moduli_strictly_increasing() {
        let grid: Vec<f64> = (0..60).map(|i| 1.0 + 1e-3 * 1.4f64.powi(i)).collect();
        for w in grid.windows(2) {
            assert!(mo_grotzsch2(w[1]).unwrap() > mo_grotzsch2(w[0]).unwrap());
            assert!(mo_teichmuller2(w[1]).unwrap() > mo_teichmuller2(w[0]).unwrap());
        }
    }

    #[test]
    fn grotzsch_constant_limit() {
        let mut prev = 0.0;
        for &s in &[1e4, 1e5, 1e6, 1e7, 1e8] {
            let q = phi2(s).unwrap() / s;
            assert!((4.0 - 1e-5..=4.0 + 1e-12).contains(&q), "s={s} q={q}");
            assert!(q >= prev - 1e-13);
            prev = q;
        }
    }

    #[test]
    fn a2_is_pi() {
        let r = compute_a2();
        assert!((r.value - PI).abs() < 1e-6);
        assert!(r.attained_at_boundary);
        assert_eq!(r.argmax_t, 1.0);
    }

    #[test]
    fn a2_objective_profile() {
        let g = a2_objective(1e6).unwrap();
        assert!((g - 16f64.ln()).abs() < 1e-5 && g < PI);
        let ts = [1.01, 1.1, 2.0, 10.0, 100.0];
        for w in ts.windows(2) {
            assert!(a2_objective(w[0]).unwrap() > a2_objective(w[1]).unwrap());
        }
    }

    #[test]
    fn constants() {
        let c2 = constants_for(2).unwrap();
        assert_eq!(c2.lambda_lower, 4.0);
        assert_eq!(c2.lambda_upper, 4.0);
        assert_eq!(c2.a_value_or_upper, PI);
        assert!((c2.q_value - 19.2420).abs() < 1e-4);
        assert!((a_upper_from_lambda(4.0) - 3.14904).abs() < 1e-5);
        assert!(a_upper_from_lambda(4.0) >= PI);
        let c3 = constants_for(3).unwrap();
        assert!((c3.lambda_upper - 12.67613).abs() < 1e-4);
        assert!(!c3.a_is_exact);
        assert_eq!(c3.q_value, 4.0 * (c3.a_value_or_upper / 2.0).exp());
        assert!(constants_for(1).is_err());
        for n in 2..10 {
            let c = constants_for(n).unwrap();
            assert!(c.lambda_lower <= c.lambda_upper && c.a_value_or_upper > 0.0);
        }
    }
}
