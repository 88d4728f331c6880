//! Modulus bounds from directional dilatations, dominating factors and the
//! boundary-regularity constants built on them.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dilatation::{angular_dilatation, directional_pair};
use crate::error::{Error, Result};
use crate::geometry::{sphere_area, unit_ball_volume, MapSpec, Shape, Vector};
use crate::quadrature::{
    gauss_kronrod, integrate_ball, integrate_log_polar, sphere_mean, QuadResult, QuadratureSpec, Region,
};
use crate::special::constants_for;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Holds,
    Violated,
    Inconclusive,
}

impl Verdict {
    /// Combines two verdicts: any violation wins, then any inconclusive part.
    pub fn and(self, other: Verdict) -> Verdict {
        use Verdict::*;
        match (self, other) {
            (Violated, _) | (_, Violated) => Violated,
            (Inconclusive, _) | (_, Inconclusive) => Inconclusive,
            _ => Holds,
        }
    }
}

/// Two sides of an inequality, an optional quantity between them, and the
/// error budget used to decide the verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub id: String,
    pub left: f64,
    pub right: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub middle: Option<f64>,
    pub error: f64,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub parts: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl BoundReport {
    fn new(id: &str, left: f64, right: f64, error: f64) -> Self {
        Self {
            id: id.to_string(),
            left,
            right,
            middle: None,
            error,
            verdict: Verdict::Inconclusive,
            parts: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    fn part(mut self, key: &str, v: f64) -> Self {
        self.parts.insert(key.to_string(), v);
        self
    }
}

/// A measured quantity with its absolute error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measured {
    pub value: f64,
    pub error: f64,
}

impl Measured {
    pub fn new(value: f64, error: f64) -> Self {
        Self { value, error }
    }

    pub fn exact(value: f64) -> Self {
        Self { value, error: 0.0 }
    }
}

/// Error budget plus a rounding allowance relative to the magnitudes involved.
fn budget(error: f64, scale: f64) -> f64 {
    error + 1e-12 * (1.0 + scale.abs())
}

/// `a ≤ b` unless the gap exceeds the budget.
pub fn le_within(a: f64, b: f64, error: f64) -> Verdict {
    if a <= b + budget(error, a.abs().max(b.abs())) {
        Verdict::Holds
    } else {
        Verdict::Violated
    }
}

/// Scalar field sampled by the bound integrals.
#[derive(Debug, Clone, PartialEq)]
pub enum AngularField {
    /// `D_f(x, x₀)` of a map.
    Map(MapSpec),
    /// `1 + log|x − x₀|`.
    LogRadius,
}

impl AngularField {
    pub fn value(&self, x: &Vector, x0: &Vector) -> Result<f64> {
        match self {
            AngularField::Map(m) => angular_dilatation(m, x, x0),
            AngularField::LogRadius => Ok(1.0 + (x - x0).norm().ln()),
        }
    }
}

fn region_of(shape: &Shape) -> Result<Region> {
    Region::from_shape(shape)
}

fn check_dim(map: &MapSpec, n: usize) -> Result<()> {
    match map.fixed_dim() {
        Some(d) if d != n => Err(Error::InvalidMap(format!("map acts on R^{d}, domain lives in R^{n}"))),
        _ => Ok(()),
    }
}

/// `∫ g dν` with `dν = |x − x₀|^{−n} dm` over the shape.
pub fn quad_weighted<G>(g: G, shape: &Shape, spec: &QuadratureSpec) -> Result<QuadResult>
where
    G: Fn(&Vector) -> Result<f64> + Sync,
{
    integrate_log_polar(g, &region_of(shape)?, spec)
}

fn integral_d(map: &MapSpec, region: &Region, spec: &QuadratureSpec, shift: f64) -> Result<QuadResult> {
    let x0 = region.x0.clone();
    integrate_log_polar(|x| Ok(angular_dilatation(map, x, &x0)? - shift), region, spec)
}

fn integral_t(map: &MapSpec, region: &Region, spec: &QuadratureSpec, shift: f64) -> Result<QuadResult> {
    let x0 = region.x0.clone();
    integrate_log_polar(|x| Ok(directional_pair(map, x, &x0)?.1 - shift), region, spec)
}

/// `∫(D − 1)dν` and `∫(T − 1)dν` over a semiring or annulus, shared by the
/// two sandwich bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct DilatationIntegrals {
    pub region: Region,
    pub excess_d: QuadResult,
    pub excess_t: QuadResult,
}

impl DilatationIntegrals {
    pub fn compute(map: &MapSpec, shape: &Shape, spec: &QuadratureSpec) -> Result<Self> {
        let region = region_of(shape)?;
        check_dim(map, region.dim())?;
        let excess_d = integral_d(map, &region, spec, 1.0)?;
        let excess_t = integral_t(map, &region, spec, 1.0)?;
        Ok(Self { region, excess_d, excess_t })
    }

    /// Bounds `(ν-avg D)^{1/(1−n)} ≤ mo f(S)/mo S ≤ ν-avg T`. With `ratio`,
    /// the verdict checks the measured ratio against both sides.
    pub fn eq1est(&self, ratio: Option<Measured>) -> BoundReport {
        let n = self.region.dim();
        let nu = self.region.nu();
        let avg_d = 1.0 + self.excess_d.value / nu;
        let avg_t = 1.0 + self.excess_t.value / nu;
        let e = 1.0 / (1.0 - n as f64);
        let lower = avg_d.powf(e);
        let err_lower = e.abs() * avg_d.powf(e - 1.0) * self.excess_d.error / nu;
        let err_upper = self.excess_t.error / nu;
        let mut rep = BoundReport::new("eq1est", lower, avg_t, err_lower + err_upper)
            .part("avg_D", avg_d)
            .part("avg_T", avg_t)
            .part("nu", nu);
        rep.verdict = match ratio {
            Some(r) => {
                rep.middle = Some(r.value);
                rep.error += r.error;
                le_within(lower, r.value, err_lower + r.error).and(le_within(r.value, avg_t, err_upper + r.error))
            }
            None => le_within(lower, avg_t, err_lower + err_upper),
        };
        rep
    }

    /// Bounds `−c∫(T−1)dν ≤ mo S − mo f(S) ≤ c∫(D−1)dν` with `c = 2/ω_{n−1}`
    /// (`1/ω_{n−1}` for rings). The upper side is only asserted when the
    /// measured difference is nonnegative.
    pub fn eq2est(&self, difference: Option<Measured>) -> BoundReport {
        let c = 1.0 / self.region.sphere_area();
        let lower = -c * self.excess_t.value;
        let upper = c * self.excess_d.value;
        let (el, eu) = (c * self.excess_t.error, c * self.excess_d.error);
        let mut rep = BoundReport::new("eq2est", lower, upper, el + eu);
        rep.verdict = match difference {
            None => {
                rep.notes.push("no measured modulus difference supplied".into());
                Verdict::Inconclusive
            }
            Some(diff) => {
                rep.middle = Some(diff.value);
                rep.error += diff.error;
                let low = le_within(lower, diff.value, el + diff.error);
                if diff.value >= 0.0 {
                    low.and(le_within(diff.value, upper, eu + diff.error))
                } else {
                    rep.notes.push("mo S < mo f(S): upper inequality not asserted".into());
                    low.and(Verdict::Inconclusive)
                }
            }
        };
        rep
    }
}

pub fn eq1est_bounds(
    map: &MapSpec,
    shape: &Shape,
    spec: &QuadratureSpec,
    ratio: Option<Measured>,
) -> Result<BoundReport> {
    Ok(DilatationIntegrals::compute(map, shape, spec)?.eq1est(ratio))
}

pub fn eq2est_bounds(
    map: &MapSpec,
    shape: &Shape,
    spec: &QuadratureSpec,
    difference: Option<Measured>,
) -> Result<BoundReport> {
    Ok(DilatationIntegrals::compute(map, shape, spec)?.eq2est(difference))
}

fn retry_on_irregular<T>(spec: &QuadratureSpec, f: impl Fn(&QuadratureSpec) -> Result<T>) -> Result<T> {
    match f(spec) {
        Err(Error::IrregularPoint(_)) | Err(Error::Domain { .. }) => {
            let jittered = QuadratureSpec { angular: spec.angular + 1, seed: spec.seed ^ 0x9e37_79b9, ..*spec };
            f(&jittered)
        }
        other => other,
    }
}

/// `Ψ_D(t, x₀)`: mean of `D_f(x₀ + tz, x₀)` over the unit (hemi)sphere.
pub fn psi_d(map: &MapSpec, x0: &Vector, t: f64, hemisphere: bool, spec: &QuadratureSpec) -> Result<QuadResult> {
    if !(t > 0.0) {
        return Err(Error::Precondition(format!("radius must be positive, got {t}")));
    }
    check_dim(map, x0.len())?;
    retry_on_irregular(spec, |s| sphere_mean(|x| angular_dilatation(map, x, x0), x0, t, hemisphere, s))
}

/// `∫_r^R dt / (t·Ψ_D(t, x₀)^{1/(n−1)})`, a lower bound for `mo f(S(x₀; r, R))`.
pub fn modintbound(
    map: &MapSpec,
    x0: &Vector,
    r: f64,
    big_r: f64,
    hemisphere: bool,
    spec: &QuadratureSpec,
) -> Result<QuadResult> {
    if !(r > 0.0 && big_r > r) {
        return Err(Error::Precondition(format!("need 0 < r < R, got r = {r}, R = {big_r}")));
    }
    let e = 1.0 / (x0.len() as f64 - 1.0);
    let mut psi_err = 0.0f64;
    let res = gauss_kronrod(
        |s| {
            let p = psi_d(map, x0, s.exp(), hemisphere, spec)?;
            psi_err = psi_err.max(e * p.value.powf(-e - 1.0) * p.error);
            Ok(p.value.powf(-e))
        },
        r.ln(),
        big_r.ln(),
        1e-12,
        spec.tol,
        200,
    )?;
    let span = (big_r / r).ln();
    Ok(QuadResult { value: res.value, error: res.error + psi_err * span, evaluations: res.evaluations })
}

/// `modintbound ≤ mo f(S)` with the image modulus measured independently.
pub fn modintbound_report(
    map: &MapSpec,
    shape: &Shape,
    spec: &QuadratureSpec,
    image_mo: Option<Measured>,
) -> Result<BoundReport> {
    let region = region_of(shape)?;
    let b = modintbound(map, &region.x0, region.r, region.big_r, region.hemisphere, spec)?;
    let mut rep = BoundReport::new("modintbound", b.value, f64::NAN, b.error);
    match image_mo {
        Some(m) => {
            rep.right = m.value;
            rep.error += m.error;
            rep.verdict = le_within(b.value, m.value, b.error + m.error);
        }
        None => rep.notes.push("no image modulus supplied".into()),
    }
    Ok(rep)
}

/// Increasing function `H` with `e^H` convex, constant on `[0, t₀]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum DominatingFactor {
    /// `γ·max(t, t₀)`
    Linear { gamma: f64, t0: f64 },
    /// `c·max(t, t₀)^α`
    Power { c: f64, alpha: f64, t0: f64 },
    /// Piecewise-linear interpolation of `(t, h)` samples, extended linearly.
    Tabulated { t: Vec<f64>, h: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DivergenceType {
    Divergent,
    Convergent,
    Inconclusive,
}

impl DominatingFactor {
    pub fn linear(gamma: f64) -> Result<Self> {
        let h = DominatingFactor::Linear { gamma, t0: 0.0 };
        h.validate()?;
        Ok(h)
    }

    pub fn power(c: f64, alpha: f64, t0: f64) -> Result<Self> {
        let h = DominatingFactor::Power { c, alpha, t0 };
        h.validate()?;
        Ok(h)
    }

    pub fn tabulated(t: Vec<f64>, h: Vec<f64>) -> Result<Self> {
        let f = DominatingFactor::Tabulated { t, h };
        f.validate()?;
        Ok(f)
    }

    /// Smallest flat-part length that keeps `exp(c·t^α)` convex.
    pub fn power_threshold(c: f64, alpha: f64) -> f64 {
        if alpha >= 1.0 {
            0.0
        } else {
            ((1.0 - alpha) / (c * alpha)).powf(1.0 / alpha)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Precondition(m));
        match self {
            DominatingFactor::Linear { gamma, t0 } => {
                if !(*gamma > 0.0 && *t0 >= 0.0 && gamma.is_finite() && t0.is_finite()) {
                    return bad(format!("linear factor needs gamma > 0 and t0 >= 0, got {gamma}, {t0}"));
                }
            }
            DominatingFactor::Power { c, alpha, t0 } => {
                if !(*c > 0.0 && *alpha > 0.0 && *t0 >= 0.0) {
                    return bad(format!("power factor needs c, alpha > 0 and t0 >= 0, got {c}, {alpha}, {t0}"));
                }
                let need = Self::power_threshold(*c, *alpha);
                if *t0 < need * (1.0 - 1e-12) {
                    return bad(format!("exp(H) is not convex unless t0 >= {need}"));
                }
            }
            DominatingFactor::Tabulated { t, h } => {
                if t.len() < 2 || t.len() != h.len() {
                    return bad("tabulated factor needs at least two (t, h) pairs of equal length".into());
                }
                if t[0] < 0.0 || t.windows(2).any(|w| !(w[1] > w[0])) {
                    return bad("tabulated t must be nonnegative and strictly increasing".into());
                }
                if h.windows(2).any(|w| w[1] < w[0]) {
                    return bad("tabulated h must be nondecreasing".into());
                }
                let flat = h.windows(2).take_while(|w| w[1] == w[0]).count();
                if h[flat..].windows(2).any(|w| w[1] <= w[0]) {
                    return bad("tabulated h must be strictly increasing after its flat part".into());
                }
                let slopes: Vec<f64> = t
                    .windows(2)
                    .zip(h.windows(2))
                    .map(|(tw, hw)| (hw[1].exp() - hw[0].exp()) / (tw[1] - tw[0]))
                    .collect();
                if slopes.windows(2).any(|s| s[1] < s[0] * (1.0 - 1e-12)) {
                    return bad("exp(H) is not convex on the sample grid".into());
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            DominatingFactor::Linear { gamma, t0 } => gamma * t.max(*t0),
            DominatingFactor::Power { c, alpha, t0 } => c * t.max(*t0).powf(*alpha),
            DominatingFactor::Tabulated { t: ts, h } => {
                if t <= ts[0] {
                    return h[0];
                }
                let k = ts.partition_point(|&x| x < t).min(ts.len() - 1).max(1);
                let s = (h[k] - h[k - 1]) / (ts[k] - ts[k - 1]);
                h[k - 1] + s * (t - ts[k - 1])
            }
        }
    }

    /// `inf{t ≥ t₀ : H(t) ≥ τ}`.
    pub fn inverse(&self, tau: f64) -> f64 {
        match self {
            DominatingFactor::Linear { gamma, t0 } => (tau / gamma).max(*t0),
            DominatingFactor::Power { c, alpha, t0 } => {
                if tau <= 0.0 {
                    *t0
                } else {
                    (tau / c).powf(1.0 / alpha).max(*t0)
                }
            }
            DominatingFactor::Tabulated { t, h } => {
                let flat = h.windows(2).take_while(|w| w[1] == w[0]).count();
                if tau <= h[flat] {
                    return t[flat];
                }
                let k = (flat + h[flat..].partition_point(|&x| x < tau)).min(h.len() - 1).max(flat + 1);
                let s = (t[k] - t[k - 1]) / (h[k] - h[k - 1]);
                t[k - 1] + s * (tau - h[k - 1])
            }
        }
    }

    /// Whether `∫₁^∞ H(t) t^{−n/(n−1)} dt` diverges.
    pub fn divergence_type(&self, n: usize) -> DivergenceType {
        let critical = 1.0 / (n as f64 - 1.0);
        match self {
            DominatingFactor::Linear { .. } => DivergenceType::Divergent,
            DominatingFactor::Power { alpha, .. } => {
                if *alpha >= critical {
                    DivergenceType::Divergent
                } else {
                    DivergenceType::Convergent
                }
            }
            DominatingFactor::Tabulated { t, h } => {
                let tail: Vec<(f64, f64)> = t
                    .iter()
                    .zip(h)
                    .filter(|(&x, &y)| (1.0..=1e6).contains(&x) && y > 0.0)
                    .map(|(&x, &y)| (x.ln(), y.ln()))
                    .collect();
                if tail.len() < 3 || tail.last().is_none_or(|p| p.0 < 100f64.ln()) {
                    return DivergenceType::Inconclusive;
                }
                let fit = &tail[tail.len() / 2..];
                let fit = if fit.len() < 2 { &tail[tail.len() - 2..] } else { fit };
                let m = fit.len() as f64;
                let (sx, sy) = fit.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
                let (mx, my) = (sx / m, sy / m);
                let num: f64 = fit.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
                let den: f64 = fit.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
                let slope = num / den;
                if slope >= critical + 0.05 {
                    DivergenceType::Divergent
                } else if slope <= critical - 0.05 {
                    DivergenceType::Convergent
                } else {
                    DivergenceType::Inconclusive
                }
            }
        }
    }
}

pub fn is_divergence_type(h: &DominatingFactor, n: usize) -> DivergenceType {
    h.divergence_type(n)
}

/// Value of the dominating-factor lower bound, with the closed form when
/// `H(t) = γt`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DominatedBound {
    pub value: f64,
    pub error: f64,
    pub sigma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub closed_form: Option<f64>,
}

/// `σ = log(2nM/(ω_{n−1}r₀ⁿ))`.
pub fn sigma(n: usize, big_m: f64, r0: f64) -> Result<f64> {
    let arg = 2.0 * n as f64 * big_m / (sphere_area(n) * r0.powi(n as i32));
    if !(arg > 0.0 && arg.is_finite()) {
        return Err(Error::Precondition(format!("log argument {arg} is not positive")));
    }
    Ok(arg.ln())
}

/// Constants `(C₁, C₂, μ)` of the linear-factor closed form.
pub fn linear_constants(n: usize, gamma: f64) -> (f64, f64, f64) {
    let nf = n as f64;
    let g = gamma.powf(1.0 / (nf - 1.0));
    let c1 = if n >= 3 { (nf - 1.0) * g / (nf * (nf - 2.0)) } else { f64::NAN };
    (c1, g / nf, (nf - 2.0) / (nf - 1.0))
}

/// `∫_{1/n}^m [H^{−1}(nt + σ)]^{−1/(n−1)} dt`.
pub fn dominated_modulus_bound(m: f64, big_m: f64, r0: f64, n: usize, h: &DominatingFactor) -> Result<DominatedBound> {
    if n < 2 {
        return Err(Error::OutOfRange(format!("dimension must be >= 2, got {n}")));
    }
    let nf = n as f64;
    if !(m > 1.0 / nf) || !(big_m > 0.0) || !(r0 > 0.0) {
        return Err(Error::Precondition(format!("need m > 1/n, M > 0, r0 > 0; got {m}, {big_m}, {r0}")));
    }
    h.validate()?;
    let s = sigma(n, big_m, r0)?;
    let e = 1.0 / (nf - 1.0);
    let integrand = |t: f64| {
        let inv = h.inverse(nf * t + s);
        if !(inv > 0.0 && inv.is_finite()) {
            return Err(Error::Precondition(format!("H^-1({}) = {inv} makes the integrand infinite", nf * t + s)));
        }
        Ok(inv.powf(-e))
    };
    let q = gauss_kronrod(integrand, 1.0 / nf, m, 0.0, 1e-13, 2_000)?;
    let closed_form = match h {
        DominatingFactor::Linear { gamma, t0 } if *t0 == 0.0 => {
            let (c1, c2, mu) = linear_constants(n, *gamma);
            Some(if n == 2 {
                c2 * ((nf * m + s) / (1.0 + s)).ln()
            } else {
                c1 * ((nf * m + s).powf(mu) - (1.0 + s).powf(mu))
            })
        }
        _ => None,
    };
    Ok(DominatedBound { value: q.value, error: q.error, sigma: s, closed_form })
}

/// `Qₙ·exp(−mo/2)`.
pub fn separation_bound(mo: f64, n: usize) -> Result<f64> {
    Ok(constants_for(n)?.q_value * (-mo / 2.0).exp())
}

/// `exp(Aₙ)·dist·exp(−mo)`; requires `mo > Aₙ`.
pub fn boundary_estimate(mo: f64, dist: f64, n: usize) -> Result<f64> {
    let a = constants_for(n)?.a_value_or_upper;
    if !(mo > a) {
        return Err(Error::Precondition(format!("boundary estimate needs mo > A_n = {a}, got {mo}")));
    }
    if !(dist > 0.0) {
        return Err(Error::Precondition(format!("distance must be positive, got {dist}")));
    }
    Ok(a.exp() * dist * (-mo).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipschitzConstants {
    pub c1: f64,
    pub c2: f64,
    /// Radii below this value are admissible.
    pub r0: f64,
}

pub fn lipschitz_constants(a_n: f64, big_m: f64, big_r: f64, n: usize) -> Result<LipschitzConstants> {
    if !(big_r > 0.0) || !(big_m >= 0.0) {
        return Err(Error::Precondition(format!("need R > 0 and M >= 0, got {big_r}, {big_m}")));
    }
    let k = 2.0 * big_m / sphere_area(n);
    Ok(LipschitzConstants { c1: (a_n + k).exp() / big_r, c2: a_n.exp() / big_r, r0: big_r * (-a_n - k).exp() })
}

/// Exponent `α` with `ω = 1/α^{n−1} − 1`.
pub fn mainhol_exponent(omega: f64, n: usize) -> f64 {
    (1.0 / (1.0 + omega)).powf(1.0 / (n as f64 - 1.0))
}

/// Normalized half-ball average `ω(t; s)` of `D − 1`.
fn half_ball_excess(field: &AngularField, x0: &Vector, s: f64, spec: &QuadratureSpec) -> Result<QuadResult> {
    let n = x0.len();
    let q = integrate_ball(|x| Ok(field.value(x, x0)? - 1.0), x0, s, true, spec)?;
    let norm = 2.0 / (unit_ball_volume(n) * s.powi(n as i32));
    Ok(QuadResult { value: q.value * norm, error: q.error * norm, evaluations: q.evaluations })
}

/// Both sides of `(P − 1)log(R/r) = (ω(R) − ω(r))/n + ∫_r^R ω(s)/s ds`.
pub fn holder_identity_check(
    map: &MapSpec,
    t: &Vector,
    r: f64,
    big_r: f64,
    spec: &QuadratureSpec,
) -> Result<BoundReport> {
    let n = t.len();
    check_dim(map, n)?;
    if t[n - 1] != 0.0 {
        return Err(Error::Precondition("the base point must lie on the boundary hyperplane".into()));
    }
    let region = Region::semiring(t.clone(), r, big_r)?;
    let field = AngularField::Map(map.clone());
    let excess = integral_d(map, &region, spec, 1.0)?;
    let span = (big_r / r).ln();
    let p = 1.0 + excess.value / region.nu();
    let lhs = (p - 1.0) * span;
    let lhs_err = excess.error / region.sphere_area();
    let w_big = half_ball_excess(&field, t, big_r, spec)?;
    let w_small = half_ball_excess(&field, t, r, spec)?;
    let mut inner_err = 0.0f64;
    let tail = gauss_kronrod(
        |u| {
            let w = half_ball_excess(&field, t, u.exp(), spec)?;
            inner_err = inner_err.max(w.error);
            Ok(w.value)
        },
        r.ln(),
        big_r.ln(),
        1e-12,
        spec.tol,
        200,
    )?;
    let rhs = (w_big.value - w_small.value) / n as f64 + tail.value;
    let rhs_err = (w_big.error + w_small.error) / n as f64 + tail.error + inner_err * span;
    let error = lhs_err + rhs_err;
    let mut rep = BoundReport::new("holder", lhs, rhs, error)
        .part("P", p)
        .part("omega_R", w_big.value)
        .part("omega_r", w_small.value)
        .part("alpha_R", mainhol_exponent(w_big.value, n));
    rep.verdict =
        if (lhs - rhs).abs() <= budget(error, lhs.abs().max(rhs.abs())) { Verdict::Holds } else { Verdict::Violated };
    Ok(rep)
}

/// Which of the two continuity estimates applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContinuityForm {
    /// Bound on `|f(x₁) − f(x₀)|`.
    Distance,
    /// Bound on `log|f(x₁) − f(x₀)|`.
    LogDistance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuityBound {
    pub value: f64,
    pub form: ContinuityForm,
    pub sigma: f64,
    pub mu: f64,
    pub c1: f64,
    pub c2: f64,
    pub alpha: f64,
    pub beta: f64,
    pub delta: f64,
    /// Set when `Aₙ` is only known through an upper bound.
    pub conservative: bool,
}

pub fn continuity_bounds(n: usize, gamma: f64, big_m: f64, r0: f64, dist: f64, d: f64) -> Result<ContinuityBound> {
    if !(d > 0.0 && d < r0) {
        return Err(Error::Precondition(format!("need 0 < |x1 - x0| < r0, got {d} with r0 = {r0}")));
    }
    if !(gamma > 0.0 && dist > 0.0) {
        return Err(Error::Precondition(format!("need gamma > 0 and dist > 0, got {gamma}, {dist}")));
    }
    let consts = constants_for(n)?;
    let a = consts.a_value_or_upper;
    let s = sigma(n, big_m, r0)?;
    let (c1, c2, mu) = linear_constants(n, gamma);
    let nf = n as f64;
    let m = (r0 / d).ln();
    let alpha = dist * (a - c2 * nf.ln()).exp();
    let (value, form, beta, delta) = if n == 2 {
        (alpha * m.powf(-c2), ContinuityForm::Distance, f64::NAN, f64::NAN)
    } else {
        if 1.0 + s < 0.0 {
            return Err(Error::Precondition(format!("1 + sigma = {} is negative", 1.0 + s)));
        }
        let beta = c1 * nf.powf(mu);
        let delta = a + c1 * (1.0 + s).powf(mu) + dist.ln();
        (-beta * m.powf(mu) + delta, ContinuityForm::LogDistance, beta, delta)
    };
    Ok(ContinuityBound { value, form, sigma: s, mu, c1, c2, alpha, beta, delta, conservative: !consts.a_is_exact })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Trend {
    Extends,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfinityReport {
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
    pub errors: Vec<f64>,
    pub verdict: Trend,
}

/// `(log R)^{−2} ∫_{S(0; r₀, R)} (D − 1) dν` along an increasing list of radii.
pub fn infinity_check(
    field: &AngularField,
    n: usize,
    r0: f64,
    radii: &[f64],
    spec: &QuadratureSpec,
) -> Result<InfinityReport> {
    if radii.is_empty() || radii.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Precondition("radii must be a nonempty increasing list".into()));
    }
    if !(r0 > 0.0 && radii[0] > r0 && radii[0] > 1.0) {
        return Err(Error::Precondition(format!("radii must exceed max(r0, 1) with r0 = {r0} > 0")));
    }
    if let AngularField::Map(m) = field {
        check_dim(m, n)?;
    }
    let x0 = Vector::zeros(n);
    let mut values = Vec::with_capacity(radii.len());
    let mut errors = Vec::with_capacity(radii.len());
    for &big_r in radii {
        let region = Region::semiring(x0.clone(), r0, big_r)?;
        let q = integrate_log_polar(|x| Ok(field.value(x, &x0)? - 1.0), &region, spec)?;
        let l2 = big_r.ln().powi(2);
        values.push(q.value / l2);
        errors.push(q.error / l2);
    }
    let last = *values.last().unwrap_or(&f64::NAN);
    let decreasing = values.windows(2).zip(errors.windows(2)).all(|(v, e)| v[1] <= v[0] + budget(e[0] + e[1], v[0]));
    let verdict = if last.abs() < 1e-2 && decreasing { Trend::Extends } else { Trend::Inconclusive };
    Ok(InfinityReport { radii: radii.to_vec(), values, errors, verdict })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{E, PI};

    fn spec() -> QuadratureSpec {
        QuadratureSpec::default()
    }

    fn half(r: f64, big_r: f64) -> Shape {
        Shape::half_semiring_at_origin(2, r, big_r).unwrap()
    }

    #[test]
    fn identity_bounds_are_trivial() {
        let id = MapSpec::identity();
        let s = half(1.0, E);
        let r1 = eq1est_bounds(&id, &s, &spec(), Some(Measured::exact(1.0))).unwrap();
        assert!((r1.left - 1.0).abs() < 1e-12 && (r1.right - 1.0).abs() < 1e-12);
        assert_eq!(r1.verdict, Verdict::Holds);
        let r2 = eq2est_bounds(&id, &s, &spec(), Some(Measured::exact(0.0))).unwrap();
        assert!(r2.left.abs() < 1e-12 && r2.right.abs() < 1e-12);
        assert_eq!(r2.verdict, Verdict::Holds);
        let b = modintbound(&id, &Vector::zeros(2), 1.0, 5.0, true, &spec()).unwrap();
        assert!((b.value - 5f64.ln()).abs() < 1e-10);
    }

    #[test]
    fn radial_stretch_closed_forms() {
        let f = MapSpec::radial(0.8).unwrap();
        let s = half(1.0, E);
        let r1 = eq1est_bounds(&f, &s, &spec(), Some(Measured::exact(0.8))).unwrap();
        assert!((r1.left - 0.8).abs() < 1e-9 && (r1.right - 0.8).abs() < 1e-9);
        assert_eq!(r1.verdict, Verdict::Holds);
        let r2 = eq2est_bounds(&f, &s, &spec(), Some(Measured::exact(0.2))).unwrap();
        assert!((r2.left - 0.2).abs() < 1e-9 && (r2.right - 0.25).abs() < 1e-9);
        assert_eq!(r2.verdict, Verdict::Holds);
        let p = psi_d(&f, &Vector::zeros(2), 3.0, true, &spec()).unwrap();
        assert!((p.value - 1.25).abs() < 1e-10);
        let b = modintbound(&f, &Vector::zeros(2), 1.0, E, true, &spec()).unwrap();
        assert!((b.value - 0.8).abs() < 1e-9);
    }

    #[test]
    fn expanding_stretch_leaves_upper_side_open() {
        let f = MapSpec::radial(1.25).unwrap();
        let r = eq2est_bounds(&f, &half(1.0, E), &spec(), Some(Measured::exact(-0.25))).unwrap();
        assert_eq!(r.verdict, Verdict::Inconclusive);
        assert!(r.left <= -0.25 + 1e-9);
    }

    #[test]
    fn violated_only_beyond_budget() {
        assert_eq!(le_within(1.0, 0.9, 0.2), Verdict::Holds);
        assert_eq!(le_within(1.0, 0.9, 0.05), Verdict::Violated);
        let f = MapSpec::radial(0.8).unwrap();
        let r = eq1est_bounds(&f, &half(1.0, E), &spec(), Some(Measured::exact(0.9))).unwrap();
        assert_eq!(r.verdict, Verdict::Violated);
    }

    #[test]
    fn twist_ring_variant() {
        let ann = Shape::annulus_at_origin(2, 1.0, E).unwrap();
        let r = eq1est_bounds(&MapSpec::twist(), &ann, &spec(), Some(Measured::exact(1.0))).unwrap();
        assert!((r.left - 1.0).abs() < 1e-8);
        assert!(r.right >= 1.0);
        assert_eq!(r.verdict, Verdict::Holds);
        let p = psi_d(&MapSpec::twist(), &Vector::zeros(2), 2.0, false, &spec()).unwrap();
        assert!((p.value - 1.0).abs() < 1e-8);
        let b = modintbound(&MapSpec::twist(), &Vector::zeros(2), 1.0, E, false, &spec()).unwrap();
        assert!((b.value - 1.0).abs() < 1e-8);
    }

    #[test]
    fn linear_factor_closed_form() {
        let h = DominatingFactor::linear(1.0).unwrap();
        let b = dominated_modulus_bound(10.0, PI, 1.0, 2, &h).unwrap();
        let cf = b.closed_form.unwrap();
        assert!((b.value - cf).abs() <= 1e-8 * cf);
        let (c1, _, mu) = linear_constants(3, 1.0);
        assert!((c1 - 2.0 / 3.0).abs() < 1e-15 && (mu - 0.5).abs() < 1e-15);
    }

    #[test]
    fn divergence_classes() {
        assert_eq!(DominatingFactor::linear(2.0).unwrap().divergence_type(3), DivergenceType::Divergent);
        let p = |a: f64| DominatingFactor::power(1.0, a, DominatingFactor::power_threshold(1.0, a)).unwrap();
        assert_eq!(p(0.5).divergence_type(2), DivergenceType::Convergent);
        assert_eq!(p(1.0).divergence_type(2), DivergenceType::Divergent);
        assert!(DominatingFactor::power(1.0, 0.5, 0.0).is_err());
    }

    #[test]
    fn tabulated_factor() {
        let t: Vec<f64> = (0..=60).map(|k| 10f64.powf(k as f64 / 10.0) - 1.0).collect();
        let h: Vec<f64> = t.iter().map(|x| 2.0 * x).collect();
        let f = DominatingFactor::tabulated(t.clone(), h).unwrap();
        assert_eq!(f.divergence_type(3), DivergenceType::Divergent);
        assert!((f.inverse(f.eval(37.0)) - 37.0).abs() < 1e-9);
        let slow: Vec<f64> = t.iter().map(|x| 1.0 + (1.0 + x).powf(0.2)).collect();
        let g = DominatingFactor::Tabulated { t: t.clone(), h: slow };
        assert_eq!(g.divergence_type(2), DivergenceType::Convergent);
        assert!(DominatingFactor::tabulated(vec![0.0, 1.0], vec![1.0, 0.5]).is_err());
        assert!(DominatingFactor::tabulated(vec![0.0, 1.0, 2.0], vec![0.0, 3.0, 3.1]).is_err());
    }

    #[test]
    fn constants_of_the_boundary_estimates() {
        let q = crate::special::constants_for(2).unwrap().q_value;
        assert!((separation_bound(10.0, 2).unwrap() - q * (-5.0f64).exp()).abs() < 1e-15);
        assert!((separation_bound(10.0, 2).unwrap() - 0.12965).abs() < 1e-5);
        assert!((boundary_estimate(PI + 1e-9, 1.0, 2).unwrap() - 1.0).abs() < 1e-8);
        assert!(boundary_estimate(PI, 1.0, 2).is_err());
        let l = lipschitz_constants(PI, 0.0, 1.0, 2).unwrap();
        assert!((l.c1 - PI.exp()).abs() < 1e-12 && l.c1 == l.c2);
        let l2 = lipschitz_constants(PI, 0.0, 2.0, 2).unwrap();
        assert!((l2.c1 - l.c1 / 2.0).abs() < 1e-12);
    }

    #[test]
    fn holder_identity_for_constant_dilatation() {
        let f = MapSpec::radial(0.8).unwrap();
        let rep = holder_identity_check(&f, &Vector::zeros(2), 0.01, 1.0, &spec()).unwrap();
        assert_eq!(rep.verdict, Verdict::Holds);
        assert!((rep.left - 0.25 * 100f64.ln()).abs() < 1e-9);
        assert!((rep.parts["alpha_R"] - 0.8).abs() < 1e-9);
        assert!((mainhol_exponent(0.25, 2) - 0.8).abs() < 1e-15);
    }

    #[test]
    fn continuity_constants() {
        let c = continuity_bounds(3, 1.0, PI, 1.0, 1.0, 1e-3).unwrap();
        assert!((c.mu - 0.5).abs() < 1e-15);
        assert!((c.beta - 2.0 / 3.0 * 3f64.sqrt()).abs() < 1e-14);
        assert!(c.conservative);
        let c2 = continuity_bounds(2, 1.0, PI, 1.0, 1.0, 1e-3).unwrap();
        assert!((c2.c2 - 0.5).abs() < 1e-15 && c2.form == ContinuityForm::Distance);
        assert!(continuity_bounds(2, 1.0, PI, 1.0, 1.0, 2.0).is_err());
    }

    #[test]
    fn infinity_trends() {
        let radii: Vec<f64> = [10.0, 50.0, 100.0, 200.0].iter().map(|k: &f64| k.exp()).collect();
        let id = infinity_check(&AngularField::Map(MapSpec::identity()), 2, 1.0, &radii, &spec()).unwrap();
        assert_eq!(id.verdict, Trend::Extends);
        let log = infinity_check(&AngularField::LogRadius, 2, 1.0, &radii, &spec()).unwrap();
        assert_eq!(log.verdict, Trend::Inconclusive);
        assert!((log.values[3] - PI / 2.0).abs() < 1e-9);
    }
}
