//! Weighted integrals over rings and semirings in logarithmic polar
//! coordinates, sphere cubature and adaptive Gauss–Kronrod on intervals.

use std::f64::consts::PI;

use gauss_quad::GaussLegendre;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{sphere_area, Shape, ShapeKind, Vector};
use crate::par;

/// Node counts and tolerances for log-polar tensor quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    /// Gauss–Legendre nodes in `t = log|x − x₀|`.
    pub radial: usize,
    /// Angular nodes per angle (product rules, n ≤ 3).
    pub angular: usize,
    /// Target relative error of the refinement estimate.
    pub tol: f64,
    /// Maximum number of node doublings.
    pub max_refine: usize,
    /// Sample count of the Monte Carlo sphere rule (n ≥ 4).
    pub mc_points: usize,
    pub seed: u64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self { radial: 16, angular: 16, tol: 1e-8, max_refine: 3, mc_points: 100_000, seed: 0x5eed }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.radial < 8 || self.angular < 8 {
            return Err(Error::Precondition(format!(
                "quadrature node counts must be >= 8 (radial {}, angular {})",
                self.radial, self.angular
            )));
        }
        if !(self.tol > 0.0 && self.tol <= 1e-2) {
            return Err(Error::Precondition(format!("quadrature tolerance {} outside (0, 1e-2]", self.tol)));
        }
        if self.mc_points < 100_000 {
            return Err(Error::Precondition("Monte Carlo sphere rule needs >= 1e5 points".into()));
        }
        Ok(())
    }

    /// A copy with every node count multiplied by `2^k`.
    pub fn refined(&self, k: u32) -> Self {
        let f = 1usize << k;
        Self { radial: self.radial * f, angular: self.angular * f, mc_points: self.mc_points * f, ..*self }
    }
}

/// A value together with an error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

/// Gauss–Legendre nodes and weights mapped to `[a, b]`.
pub fn gauss_legendre(count: usize, a: f64, b: f64) -> Result<Vec<(f64, f64)>> {
    let rule = GaussLegendre::new(count).map_err(|e| Error::Quadrature(e.to_string()))?;
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    Ok(rule.as_node_weight_pairs().iter().map(|&(x, w)| (mid + half * x, half * w)).collect())
}

/// Cubature rule on the unit sphere or on the upper hemisphere `zₙ ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereRule {
    pub points: Vec<Vector>,
    pub weights: Vec<f64>,
    pub monte_carlo: bool,
}

impl SphereRule {
    pub fn new(n: usize, angular: usize, hemisphere: bool, spec: &QuadratureSpec) -> Result<Self> {
        match n {
            0 | 1 => Err(Error::OutOfRange(format!("dimension must be >= 2, got {n}"))),
            2 => {
                let (points, weights) = if hemisphere {
                    gauss_legendre(angular, 0.0, PI)?
                        .into_iter()
                        .map(|(phi, w)| (Vector::from_vec(vec![phi.cos(), phi.sin()]), w))
                        .unzip()
                } else {
                    let m = 2 * angular;
                    let w = 2.0 * PI / m as f64;
                    (0..m)
                        .map(|j| {
                            let phi = 2.0 * PI * (j as f64 + 0.5) / m as f64;
                            (Vector::from_vec(vec![phi.cos(), phi.sin()]), w)
                        })
                        .unzip()
                };
                Ok(Self { points, weights, monte_carlo: false })
            }
            3 => {
                let top = if hemisphere { PI / 2.0 } else { PI };
                let polar = gauss_legendre(angular, 0.0, top)?;
                let m = 2 * angular;
                let dphi = 2.0 * PI / m as f64;
                let mut points = Vec::with_capacity(polar.len() * m);
                let mut weights = Vec::with_capacity(polar.len() * m);
                for &(theta, w) in &polar {
                    let (s, c) = theta.sin_cos();
                    for j in 0..m {
                        let phi = dphi * (j as f64 + 0.5);
                        points.push(Vector::from_vec(vec![s * phi.cos(), s * phi.sin(), c]));
                        weights.push(w * s * dphi);
                    }
                }
                Ok(Self { points, weights, monte_carlo: false })
            }
            _ => {
                let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
                let count = spec.mc_points.max(100_000);
                let area = if hemisphere { sphere_area(n) / 2.0 } else { sphere_area(n) };
                let mut points = Vec::with_capacity(count);
                for _ in 0..count {
                    let mut z = Vector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
                    let norm = z.norm();
                    z /= norm;
                    if hemisphere && z[n - 1] < 0.0 {
                        z[n - 1] = -z[n - 1];
                    }
                    points.push(z);
                }
                Ok(Self { points, weights: vec![area / count as f64; count], monte_carlo: true })
            }
        }
    }

    pub fn area(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Integration domain `{r ≤ |x − x₀| ≤ R}`, optionally cut to `xₙ ≥ x₀ₙ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub x0: Vector,
    pub r: f64,
    pub big_r: f64,
    pub hemisphere: bool,
}

impl Region {
    pub fn semiring(x0: Vector, r: f64, big_r: f64) -> Result<Self> {
        Self::new(x0, r, big_r, true)
    }

    pub fn ring(x0: Vector, r: f64, big_r: f64) -> Result<Self> {
        Self::new(x0, r, big_r, false)
    }

    fn new(x0: Vector, r: f64, big_r: f64, hemisphere: bool) -> Result<Self> {
        if x0.len() < 2 {
            return Err(Error::OutOfRange("dimension must be >= 2".into()));
        }
        if !(r > 0.0 && big_r > r && big_r.is_finite()) {
            return Err(Error::InvalidShape(format!("need 0 < r < R, got r = {r}, R = {big_r}")));
        }
        Ok(Self { x0, r, big_r, hemisphere })
    }

    pub fn from_shape(shape: &Shape) -> Result<Self> {
        match shape.kind() {
            ShapeKind::Annulus => Self::ring(shape.center().clone(), shape.r0(), shape.r1()),
            ShapeKind::HalfSemiring => Self::semiring(shape.center().clone(), shape.r0(), shape.r1()),
            ShapeKind::ApollonianSemiring => {
                Err(Error::InvalidShape("quadrature is available for annuli and half semirings".into()))
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.x0.len()
    }

    /// Area of the unit (hemi)sphere carried by the region.
    pub fn sphere_area(&self) -> f64 {
        let w = sphere_area(self.dim());
        if self.hemisphere {
            w / 2.0
        } else {
            w
        }
    }

    /// `ν(region) = area · log(R/r)`.
    pub fn nu(&self) -> f64 {
        self.sphere_area() * (self.big_r / self.r).ln()
    }

    pub fn with_radii(&self, r: f64, big_r: f64) -> Result<Self> {
        Self::new(self.x0.clone(), r, big_r, self.hemisphere)
    }
}

fn checked(v: f64, x: &Vector) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Quadrature(format!("non-finite integrand at {:?}", x.as_slice())))
    }
}

struct Pass {
    value: f64,
    stderr: f64,
    evaluations: usize,
}

fn combine(rule: &SphereRule, h: &[f64]) -> Pass {
    let value: f64 = rule.weights.iter().zip(h).map(|(w, v)| w * v).sum();
    let mut stderr = 0.0;
    if rule.monte_carlo && h.len() > 1 {
        let m = h.len() as f64;
        let mean = h.iter().sum::<f64>() / m;
        let var = h.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1.0);
        stderr = rule.area() * (var / m).sqrt();
    }
    Pass { value, stderr, evaluations: 0 }
}

fn log_polar_pass<G>(g: &G, region: &Region, spec: &QuadratureSpec) -> Result<Pass>
where
    G: Fn(&Vector) -> Result<f64> + Sync,
{
    let rule = SphereRule::new(region.dim(), spec.angular, region.hemisphere, spec)?;
    let radial = gauss_legendre(spec.radial, region.r.ln(), region.big_r.ln())?;
    let h = par::try_map_range(rule.len(), |k| {
        let z = &rule.points[k];
        let mut acc = 0.0;
        for &(t, w) in &radial {
            let x = &region.x0 + z * t.exp();
            acc += w * checked(g(&x)?, &x)?;
        }
        Ok::<f64, Error>(acc)
    })?;
    let mut pass = combine(&rule, &h);
    pass.evaluations = rule.len() * radial.len();
    Ok(pass)
}

fn refine_until<P>(spec: &QuadratureSpec, mut pass: P) -> Result<QuadResult>
where
    P: FnMut(&QuadratureSpec) -> Result<Pass>,
{
    spec.validate()?;
    let mut prev = pass(spec)?;
    let mut evaluations = prev.evaluations;
    let mut k = 1;
    loop {
        let next = pass(&spec.refined(k))?;
        evaluations += next.evaluations;
        let error = (next.value - prev.value).abs() + next.stderr;
        if error <= spec.tol * next.value.abs().max(f64::MIN_POSITIVE) || k as usize >= spec.max_refine.max(1) {
            return Ok(QuadResult { value: next.value, error, evaluations });
        }
        prev = next;
        k += 1;
    }
}

/// `∫ g(x)·|x − x₀|^{−n} dm(x)` over the region, computed as
/// `∫_{log r}^{log R} ∫ g(x₀ + eᵗz) dσ(z) dt`.
pub fn integrate_log_polar<G>(g: G, region: &Region, spec: &QuadratureSpec) -> Result<QuadResult>
where
    G: Fn(&Vector) -> Result<f64> + Sync,
{
    refine_until(spec, |s| log_polar_pass(&g, region, s))
}

/// Mean of `g(x₀ + t·z)` over the unit (hemi)sphere.
pub fn sphere_mean<G>(g: G, x0: &Vector, t: f64, hemisphere: bool, spec: &QuadratureSpec) -> Result<QuadResult>
where
    G: Fn(&Vector) -> Result<f64> + Sync,
{
    let n = x0.len();
    let res = refine_until(spec, |s| {
        let rule = SphereRule::new(n, s.angular, hemisphere, s)?;
        let h = par::try_map_range(rule.len(), |k| {
            let x = x0 + &rule.points[k] * t;
            checked(g(&x)?, &x)
        })?;
        let mut pass = combine(&rule, &h);
        let area = rule.area();
        pass.value /= area;
        pass.stderr /= area;
        pass.evaluations = rule.len();
        Ok(pass)
    })?;
    Ok(res)
}

/// `∫ g dm` over the (half) ball `|x − x₀| ≤ R`, Gauss–Legendre in the radius.
pub fn integrate_ball<G>(g: G, x0: &Vector, big_r: f64, hemisphere: bool, spec: &QuadratureSpec) -> Result<QuadResult>
where
    G: Fn(&Vector) -> Result<f64> + Sync,
{
    let n = x0.len();
    if !(big_r > 0.0) {
        return Err(Error::Precondition(format!("ball radius must be positive, got {big_r}")));
    }
    refine_until(spec, |s| {
        let rule = SphereRule::new(n, s.angular, hemisphere, s)?;
        let radial = gauss_legendre(s.radial, 0.0, big_r)?;
        let h = par::try_map_range(rule.len(), |k| {
            let z = &rule.points[k];
            let mut acc = 0.0;
            for &(rho, w) in &radial {
                let x = x0 + z * rho;
                acc += w * rho.powi(n as i32 - 1) * checked(g(&x)?, &x)?;
            }
            Ok::<f64, Error>(acc)
        })?;
        let mut pass = combine(&rule, &h);
        pass.evaluations = rule.len() * radial.len();
        Ok(pass)
    })
}

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const GK_WG: [f64; 4] =
    [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

fn gk15<F>(f: &mut F, a: f64, b: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c)?;
    let mut kron = GK_WK[7] * fc;
    let mut gauss = GK_WG[3] * fc;
    for i in 0..7 {
        let dx = h * GK_NODES[i];
        let s = f(c - dx)? + f(c + dx)?;
        kron += GK_WK[i] * s;
        if i % 2 == 1 {
            gauss += GK_WG[i / 2] * s;
        }
    }
    let (k, g) = (kron * h, gauss * h);
    if !k.is_finite() {
        return Err(Error::Quadrature(format!("non-finite integrand on [{a}, {b}]")));
    }
    Ok((k, (k - g).abs()))
}

/// Globally adaptive 7/15-point Gauss–Kronrod quadrature on `[a, b]`.
pub fn gauss_kronrod<F>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_intervals: usize,
) -> Result<QuadResult>
where
    F: FnMut(f64) -> Result<f64>,
{
    if a == b {
        return Ok(QuadResult { value: 0.0, error: 0.0, evaluations: 0 });
    }
    let mut parts = vec![(a, b, gk15(&mut f, a, b)?)];
    let mut evaluations = 15;
    loop {
        let value: f64 = parts.iter().map(|p| p.2 .0).sum();
        let error: f64 = parts.iter().map(|p| p.2 .1).sum();
        if error <= abs_tol.max(rel_tol * value.abs()) {
            return Ok(QuadResult { value, error, evaluations });
        }
        if parts.len() >= max_intervals {
            return Err(Error::Quadrature(format!(
                "adaptive quadrature did not reach tolerance: value {value}, error {error}"
            )));
        }
        let worst = parts.iter().enumerate().fold(0, |best, (i, p)| if p.2 .1 > parts[best].2 .1 { i } else { best });
        let (lo, hi, _) = parts.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        parts.push((lo, mid, gk15(&mut f, lo, mid)?));
        parts.push((mid, hi, gk15(&mut f, mid, hi)?));
        evaluations += 30;
        parts.sort_by(|x, y| x.0.total_cmp(&y.0));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> QuadratureSpec {
        QuadratureSpec::default()
    }

    #[test]
    fn sphere_rule_areas() {
        for n in 2..=5 {
            for half in [true, false] {
                let rule = SphereRule::new(n, 12, half, &spec()).unwrap();
                let want = if half { sphere_area(n) / 2.0 } else { sphere_area(n) };
                assert!((rule.area() - want).abs() < 1e-10 * want, "n = {n}");
                assert!(rule.points.iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
                if half {
                    assert!(rule.points.iter().all(|z| z[n - 1] >= 0.0));
                }
            }
        }
    }

    #[test]
    fn measure_of_semirings() {
        let r2 = Region::semiring(Vector::zeros(2), 1.0, 1f64.exp()).unwrap();
        let v = integrate_log_polar(|_| Ok(1.0), &r2, &spec()).unwrap();
        assert!((v.value - PI).abs() < 1e-12);
        let r3 = Region::semiring(Vector::zeros(3), 1.0, 2f64.exp()).unwrap();
        let v = integrate_log_polar(|_| Ok(1.0), &r3, &spec()).unwrap();
        assert!((v.value - 4.0 * PI).abs() < 1e-10);
        let zero = integrate_log_polar(|_| Ok(0.0), &r3, &spec()).unwrap();
        assert_eq!(zero.value, 0.0);
    }

    #[test]
    fn log_weight_is_integrated_exactly() {
        // ∫ log|x| dν over S(0;1,e²) = (ω₁/2)·(2²/2)
        let r = Region::semiring(Vector::zeros(2), 1.0, 2f64.exp()).unwrap();
        let v = integrate_log_polar(|x| Ok(x.norm().ln()), &r, &spec()).unwrap();
        assert!((v.value - 2.0 * PI).abs() < 1e-10);
    }

    #[test]
    fn anisotropic_integrand() {
        // ∫ x₂² |x|^{-2} dν over the upper half annulus 1 ≤ |x| ≤ e: (π/2)·1
        let r = Region::semiring(Vector::zeros(2), 1.0, 1f64.exp()).unwrap();
        let v = integrate_log_polar(|x| Ok(x[1] * x[1] / x.norm_squared()), &r, &spec()).unwrap();
        assert!((v.value - PI / 2.0).abs() < 1e-10);
    }

    #[test]
    fn ball_volume() {
        let v = integrate_ball(|_| Ok(1.0), &Vector::zeros(3), 2.0, true, &spec()).unwrap();
        assert!((v.value - 2.0 / 3.0 * PI * 8.0).abs() < 1e-10);
    }

    #[test]
    fn monte_carlo_mean_reports_error() {
        let s = QuadratureSpec { max_refine: 1, ..spec() };
        let m = sphere_mean(|x| Ok(x[0] * x[0]), &Vector::zeros(4), 1.0, false, &s).unwrap();
        assert!((m.value - 0.25).abs() < 5.0 * m.error.max(1e-3));
        assert!(m.error > 0.0);
    }

    #[test]
    fn kronrod_against_antiderivatives() {
        let v = gauss_kronrod(|x| Ok(1.0 / x), 1.0, 1e4, 1e-14, 1e-13, 500).unwrap();
        assert!((v.value - 1e4f64.ln()).abs() < 1e-11);
        let v = gauss_kronrod(|x| Ok(x.sqrt()), 0.0, 1.0, 1e-14, 1e-13, 500).unwrap();
        assert!((v.value - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_finite_samples() {
        let r = Region::semiring(Vector::zeros(2), 1.0, 2.0).unwrap();
        assert!(matches!(integrate_log_polar(|_| Ok(f64::NAN), &r, &spec()), Err(Error::Quadrature(_))));
    }

    #[test]
    fn spec_validation() {
        assert!(QuadratureSpec { radial: 4, ..spec() }.validate().is_err());
        assert!(QuadratureSpec { tol: 0.5, ..spec() }.validate().is_err());
        assert!(spec().validate().is_ok());
    }
}
