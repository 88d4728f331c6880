//! Matrix dilatation coefficients and the angular/normal directional
//! dilatations of a mapping at a point relative to a center.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{MapSpec, Matrix, Vector};

/// Singular-value dilatation coefficients of a nonsingular matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatrixDilatations {
    /// ‖A‖, the largest singular value.
    pub norm: f64,
    /// l(A), the smallest singular value.
    pub small: f64,
    pub det: f64,
    /// Inner dilatation |det A|/l(A)ⁿ.
    pub h_i: f64,
    /// Outer dilatation ‖A‖ⁿ/|det A|.
    pub h_o: f64,
    /// Linear dilatation ‖A‖/l(A).
    pub h: f64,
}

pub fn matrix_dilatations(a: &Matrix) -> Result<MatrixDilatations> {
    let sv = a.clone().svd(false, false).singular_values;
    let norm = sv.max();
    let small = sv.min();
    if !(small > 0.0) || !norm.is_finite() {
        return Err(Error::SingularMatrix);
    }
    // |det A| = ∏σᵢ; the product avoids cancellation in the LU determinant
    let abs_det: f64 = sv.iter().product();
    let det = abs_det.copysign(a.determinant());
    Ok(MatrixDilatations {
        norm,
        small,
        det,
        h_i: sv.iter().map(|s| s / small).product(),
        h_o: sv.iter().map(|s| norm / s).product(),
        h: norm / small,
    })
}

/// `ℓ = min_{|h|=1} |Ah|/|h·u|`, evaluated as `1/|A^{−T}u|`.
///
/// Writing `g = Ah`, `|h·u| = |g·A^{−T}u| ≤ |g|·|A^{−T}u|` with equality for
/// `g ∥ A^{−T}u`. Directions with `h·u = 0` give an infinite ratio and never
/// attain the minimum.
pub fn ell_f(a: &Matrix, u: &Vector) -> Result<f64> {
    let w = a.transpose().lu().solve(u).ok_or(Error::SingularMatrix)?;
    let norm = w.norm();
    if !norm.is_finite() || norm == 0.0 {
        return Err(Error::SingularMatrix);
    }
    Ok(1.0 / norm)
}

/// `B = AᵀA` stored row-major with scratch space for the ascent.
struct Ascent<'a> {
    n: usize,
    b: Vec<f64>,
    u: &'a [f64],
    bh: Vec<f64>,
    cand: Vec<f64>,
    tangent: Vec<f64>,
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

fn normalize(x: &mut [f64]) {
    let r = dot(x, x).sqrt();
    x.iter_mut().for_each(|c| *c /= r);
}

impl<'a> Ascent<'a> {
    fn new(b: &Matrix, u: &'a [f64]) -> Self {
        let n = b.nrows();
        Self {
            n,
            b: (0..n * n).map(|k| b[(k / n, k % n)]).collect(),
            u,
            bh: vec![0.0; n],
            cand: vec![0.0; n],
            tangent: vec![0.0; n],
        }
    }

    fn apply_b(b: &[f64], n: usize, h: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = dot(&b[i * n..(i + 1) * n], h);
        }
    }

    // F(h) = |Ah|²(h·u)²
    fn objective(&mut self, h: &[f64]) -> f64 {
        Self::apply_b(&self.b, self.n, h, &mut self.bh);
        let c = dot(h, self.u);
        dot(h, &self.bh) * c * c
    }

    /// Newton step on the sphere when the Riemannian Hessian is negative
    /// definite on the tangent space; `bh` and `tangent` hold `Bh` and the
    /// projected gradient.
    fn newton_direction(&self, h: &[f64], q: f64, c: f64, radial: f64) -> Option<Vec<f64>> {
        let n = self.n;
        let (u, bh) = (self.u, &self.bh);
        let hv = Vector::from_column_slice(h);
        let p = Matrix::identity(n, n) - &hv * hv.transpose();
        let euclid = Matrix::from_fn(n, n, |i, j| {
            2.0 * c * c * self.b[i * n + j] + 4.0 * c * (bh[i] * u[j] + u[i] * bh[j]) + 2.0 * q * u[i] * u[j]
        });
        let hess = &p * euclid * &p - &p * radial;
        // h spans the null space of the projected Hessian; adding hhᵀ to its
        // negative leaves a matrix that is positive definite iff the Hessian
        // is negative definite on the tangent space
        let m = -(&hess + hess.transpose()) * 0.5 + &hv * hv.transpose();
        let chol = m.cholesky()?;
        let g = Vector::from_column_slice(&self.tangent);
        let s = chol.solve(&g);
        if s.dot(&g) <= 0.0 || !s.iter().all(|v| v.is_finite()) {
            return None;
        }
        Some(s.iter().copied().collect())
    }

    fn run(&mut self, start: &[f64]) -> f64 {
        let mut h = start.to_vec();
        normalize(&mut h);
        let scale = self.b.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
        let mut f = self.objective(&h);
        let mut step = 1.0 / scale;
        for _ in 0..2000 {
            Self::apply_b(&self.b, self.n, &h, &mut self.bh);
            let q = dot(&h, &self.bh);
            let c = dot(&h, self.u);
            for i in 0..self.n {
                self.tangent[i] = 2.0 * c * c * self.bh[i] + 2.0 * q * c * self.u[i];
            }
            let radial = dot(&self.tangent, &h);
            for i in 0..self.n {
                self.tangent[i] -= radial * h[i];
            }
            let gnorm = dot(&self.tangent, &self.tangent).sqrt();
            if gnorm <= 1e-13 * scale {
                break;
            }
            if let Some(s) = self.newton_direction(&h, q, c, radial) {
                for i in 0..self.n {
                    self.cand[i] = h[i] + s[i];
                }
                normalize(&mut self.cand);
                let cand = std::mem::take(&mut self.cand);
                let fc = self.objective(&cand);
                self.cand = cand;
                if fc >= f {
                    let gain = fc - f;
                    h.copy_from_slice(&self.cand);
                    f = fc;
                    if gain <= 1e-16 * f.max(f64::MIN_POSITIVE) {
                        return f;
                    }
                    continue;
                }
            }
            // Armijo backtracking along the retraction h ↦ (h + t·g)/|h + t·g|
            let mut t = step * 2.0;
            let mut accepted = false;
            for _ in 0..60 {
                for i in 0..self.n {
                    self.cand[i] = h[i] + t * self.tangent[i];
                }
                normalize(&mut self.cand);
                let cand = std::mem::take(&mut self.cand);
                let fc = self.objective(&cand);
                self.cand = cand;
                if fc >= f + 1e-4 * t * gnorm * gnorm {
                    let gain = fc - f;
                    h.copy_from_slice(&self.cand);
                    f = fc;
                    step = t;
                    accepted = true;
                    if gain <= 1e-16 * f.max(f64::MIN_POSITIVE) {
                        return f;
                    }
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        f
    }
}

/// `𝓛 = max_{|h|=1} |Ah|·|h·u|` by projected-gradient ascent on the unit
/// sphere from a fixed list of starts (coordinate axes, `u`, the right
/// singular vectors, their sums with `u` and `AᵀAu`). The objective is even in `h`, so each start
/// also covers its antipode.
pub fn lcal_f(a: &Matrix, u: &Vector) -> f64 {
    let n = a.nrows();
    let b = a.transpose() * a;
    let mut starts: Vec<Vector> = (0..n)
        .map(|i| {
            let mut e = Vector::zeros(n);
            e[i] = 1.0;
            e
        })
        .collect();
    starts.push(u.clone());
    let svd = a.clone().svd(false, true);
    if let Some(vt) = svd.v_t {
        for k in 0..vt.nrows() {
            let v = vt.row(k).transpose();
            starts.push(u + &v);
            starts.push(u - &v);
            starts.push(v);
        }
    }
    for i in 0..n {
        let mut m = u.clone();
        m[i] += 1.0;
        starts.push(m);
    }
    let bu = &b * u;
    if bu.norm() > 0.0 {
        starts.push(bu);
    }
    let mut distinct: Vec<Vector> = Vec::with_capacity(starts.len());
    for s in starts {
        let r = s.norm();
        if r > 0.0 {
            let s = s / r;
            if distinct.iter().all(|d| d.dot(&s).abs() < 1.0 - 1e-12) {
                distinct.push(s);
            }
        }
    }
    let starts = distinct;
    let uv: Vec<f64> = u.iter().copied().collect();
    let mut ascent = Ascent::new(&b, &uv);
    let best = starts.iter().filter(|s| s.norm() > 0.0).map(|s| ascent.run(s.as_slice())).fold(0.0, f64::max);
    best.sqrt()
}

/// All dilatation values of a map at `x` relative to `x0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DilatationSample {
    pub x: Vec<f64>,
    pub x0: Vec<f64>,
    pub u: Vec<f64>,
    pub ell: f64,
    #[serde(rename = "Lcal")]
    pub lcal: f64,
    /// Angular dilatation J/ℓⁿ.
    #[serde(rename = "D")]
    pub d: f64,
    /// Normal dilatation (𝓛ⁿ/J)^{1/(n−1)}.
    #[serde(rename = "T")]
    pub t: f64,
    pub matrix: MatrixDilatations,
    #[serde(rename = "J")]
    pub j: f64,
}

fn unit_direction(x: &Vector, x0: &Vector) -> Result<Vector> {
    if x.len() != x0.len() {
        return Err(Error::Precondition("x and x0 have different dimensions".into()));
    }
    let d = x - x0;
    let r = d.norm();
    if r == 0.0 {
        return Err(Error::Precondition("x must differ from x0".into()));
    }
    Ok(d / r)
}

fn checked_jacobian(map: &MapSpec, x: &Vector) -> Result<(Matrix, f64)> {
    let (jac, det) = map.jacobian(x)?;
    if det == 0.0 || !det.is_finite() {
        return Err(Error::IrregularPoint(x.iter().copied().collect()));
    }
    Ok((jac, det))
}

/// Angular dilatation `D_f(x, x0)` alone (no 𝓛 optimisation).
pub fn angular_dilatation(map: &MapSpec, x: &Vector, x0: &Vector) -> Result<f64> {
    let u = unit_direction(x, x0)?;
    let (jac, det) = checked_jacobian(map, x)?;
    let ell = ell_f(&jac, &u)?;
    Ok(det.abs() / ell.powi(x.len() as i32))
}

/// Angular and normal dilatations `(D, T)`.
pub fn directional_pair(map: &MapSpec, x: &Vector, x0: &Vector) -> Result<(f64, f64)> {
    let u = unit_direction(x, x0)?;
    let (jac, det) = checked_jacobian(map, x)?;
    let n = x.len() as i32;
    let ell = ell_f(&jac, &u)?;
    let lcal = lcal_f(&jac, &u);
    let j = det.abs();
    Ok((j / ell.powi(n), (lcal.powi(n) / j).powf(1.0 / (n - 1) as f64)))
}

pub fn directional_sample(map: &MapSpec, x: &Vector, x0: &Vector) -> Result<DilatationSample> {
    let u = unit_direction(x, x0)?;
    let (jac, det) = checked_jacobian(map, x)?;
    let n = x.len() as i32;
    let matrix = matrix_dilatations(&jac)?;
    let ell = ell_f(&jac, &u)?;
    let lcal = lcal_f(&jac, &u);
    let j = det.abs();
    Ok(DilatationSample {
        x: x.iter().copied().collect(),
        x0: x0.iter().copied().collect(),
        u: u.iter().copied().collect(),
        ell,
        lcal,
        d: j / ell.powi(n),
        t: (lcal.powi(n) / j).powf(1.0 / (n - 1) as f64),
        matrix,
        j,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{PI, SQRT_2};

    fn v(c: &[f64]) -> Vector {
        Vector::from_row_slice(c)
    }

    // Oracle: dense sampling of directions on the unit circle.
    fn sampled_extrema(a: &Matrix, u: &Vector, count: usize) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi: f64 = 0.0;
        for i in 0..count {
            let phi = PI * (i as f64 + 0.5) / count as f64;
            let h = v(&[phi.cos(), phi.sin()]);
            let ah = (a * &h).norm();
            let c = h.dot(u).abs();
            if c > 0.0 {
                lo = lo.min(ah / c);
            }
            hi = hi.max(ah * c);
        }
        (lo, hi)
    }

    #[test]
    fn identity_matrix() {
        let d = matrix_dilatations(&Matrix::identity(3, 3)).unwrap();
        assert_eq!((d.norm, d.small, d.h_i, d.h_o, d.h), (1.0, 1.0, 1.0, 1.0, 1.0));
        let u = v(&[0.6, 0.8]);
        assert!((ell_f(&Matrix::identity(2, 2), &u).unwrap() - 1.0).abs() < 1e-15);
        assert!((lcal_f(&Matrix::identity(2, 2), &u) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn diagonal_matrix() {
        let a = Matrix::from_diagonal(&v(&[2.0, 0.5]));
        let d = matrix_dilatations(&a).unwrap();
        assert!((d.norm - 2.0).abs() < 1e-14);
        assert!((d.small - 0.5).abs() < 1e-14);
        assert!((d.det - 1.0).abs() < 1e-14);
        for x in [d.h_i, d.h_o, d.h] {
            assert!((x - 4.0).abs() < 1e-13);
        }
        assert_eq!(matrix_dilatations(&Matrix::zeros(2, 2)), Err(Error::SingularMatrix));
    }

    #[test]
    fn twist_matrix_dilatations() {
        let map = MapSpec::twist();
        let target = (1.0 + SQRT_2).powi(2);
        for x in [v(&[0.3, 0.4]), v(&[-2.0, 0.1]), v(&[0.01, -0.02])] {
            let (jac, _) = map.jacobian(&x).unwrap();
            let d = matrix_dilatations(&jac).unwrap();
            assert!((d.h_i - target).abs() < 1e-9 && (d.h_o - target).abs() < 1e-9);
        }
    }

    #[test]
    fn radial_stretch_directional_values() {
        let x = v(&[1.0, 0.0]);
        let o = v(&[0.0, 0.0]);
        let s = directional_sample(&MapSpec::radial(0.8).unwrap(), &x, &o).unwrap();
        assert!((s.ell - 0.8).abs() < 1e-14);
        assert!((s.lcal - 0.8).abs() < 1e-10);
        assert!((s.d - 1.25).abs() < 1e-12);
        assert!((s.t - 0.8).abs() < 1e-10);
        let s = directional_sample(&MapSpec::radial(0.5).unwrap(), &x, &o).unwrap();
        assert!((s.lcal - (1.0f64 / 3.0).sqrt()).abs() < 1e-10);
        let (j, _) = MapSpec::radial(0.5).unwrap().jacobian(&x).unwrap();
        let (_, hi) = sampled_extrema(&j, &v(&[1.0, 0.0]), 100_000);
        assert!((hi - (1.0f64 / 3.0).sqrt()).abs() < 1e-6);
    }

    #[test]
    fn ell_closed_form_matches_sampling() {
        let mats = [[1.0, 2.0, -0.5, 1.5], [3.0, 0.1, 0.2, 0.4], [0.7, -1.1, 0.9, 0.8]];
        for (k, m) in mats.iter().enumerate() {
            let a = Matrix::from_row_slice(2, 2, m);
            let phi = 0.3 + k as f64;
            let u = v(&[phi.cos(), phi.sin()]);
            let (lo, hi) = sampled_extrema(&a, &u, 100_000);
            let ell = ell_f(&a, &u).unwrap();
            assert!((ell - lo).abs() <= 1e-3 * ell);
            assert!(lcal_f(&a, &u) >= hi - 1e-12);
        }
    }

    #[test]
    fn errors() {
        let id = MapSpec::identity();
        let x = v(&[1.0, 1.0]);
        assert!(matches!(directional_sample(&id, &x, &x), Err(Error::Precondition(_))));
        let sing = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(ell_f(&sing, &v(&[1.0, 0.0])).is_err());
    }
}
