//! Shapes (rings and semirings), their exact moduli, and the registry of
//! test mappings with Jacobian evaluation.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Minimum admissible distance from an evaluation point to a map's singular set.
pub const SINGULAR_GUARD: f64 = 1e-12;

/// Volume of the unit ball in ℝⁿ.
pub fn unit_ball_volume(n: usize) -> f64 {
    // Ω₀ = 1, Ω₁ = 2, Ωₙ = (2π/n)·Ωₙ₋₂
    let mut even = 1.0;
    let mut odd = 2.0;
    for k in 2..=n {
        let next = 2.0 * PI / k as f64 * if k % 2 == 0 { even } else { odd };
        if k % 2 == 0 {
            even = next;
        } else {
            odd = next;
        }
    }
    if n.is_multiple_of(2) {
        even
    } else {
        odd
    }
}

/// Area ω_{n−1} of the unit sphere in ℝⁿ.
pub fn sphere_area(n: usize) -> f64 {
    n as f64 * unit_ball_volume(n)
}

/// Dimension-dependent geometric constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub n: usize,
    /// ω_{n−1}
    pub sphere_area: f64,
    /// Ωₙ
    pub ball_volume: f64,
}

impl Constants {
    pub fn new(n: usize) -> Self {
        Self { n, sphere_area: sphere_area(n), ball_volume: unit_ball_volume(n) }
    }
}

/// Parse a comma-separated list of floats.
pub fn parse_vector(s: &str) -> Result<Vector> {
    let coords = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad number '{t}' in vector '{s}'"))))
        .collect::<Result<Vec<_>>>()?;
    if coords.iter().any(|c| !c.is_finite()) {
        return Err(Error::Parse(format!("non-finite coordinate in '{s}'")));
    }
    Ok(Vector::from_vec(coords))
}

fn format_vector(v: &Vector) -> String {
    v.iter().map(|c| format!("{c}")).collect::<Vec<_>>().join(",")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeKind {
    Annulus,
    HalfSemiring,
    ApollonianSemiring,
}

impl ShapeKind {
    /// Semirings carry the extra factor 2 of the symmetry principle.
    pub fn is_semiring(self) -> bool {
        !matches!(self, ShapeKind::Annulus)
    }
}

/// A ring or semiring: `Annulus` is `{r₀ < |x−c| < r₁}`, `HalfSemiring` is
/// `{x ∈ ℍⁿ : r₀ ≤ |x−x₀| ≤ r₁}` with `x₀ ∈ ∂ℍⁿ`, and `ApollonianSemiring`
/// is `{x ∈ 𝔹ⁿ : r₀ ≤ |x−ξ|/|x+ξ| ≤ r₁}` with `|ξ| = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Shape {
    kind: ShapeKind,
    center: Vector,
    r0: f64,
    r1: f64,
}

impl Shape {
    fn check_radii(r0: f64, r1: f64) -> Result<()> {
        if !(r0.is_finite() && r1.is_finite()) || r0 <= 0.0 || r1 <= r0 {
            return Err(Error::InvalidShape(format!("radii must satisfy 0 < r0 < r1 < inf, got r0={r0}, r1={r1}")));
        }
        Ok(())
    }

    fn check_center(n: usize, c: &Vector) -> Result<()> {
        if n < 2 {
            return Err(Error::InvalidShape(format!("dimension must be >= 2, got {n}")));
        }
        if c.len() != n {
            return Err(Error::InvalidShape(format!("center has {} coordinates, dimension is {n}", c.len())));
        }
        if c.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidShape("center must be finite".into()));
        }
        Ok(())
    }

    pub fn annulus(n: usize, center: Vector, r0: f64, r1: f64) -> Result<Self> {
        Self::check_center(n, &center)?;
        Self::check_radii(r0, r1)?;
        Ok(Self { kind: ShapeKind::Annulus, center, r0, r1 })
    }

    /// Annulus centred at the origin.
    pub fn annulus_at_origin(n: usize, r0: f64, r1: f64) -> Result<Self> {
        Self::annulus(n, Vector::zeros(n), r0, r1)
    }

    pub fn half_semiring(n: usize, x0: Vector, r: f64, big_r: f64) -> Result<Self> {
        Self::check_center(n, &x0)?;
        Self::check_radii(r, big_r)?;
        if x0[n - 1] != 0.0 {
            return Err(Error::InvalidShape(format!(
                "semiring center must lie on the boundary hyperplane (last coordinate 0), got {}",
                x0[n - 1]
            )));
        }
        Ok(Self { kind: ShapeKind::HalfSemiring, center: x0, r0: r, r1: big_r })
    }

    /// Half semiring centred at the origin.
    pub fn half_semiring_at_origin(n: usize, r: f64, big_r: f64) -> Result<Self> {
        Self::half_semiring(n, Vector::zeros(n), r, big_r)
    }

    pub fn apollonian(n: usize, xi: Vector, r0: f64, r1: f64) -> Result<Self> {
        Self::check_center(n, &xi)?;
        Self::check_radii(r0, r1)?;
        let norm = xi.norm();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidShape(format!("pole must lie on the unit sphere, |xi| = {norm}")));
        }
        Ok(Self { kind: ShapeKind::ApollonianSemiring, center: xi / norm, r0, r1 })
    }

    pub fn kind(&self) -> ShapeKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// Center (annulus), boundary center x₀ (half semiring) or pole ξ (Apollonian).
    pub fn center(&self) -> &Vector {
        &self.center
    }

    pub fn r0(&self) -> f64 {
        self.r0
    }

    pub fn r1(&self) -> f64 {
        self.r1
    }

    /// `log(r₁/r₀)` for every kind.
    pub fn exact_modulus(&self) -> f64 {
        (self.r1 / self.r0).ln()
    }

    /// Exact modulus M(Γ) of the family of curves joining the two
    /// distinguished boundary components.
    pub fn gamma_family_modulus(&self) -> f64 {
        let n = self.dim();
        let omega = sphere_area(n);
        let factor = if self.kind.is_semiring() { 0.5 } else { 1.0 };
        factor * omega * self.exact_modulus().powf(1.0 - n as f64)
    }

    /// Membership in the closed shape, up to a relative slack `eps`.
    pub fn contains(&self, x: &Vector, eps: f64) -> bool {
        match self.kind {
            ShapeKind::Annulus | ShapeKind::HalfSemiring => {
                let r = (x - &self.center).norm();
                let radial = r >= self.r0 * (1.0 - eps) && r <= self.r1 * (1.0 + eps);
                let half = self.kind == ShapeKind::Annulus || x[self.dim() - 1] >= -eps * self.r1;
                radial && half
            }
            ShapeKind::ApollonianSemiring => {
                let q = (x - &self.center).norm() / (x + &self.center).norm();
                x.norm() <= 1.0 + eps && q >= self.r0 * (1.0 - eps) && q <= self.r1 * (1.0 + eps)
            }
        }
    }

    /// Same shape translated by `shift` (for semirings the shift must keep
    /// the center on the boundary hyperplane).
    pub fn translated(&self, shift: &Vector) -> Result<Self> {
        let c = &self.center + shift;
        match self.kind {
            ShapeKind::Annulus => Self::annulus(self.dim(), c, self.r0, self.r1),
            ShapeKind::HalfSemiring => Self::half_semiring(self.dim(), c, self.r0, self.r1),
            ShapeKind::ApollonianSemiring => {
                Err(Error::InvalidShape("Apollonian semirings are pinned to the unit ball".into()))
            }
        }
    }

    /// Same shape with both radii multiplied by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        let mut s = self.clone();
        Self::check_radii(c * self.r0, c * self.r1)?;
        s.r0 *= c;
        s.r1 *= c;
        Ok(s)
    }
}

fn parse_kv(body: &str) -> Result<Vec<(String, String)>> {
    // values of `c=`/`x0=`/`xi=` are vectors that contain commas, so keys
    // are recognised only when followed by '='
    let mut out: Vec<(String, String)> = Vec::new();
    for piece in body.split(',') {
        match piece.split_once('=') {
            Some((k, v)) => out.push((k.trim().to_string(), v.trim().to_string())),
            None => match out.last_mut() {
                Some((_, v)) => {
                    v.push(',');
                    v.push_str(piece.trim());
                }
                None => return Err(Error::Parse(format!("expected key=value in '{body}'"))),
            },
        }
    }
    Ok(out)
}

impl FromStr for Shape {
    type Err = Error;

    /// `annulus:n=2,r0=1,r1=2.718[,c=0,0]`,
    /// `semiring:n=2,r=1,R=2.718[,x0=0,0]`,
    /// `apollonian:n=2,r0=0.1,r1=1,xi=1,0`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, body) = s.split_once(':').ok_or_else(|| Error::Parse(format!("shape spec '{s}' lacks ':'")))?;
        let kv = parse_kv(body)?;
        let get = |key: &str| kv.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str());
        let num = |key: &str| -> Result<f64> {
            let v = get(key).ok_or_else(|| Error::Parse(format!("shape '{s}' is missing '{key}'")))?;
            v.parse::<f64>().map_err(|_| Error::Parse(format!("bad value '{v}' for '{key}'")))
        };
        let n: usize = get("n")
            .ok_or_else(|| Error::Parse(format!("shape '{s}' is missing 'n'")))?
            .parse()
            .map_err(|_| Error::Parse(format!("bad dimension in '{s}'")))?;
        let vec_or_zero = |key: &str| -> Result<Vector> {
            match get(key) {
                Some(v) => parse_vector(v),
                None => Ok(Vector::zeros(n)),
            }
        };
        let allowed: &[&str] = match kind.trim() {
            "annulus" => &["n", "r0", "r1", "c"],
            "semiring" => &["n", "r", "R", "x0"],
            "apollonian" => &["n", "r0", "r1", "xi"],
            other => return Err(Error::Parse(format!("unknown shape kind '{other}'"))),
        };
        if let Some((k, _)) = kv.iter().find(|(k, _)| !allowed.contains(&k.as_str())) {
            return Err(Error::Parse(format!("unknown key '{k}' in shape '{s}'")));
        }
        match kind.trim() {
            "annulus" => Shape::annulus(n, vec_or_zero("c")?, num("r0")?, num("r1")?),
            "semiring" => Shape::half_semiring(n, vec_or_zero("x0")?, num("r")?, num("R")?),
            _ => {
                let xi = get("xi").ok_or_else(|| Error::Parse(format!("shape '{s}' is missing 'xi'")))?;
                Shape::apollonian(n, parse_vector(xi)?, num("r0")?, num("r1")?)
            }
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.dim();
        let c = format_vector(&self.center);
        match self.kind {
            ShapeKind::Annulus => write!(f, "annulus:n={n},r0={},r1={},c={c}", self.r0, self.r1),
            ShapeKind::HalfSemiring => write!(f, "semiring:n={n},r={},R={},x0={c}", self.r0, self.r1),
            ShapeKind::ApollonianSemiring => {
                write!(f, "apollonian:n={n},r0={},r1={},xi={c}", self.r0, self.r1)
            }
        }
    }
}

/// Built-in mapping families.
#[derive(Debug, Clone, PartialEq)]
pub enum MapKind {
    Identity,
    /// `f(x) = |x|^{a−1} x`
    RadialStretch {
        a: f64,
    },
    /// Rotation by `θ = log(x₁²+x₂²)` in the first coordinate plane.
    RotationTwist,
    Linear(Matrix),
    /// Stages applied left to right.
    Composition(Vec<MapSpec>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum JacobianMode {
    Analytic,
    /// Central differences; `None` uses `h = 10⁻⁶·max(1,|x|)`.
    FiniteDifference {
        step: Option<f64>,
    },
}

/// A mapping of ℝⁿ with evaluation and Jacobian access.
#[derive(Debug, Clone, PartialEq)]
pub struct MapSpec {
    kind: MapKind,
    mode: JacobianMode,
}

impl MapSpec {
    pub fn new(kind: MapKind) -> Result<Self> {
        match &kind {
            MapKind::RadialStretch { a } if !(a.is_finite() && *a > 0.0) => {
                return Err(Error::InvalidMap(format!("radial stretch exponent must be > 0, got {a}")))
            }
            MapKind::Linear(m) => {
                if !m.is_square() || m.nrows() < 2 {
                    return Err(Error::InvalidMap("linear map needs a square matrix of size >= 2".into()));
                }
                let det = m.determinant();
                if det == 0.0 || !det.is_finite() {
                    return Err(Error::InvalidMap("linear map is singular".into()));
                }
            }
            MapKind::Composition(stages) if stages.is_empty() => {
                return Err(Error::InvalidMap("empty composition".into()))
            }
            _ => {}
        }
        Ok(Self { kind, mode: JacobianMode::Analytic })
    }

    pub fn identity() -> Self {
        Self { kind: MapKind::Identity, mode: JacobianMode::Analytic }
    }

    pub fn radial(a: f64) -> Result<Self> {
        Self::new(MapKind::RadialStretch { a })
    }

    pub fn twist() -> Self {
        Self { kind: MapKind::RotationTwist, mode: JacobianMode::Analytic }
    }

    pub fn linear(m: Matrix) -> Result<Self> {
        Self::new(MapKind::Linear(m))
    }

    pub fn compose(stages: Vec<MapSpec>) -> Result<Self> {
        Self::new(MapKind::Composition(stages))
    }

    pub fn with_mode(mut self, mode: JacobianMode) -> Result<Self> {
        if let JacobianMode::FiniteDifference { step: Some(h) } = mode {
            if !(h.is_finite() && h > 0.0) {
                return Err(Error::InvalidMap(format!("finite-difference step must be > 0, got {h}")));
            }
        }
        self.mode = mode;
        Ok(self)
    }

    pub fn kind(&self) -> &MapKind {
        &self.kind
    }

    pub fn mode(&self) -> JacobianMode {
        self.mode
    }

    /// Fixed dimension, if the map has one (linear maps).
    pub fn fixed_dim(&self) -> Option<usize> {
        match &self.kind {
            MapKind::Linear(m) => Some(m.nrows()),
            MapKind::Composition(stages) => stages.iter().find_map(|s| s.fixed_dim()),
            _ => None,
        }
    }

    fn check_dim(&self, x: &Vector) -> Result<()> {
        if x.len() < 2 {
            return Err(Error::InvalidMap(format!("points must have dimension >= 2, got {}", x.len())));
        }
        if let Some(d) = self.fixed_dim() {
            if d != x.len() {
                return Err(Error::InvalidMap(format!("map acts on R^{d}, point has dimension {}", x.len())));
            }
        }
        if x.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidMap("non-finite point".into()));
        }
        Ok(())
    }

    /// Distance from `x` to the singular set of the map (∞ when there is none).
    pub fn singular_distance(&self, x: &Vector) -> f64 {
        match &self.kind {
            MapKind::Identity | MapKind::Linear(_) => f64::INFINITY,
            MapKind::RadialStretch { a } if *a == 1.0 => f64::INFINITY,
            MapKind::RadialStretch { .. } => x.norm(),
            MapKind::RotationTwist => x[0].hypot(x[1]),
            MapKind::Composition(stages) => {
                let mut y = x.clone();
                let mut d = f64::INFINITY;
                for s in stages {
                    d = d.min(s.singular_distance(&y));
                    if d < SINGULAR_GUARD {
                        return d;
                    }
                    match s.eval(&y) {
                        Ok(z) => y = z,
                        Err(_) => return 0.0,
                    }
                }
                d
            }
        }
    }

    fn guard(&self, x: &Vector) -> Result<()> {
        self.check_dim(x)?;
        let d = self.singular_distance(x);
        if d < SINGULAR_GUARD {
            return Err(Error::Domain { point: x.iter().copied().collect(), distance: d });
        }
        Ok(())
    }

    pub fn eval(&self, x: &Vector) -> Result<Vector> {
        self.check_dim(x)?;
        match &self.kind {
            MapKind::Identity => Ok(x.clone()),
            MapKind::Linear(m) => Ok(m * x),
            MapKind::RadialStretch { a } => {
                self.guard(x)?;
                Ok(x * x.norm().powf(a - 1.0))
            }
            MapKind::RotationTwist => {
                self.guard(x)?;
                let theta = (x[0] * x[0] + x[1] * x[1]).ln();
                let (s, c) = theta.sin_cos();
                let mut y = x.clone();
                y[0] = x[0] * c - x[1] * s;
                y[1] = x[1] * c + x[0] * s;
                Ok(y)
            }
            MapKind::Composition(stages) => {
                let mut y = x.clone();
                for s in stages {
                    y = s.eval(&y)?;
                }
                Ok(y)
            }
        }
    }

    /// Jacobian matrix and determinant at `x`.
    pub fn jacobian(&self, x: &Vector) -> Result<(Matrix, f64)> {
        self.guard(x)?;
        let jac = match self.mode {
            JacobianMode::Analytic => self.analytic_jacobian(x)?,
            JacobianMode::FiniteDifference { step } => {
                let h = step.unwrap_or(1e-6 * x.norm().max(1.0));
                self.fd_jacobian(x, h)?
            }
        };
        let det = jac.determinant();
        Ok((jac, det))
    }

    fn analytic_jacobian(&self, x: &Vector) -> Result<Matrix> {
        let n = x.len();
        match &self.kind {
            MapKind::Identity => Ok(Matrix::identity(n, n)),
            MapKind::Linear(m) => Ok(m.clone()),
            MapKind::RadialStretch { a } => {
                // |x|^{a−1} (I + (a−1) x xᵀ/|x|²)
                let r = x.norm();
                let scale = r.powf(a - 1.0);
                let mut j = x * x.transpose() * ((a - 1.0) / (r * r));
                for i in 0..n {
                    j[(i, i)] += 1.0;
                }
                Ok(j * scale)
            }
            MapKind::RotationTwist => {
                // R(θ) on the first plane plus (−f₂, f₁)ᵀ ∇θ with ∇θ = 2(x₁,x₂)/(x₁²+x₂²)
                let rho2 = x[0] * x[0] + x[1] * x[1];
                let (s, c) = rho2.ln().sin_cos();
                let f1 = x[0] * c - x[1] * s;
                let f2 = x[1] * c + x[0] * s;
                let g = [2.0 * x[0] / rho2, 2.0 * x[1] / rho2];
                let mut j = Matrix::identity(n, n);
                j[(0, 0)] = c - f2 * g[0];
                j[(0, 1)] = -s - f2 * g[1];
                j[(1, 0)] = s + f1 * g[0];
                j[(1, 1)] = c + f1 * g[1];
                Ok(j)
            }
            MapKind::Composition(stages) => {
                let mut y = x.clone();
                let mut j = Matrix::identity(n, n);
                for st in stages {
                    let (js, _) = st.jacobian(&y)?;
                    j = js * j;
                    y = st.eval(&y)?;
                }
                Ok(j)
            }
        }
    }

    fn fd_jacobian(&self, x: &Vector, h: f64) -> Result<Matrix> {
        let n = x.len();
        let mut j = Matrix::zeros(n, n);
        for k in 0..n {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[k] += h;
            xm[k] -= h;
            let d = (self.eval(&xp)? - self.eval(&xm)?) / (2.0 * h);
            j.set_column(k, &d);
        }
        Ok(j)
    }
}

impl FromStr for MapSpec {
    type Err = Error;

    /// `identity`, `radial:a=<f>`, `twist`, `linear:<n² floats row-major>`,
    /// `compose:<spec>;<spec>;...`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (head, body) = match s.split_once(':') {
            Some((h, b)) => (h.trim(), Some(b)),
            None => (s, None),
        };
        match (head, body) {
            ("identity", None) => Ok(MapSpec::identity()),
            ("twist", None) => Ok(MapSpec::twist()),
            ("radial", Some(b)) => {
                let v = b
                    .trim()
                    .strip_prefix("a=")
                    .ok_or_else(|| Error::Parse(format!("expected 'radial:a=<float>', got '{s}'")))?;
                let a = v.parse::<f64>().map_err(|_| Error::Parse(format!("bad exponent '{v}'")))?;
                MapSpec::radial(a)
            }
            ("linear", Some(b)) => {
                let v = parse_vector(b)?;
                let n = (v.len() as f64).sqrt().round() as usize;
                if n * n != v.len() {
                    return Err(Error::Parse(format!("linear map needs n² entries, got {}", v.len())));
                }
                MapSpec::linear(Matrix::from_row_slice(n, n, v.as_slice()))
            }
            ("compose", Some(b)) => {
                let stages = b.split(';').map(str::parse).collect::<Result<Vec<MapSpec>>>()?;
                MapSpec::compose(stages)
            }
            _ => Err(Error::Parse(format!("unknown map spec '{s}'"))),
        }
    }
}

impl fmt::Display for MapSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            MapKind::Identity => write!(f, "identity"),
            MapKind::RadialStretch { a } => write!(f, "radial:a={a}"),
            MapKind::RotationTwist => write!(f, "twist"),
            MapKind::Linear(m) => {
                let entries: Vec<String> = (0..m.nrows())
                    .flat_map(|i| (0..m.ncols()).map(move |j| (i, j)))
                    .map(|(i, j)| format!("{}", m[(i, j)]))
                    .collect();
                write!(f, "linear:{}", entries.join(","))
            }
            MapKind::Composition(stages) => {
                let parts: Vec<String> = stages.iter().map(|s| s.to_string()).collect();
                write!(f, "compose:{}", parts.join(";"))
            }
        }
    }
}
