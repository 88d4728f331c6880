//! Discrete modulus of connecting curve families on structured grid graphs.
//!
//! Densities live on nodes and carry the energy `Σ vol_v ρ_vᵖ`. The ρ-length
//! of an edge is its Euclidean length times the trapezoid average of ρ
//! sampled along the edge, with multilinear interpolation between lattice
//! nodes. Long-range lattice offsets let shortest paths follow directions
//! that are not aligned with the grid.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, HashSet};
use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{sphere_area, MapSpec, Matrix, Shape, ShapeKind, Vector};
use crate::par;

/// Grid size: radial nodes × angular nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Resolution {
    pub radial: usize,
    pub angular: usize,
}

impl Resolution {
    pub fn new(radial: usize, angular: usize) -> Self {
        Self { radial, angular }
    }
}

impl FromStr for Resolution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (a, b) =
            s.split_once(['x', 'X']).ok_or_else(|| Error::Parse(format!("grid must look like <R>x<A>, got {s:?}")))?;
        let parse = |t: &str| t.trim().parse::<usize>().map_err(|e| Error::Parse(format!("grid {s:?}: {e}")));
        Ok(Self { radial: parse(a)?, angular: parse(b)? })
    }
}

impl fmt::Display for Resolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.radial, self.angular)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct GridOptions {
    /// Largest max-norm of a lattice offset used as an edge; 0 picks a
    /// dimension-dependent default.
    pub stencil: usize,
}

impl GridOptions {
    fn stencil_for(&self, n: usize) -> usize {
        match (self.stencil, n) {
            (0, 2) => 4,
            (0, _) => 1,
            (k, _) => k,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub tail: u32,
    pub head: u32,
    pub length: f64,
    offset: u16,
}

#[derive(Debug, Clone, PartialEq)]
struct Lattice {
    dims: Vec<usize>,
    periodic: Vec<bool>,
    offsets: Vec<Vec<i64>>,
}

impl Lattice {
    fn index(&self, m: &[i64]) -> usize {
        m.iter().zip(&self.dims).fold(0, |acc, (&c, &d)| acc * d + c as usize)
    }

    fn multi(&self, mut idx: usize, out: &mut [i64]) {
        for k in (0..self.dims.len()).rev() {
            out[k] = (idx % self.dims[k]) as i64;
            idx /= self.dims[k];
        }
    }

    /// Neighbor of `m` at offset `o`, wrapping periodic axes.
    fn step(&self, m: &[i64], o: &[i64]) -> Option<Vec<i64>> {
        let mut out = Vec::with_capacity(m.len());
        for k in 0..m.len() {
            let d = self.dims[k] as i64;
            let c = m[k] + o[k];
            if self.periodic[k] {
                out.push(c.rem_euclid(d));
            } else if c < 0 || c >= d {
                return None;
            } else {
                out.push(c);
            }
        }
        Some(out)
    }

    /// Calls `f(node, weight)` for the trapezoid-and-interpolation weights of
    /// an edge leaving `m` along `o`; the weights sum to one.
    fn for_each_sample(&self, m: &[i64], o: &[i64], mut f: impl FnMut(usize, f64)) {
        let k = o.iter().map(|c| c.abs()).max().unwrap_or(1).max(1);
        let d = m.len();
        let mut base = vec![0i64; d];
        let mut frac = vec![0.0f64; d];
        let mut corner = vec![0i64; d];
        for q in 0..=k {
            let tw = if q == 0 || q == k { 0.5 } else { 1.0 } / k as f64;
            let mut fractional = Vec::with_capacity(d);
            for a in 0..d {
                let num = m[a] * k + q * o[a];
                base[a] = num.div_euclid(k);
                let rem = num.rem_euclid(k);
                frac[a] = rem as f64 / k as f64;
                if rem != 0 {
                    fractional.push(a);
                }
            }
            for mask in 0..(1usize << fractional.len()) {
                let mut w = tw;
                corner.copy_from_slice(&base);
                for (bit, &a) in fractional.iter().enumerate() {
                    if mask >> bit & 1 == 1 {
                        corner[a] += 1;
                        w *= frac[a];
                    } else {
                        w *= 1.0 - frac[a];
                    }
                }
                for a in 0..d {
                    if self.periodic[a] {
                        corner[a] = corner[a].rem_euclid(self.dims[a] as i64);
                    }
                }
                f(self.index(&corner), w);
            }
        }
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// Primitive lattice vectors of max-norm at most `k` whose first nonzero
/// coordinate is positive.
fn primitive_offsets(d: usize, k: usize) -> Vec<Vec<i64>> {
    let k = k as i64;
    let side = (2 * k + 1) as usize;
    let mut out = Vec::new();
    for code in 0..side.pow(d as u32) {
        let mut c = code;
        let v: Vec<i64> = (0..d)
            .map(|_| {
                let x = (c % side) as i64 - k;
                c /= side;
                x
            })
            .collect();
        let first = v.iter().find(|&&x| x != 0);
        if first.is_none_or(|&x| x < 0) {
            continue;
        }
        if v.iter().fold(0, |g, &x| gcd(g, x)) == 1 {
            out.push(v);
        }
    }
    out.sort_by_key(|v| (v.iter().map(|x| x.abs()).max(), v.clone()));
    out
}

/// Weighted graph with node densities, marked source and sink sets.
#[derive(Debug, Clone, PartialEq)]
pub struct GridGraph {
    dim: usize,
    p: f64,
    semiring: bool,
    resolution: Option<Resolution>,
    nodes: Vec<Vector>,
    volumes: Vec<f64>,
    edges: Vec<Edge>,
    sources: Vec<u32>,
    sinks: Vec<u32>,
    lattice: Option<Lattice>,
}

impl GridGraph {
    /// Graph from explicit parts. Edges average ρ over their two ends; a
    /// node's volume defaults to half the total length of its edges.
    pub fn from_parts(
        nodes: Vec<Vector>,
        edges: Vec<(usize, usize)>,
        sources: Vec<usize>,
        sinks: Vec<usize>,
        p: f64,
    ) -> Result<Self> {
        let dim = nodes.first().map(|v| v.len()).unwrap_or(0);
        let mut volumes = vec![0.0; nodes.len()];
        let mut list = Vec::with_capacity(edges.len());
        for &(a, b) in &edges {
            if a >= nodes.len() || b >= nodes.len() {
                return Err(Error::Graph(format!("edge ({a}, {b}) refers to a missing node")));
            }
            let length = (&nodes[a] - &nodes[b]).norm();
            volumes[a] += 0.5 * length;
            volumes[b] += 0.5 * length;
            list.push(Edge { tail: a as u32, head: b as u32, length, offset: 0 });
        }
        let g = Self {
            dim,
            p,
            semiring: false,
            resolution: None,
            nodes,
            volumes,
            edges: list,
            sources: sources.into_iter().map(|v| v as u32).collect(),
            sinks: sinks.into_iter().map(|v| v as u32).collect(),
            lattice: None,
        };
        g.validate()?;
        Ok(g)
    }

    fn validate(&self) -> Result<()> {
        if !(self.p > 1.0) {
            return Err(Error::Graph(format!("modulus exponent must exceed 1, got {}", self.p)));
        }
        if self.sources.is_empty() || self.sinks.is_empty() {
            return Err(Error::Graph("source and sink sets must be nonempty".into()));
        }
        let src: HashSet<u32> = self.sources.iter().copied().collect();
        if self.sinks.iter().any(|t| src.contains(t)) {
            return Err(Error::Graph("source and sink sets must be disjoint".into()));
        }
        if let Some(e) = self.edges.iter().find(|e| !(e.length > 0.0 && e.length.is_finite())) {
            return Err(Error::Graph(format!("edge ({}, {}) has length {}", e.tail, e.head, e.length)));
        }
        if let Some(v) = self.volumes.iter().position(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::Graph(format!("node {v} has volume {}", self.volumes[v])));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn with_p(mut self, p: f64) -> Result<Self> {
        self.p = p;
        self.validate()?;
        Ok(self)
    }

    pub fn is_semiring(&self) -> bool {
        self.semiring
    }

    pub fn resolution(&self) -> Option<Resolution> {
        self.resolution
    }

    pub fn nodes(&self) -> &[Vector] {
        &self.nodes
    }

    pub fn volumes(&self) -> &[f64] {
        &self.volumes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn sources(&self) -> &[u32] {
        &self.sources
    }

    pub fn sinks(&self) -> &[u32] {
        &self.sinks
    }

    fn for_each_coeff(&self, e: &Edge, mut f: impl FnMut(usize, f64)) {
        match &self.lattice {
            None => {
                f(e.tail as usize, 0.5);
                f(e.head as usize, 0.5);
            }
            Some(lat) => {
                let mut m = vec![0i64; lat.dims.len()];
                lat.multi(e.tail as usize, &mut m);
                lat.for_each_sample(&m, &lat.offsets[e.offset as usize], f);
            }
        }
    }

    /// Mean density along an edge.
    pub fn edge_density(&self, e: &Edge, rho: &[f64]) -> f64 {
        let mut acc = 0.0;
        self.for_each_coeff(e, |v, w| acc += w * rho[v]);
        acc
    }

    /// ρ-length of every edge.
    pub fn edge_weights(&self, rho: &[f64]) -> Vec<f64> {
        par::map(&self.edges, |e| e.length * self.edge_density(e, rho))
    }

    pub fn energy(&self, rho: &[f64]) -> f64 {
        par::sum_range(rho.len(), |v| self.volumes[v] * rho[v].powf(self.p))
    }

    /// Pushes every node through `map`: chords become edge lengths and node
    /// volumes are scaled by `|det f′|`.
    pub fn image(&self, map: &MapSpec) -> Result<Self> {
        let pushed = par::try_map_range(self.nodes.len(), |v| {
            let x = &self.nodes[v];
            let y = map.eval(x)?;
            let (_, det) = map.jacobian(x)?;
            if det == 0.0 || !det.is_finite() {
                return Err(Error::IrregularPoint(x.iter().copied().collect()));
            }
            Ok((y, det.abs()))
        })?;
        let mut g = self.clone();
        for (v, (y, j)) in pushed.into_iter().enumerate() {
            g.nodes[v] = y;
            g.volumes[v] *= j;
        }
        for e in &mut g.edges {
            e.length = (&g.nodes[e.tail as usize] - &g.nodes[e.head as usize]).norm();
        }
        g.validate()?;
        Ok(g)
    }

    /// Coordinate lines from each source straight out to the sinks.
    fn radial_lines(&self) -> Option<Vec<Vec<u32>>> {
        let lat = self.lattice.as_ref()?;
        let mut unit = vec![0i64; lat.dims.len()];
        unit[0] = 1;
        let oi = lat.offsets.iter().position(|o| *o == unit)? as u16;
        let by_tail: std::collections::HashMap<u32, u32> =
            self.edges.iter().enumerate().filter(|(_, e)| e.offset == oi).map(|(id, e)| (e.tail, id as u32)).collect();
        let lines = self
            .sources
            .iter()
            .map(|&s| {
                let mut path = Vec::with_capacity(lat.dims[0] - 1);
                let mut v = s;
                while let Some(&e) = by_tail.get(&v) {
                    path.push(e);
                    v = self.edges[e as usize].head;
                }
                path
            })
            .collect();
        Some(lines)
    }

    fn adjacency(&self) -> (Vec<usize>, Vec<(u32, u32)>) {
        let n = self.nodes.len();
        let mut deg = vec![0usize; n + 1];
        for e in &self.edges {
            deg[e.tail as usize + 1] += 1;
            deg[e.head as usize + 1] += 1;
        }
        for v in 0..n {
            deg[v + 1] += deg[v];
        }
        let mut fill = deg.clone();
        let mut adj = vec![(0u32, 0u32); 2 * self.edges.len()];
        for (id, e) in self.edges.iter().enumerate() {
            adj[fill[e.tail as usize]] = (e.head, id as u32);
            fill[e.tail as usize] += 1;
            adj[fill[e.head as usize]] = (e.tail, id as u32);
            fill[e.head as usize] += 1;
        }
        (deg, adj)
    }
}

/// Exact `∫ r^{n−1} dr` over `[a, b]`.
fn radial_measure(n: usize, a: f64, b: f64) -> f64 {
    (b.powi(n as i32) - a.powi(n as i32)) / n as f64
}

/// Householder-type orthogonal matrix taking `eₙ` to the unit vector `xi`.
fn frame_to(xi: &Vector) -> Matrix {
    let n = xi.len();
    let mut en = Vector::zeros(n);
    en[n - 1] = 1.0;
    let v = &en - xi;
    let vn = v.norm_squared();
    if vn < 1e-30 {
        return Matrix::identity(n, n);
    }
    Matrix::identity(n, n) - (&v * v.transpose()) * (2.0 / vn)
}

/// Builds the grid graph of a shape. Radial nodes are log-uniform and
/// include both boundary spheres; sources sit on the inner sphere and sinks
/// on the outer one.
pub fn build_grid(shape: &Shape, res: Resolution, opts: &GridOptions) -> Result<GridGraph> {
    let n = shape.dim();
    if res.radial < 8 || res.angular < 8 {
        return Err(Error::Precondition(format!("grid {res} is too coarse; both counts must be >= 8")));
    }
    if n > 3 {
        return Err(Error::InvalidShape(format!("grid graphs are available for n = 2, 3, got n = {n}")));
    }
    let half = shape.kind().is_semiring();
    let (r0, r1) = (shape.r0(), shape.r1());
    let nr = res.radial;
    let ratio = (r1 / r0).ln();
    let radii: Vec<f64> = (0..nr).map(|i| r0 * (ratio * i as f64 / (nr - 1) as f64).exp()).collect();
    let rbounds: Vec<(f64, f64)> = (0..nr)
        .map(|i| {
            let lo = if i == 0 { r0 } else { (radii[i - 1] * radii[i]).sqrt() };
            let hi = if i + 1 == nr { r1 } else { (radii[i] * radii[i + 1]).sqrt() };
            (lo, hi)
        })
        .collect();

    // unit directions and their angular measures in the canonical frame (up = eₙ)
    let (dims, periodic, dirs, angular_measure): (Vec<usize>, Vec<bool>, Vec<Vector>, Vec<f64>) = if n == 2 {
        let a = res.angular;
        if half {
            let step = PI / (a - 1) as f64;
            let dirs =
                (0..a).map(|j| (step * j as f64, j)).map(|(phi, _)| Vector::from_vec(vec![phi.cos(), phi.sin()]));
            let meas = (0..a).map(|j| if j == 0 || j + 1 == a { step / 2.0 } else { step });
            (vec![nr, a], vec![false, false], dirs.collect(), meas.collect())
        } else {
            let step = 2.0 * PI / a as f64;
            let dirs = (0..a).map(|j| step * j as f64).map(|phi| Vector::from_vec(vec![phi.cos(), phi.sin()]));
            (vec![nr, a], vec![false, true], dirs.collect(), vec![step; a])
        }
    } else {
        let az = res.angular;
        let (polar, top) = if half { ((az / 4).max(4), PI / 2.0) } else { ((az / 2).max(4), PI) };
        let dt = top / polar as f64;
        let dp = 2.0 * PI / az as f64;
        let mut dirs = Vec::with_capacity(polar * az);
        let mut meas = Vec::with_capacity(polar * az);
        for j in 0..polar {
            let theta = dt * (j as f64 + 0.5);
            let band = (dt * j as f64).cos() - (dt * (j + 1) as f64).cos();
            for k in 0..az {
                let phi = dp * k as f64;
                dirs.push(Vector::from_vec(vec![theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()]));
                meas.push(band * dp);
            }
        }
        (vec![nr, polar, az], vec![false, false, true], dirs, meas)
    };

    let per_shell = dirs.len();
    let mut nodes = Vec::with_capacity(nr * per_shell);
    let mut volumes = Vec::with_capacity(nr * per_shell);
    let frame = match shape.kind() {
        ShapeKind::ApollonianSemiring => Some(frame_to(shape.center())),
        _ => None,
    };
    for i in 0..nr {
        let rv = radial_measure(n, rbounds[i].0, rbounds[i].1);
        for (d, m) in dirs.iter().zip(&angular_measure) {
            let w = d * radii[i];
            let vol = rv * m;
            match (&frame, shape.kind()) {
                (Some(q), _) => {
                    // x = 2(w + ξ)/|w + ξ|² − ξ maps {w·ξ ≥ 0} onto the ball and
                    // |w| = c onto |x − ξ|/|x + ξ| = c
                    let xi = shape.center();
                    let wp = q * &w + xi;
                    let s = wp.norm_squared();
                    nodes.push(&wp * (2.0 / s) - xi);
                    volumes.push(vol * (2.0 / s).powi(n as i32));
                }
                _ => {
                    nodes.push(shape.center() + &w);
                    volumes.push(vol);
                }
            }
        }
    }

    let offsets = primitive_offsets(dims.len(), opts.stencil_for(n));
    let lattice = Lattice { dims, periodic, offsets };
    let total = nodes.len();
    let mut edges = Vec::new();
    let mut m = vec![0i64; lattice.dims.len()];
    for v in 0..total {
        lattice.multi(v, &mut m);
        for (oi, o) in lattice.offsets.iter().enumerate() {
            if let Some(t) = lattice.step(&m, o) {
                let head = lattice.index(&t);
                if head == v {
                    continue;
                }
                let length = (&nodes[v] - &nodes[head]).norm();
                edges.push(Edge { tail: v as u32, head: head as u32, length, offset: oi as u16 });
            }
        }
    }
    let sources = (0..per_shell as u32).collect();
    let sinks = ((total - per_shell) as u32..total as u32).collect();
    let g = GridGraph {
        dim: n,
        p: n as f64,
        semiring: half,
        resolution: Some(res),
        nodes,
        volumes,
        edges,
        sources,
        sinks,
        lattice: Some(lattice),
    };
    g.validate()?;
    Ok(g)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Admissibility tolerance: stop once every path has ρ-length ≥ 1 − tol.
    pub tol: f64,
    pub max_paths: usize,
    pub max_rounds: usize,
    /// Coordinate-ascent sweeps per round.
    pub sweeps: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-3, max_paths: 10_000, max_rounds: 2_000, sweeps: 400 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModulusEstimate {
    /// Energy of the admissible density, an upper bound for the discrete modulus.
    pub m_gamma: f64,
    /// Dual objective, a lower bound for the discrete modulus.
    pub lower: f64,
    pub mo: f64,
    pub iterations: usize,
    pub paths: usize,
    /// `max(0, 1 − L)` for the shortest ρ-length `L` before rescaling.
    pub duality_gap: f64,
    pub shortest: f64,
    pub resolution: Option<Resolution>,
    /// Admissible node density.
    #[serde(skip)]
    pub rho: Vec<f64>,
}

#[derive(Clone, Copy, PartialEq)]
struct State(f64, u32);

impl Eq for State {}

impl Ord for State {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for State {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Multi-source Dijkstra; returns distances and the edge used to reach each node.
fn dijkstra(g: &GridGraph, adj: &(Vec<usize>, Vec<(u32, u32)>), w: &[f64]) -> (Vec<f64>, Vec<u32>) {
    let n = g.nodes.len();
    let mut dist = vec![f64::INFINITY; n];
    let mut pred = vec![u32::MAX; n];
    let mut heap = BinaryHeap::new();
    for &s in &g.sources {
        dist[s as usize] = 0.0;
        heap.push(State(0.0, s));
    }
    let (start, list) = adj;
    while let Some(State(d, v)) = heap.pop() {
        let v = v as usize;
        if d > dist[v] {
            continue;
        }
        for &(u, e) in &list[start[v]..start[v + 1]] {
            let nd = d + w[e as usize];
            if nd < dist[u as usize] {
                dist[u as usize] = nd;
                pred[u as usize] = e;
                heap.push(State(nd, u));
            }
        }
    }
    (dist, pred)
}

fn trace(g: &GridGraph, pred: &[u32], sink: u32) -> Vec<u32> {
    let mut out = Vec::new();
    let mut v = sink;
    while pred[v as usize] != u32::MAX {
        let e = pred[v as usize];
        out.push(e);
        let edge = &g.edges[e as usize];
        v = if edge.head == v { edge.tail } else { edge.head };
    }
    out.reverse();
    out
}

struct Path {
    support: Vec<(u32, f64)>,
    lambda: f64,
}

struct Dual<'a> {
    g: &'a GridGraph,
    s: Vec<f64>,
    rho: Vec<f64>,
    paths: Vec<Path>,
    q: f64,
}

impl<'a> Dual<'a> {
    fn new(g: &'a GridGraph) -> Self {
        let n = g.nodes.len();
        Self { g, s: vec![0.0; n], rho: vec![0.0; n], paths: Vec::new(), q: 1.0 / (g.p - 1.0) }
    }

    fn density(&self, v: usize, s: f64) -> f64 {
        let base = s.max(0.0) / (self.g.p * self.g.volumes[v]);
        if self.q == 1.0 {
            base
        } else {
            base.powf(self.q)
        }
    }

    fn push_path(&mut self, edges: &[u32]) {
        let mut acc: BTreeMap<u32, f64> = BTreeMap::new();
        for &e in edges {
            let edge = &self.g.edges[e as usize];
            self.g.for_each_coeff(edge, |v, w| *acc.entry(v as u32).or_insert(0.0) += w * edge.length);
        }
        self.paths.push(Path { support: acc.into_iter().collect(), lambda: 0.0 });
    }

    fn length_at(&self, support: &[(u32, f64)], delta: f64) -> (f64, f64) {
        let mut len = 0.0;
        let mut slope = 0.0;
        for &(v, a) in support {
            let v = v as usize;
            let s = self.s[v] + delta * a;
            let c = self.g.p * self.g.volumes[v];
            let r = self.density(v, s);
            len += a * r;
            if s > 0.0 {
                slope += self.q * a * a * r / s;
            } else if self.q <= 1.0 {
                slope += if self.q == 1.0 { a * a / c } else { f64::INFINITY };
            }
        }
        (len, slope)
    }

    /// Exact maximization of the dual along one path's multiplier.
    fn update(&mut self, k: usize) -> f64 {
        let lambda = self.paths[k].lambda;
        let support = std::mem::take(&mut self.paths[k].support);
        let (len0, slope0) = self.length_at(&support, 0.0);
        let violation = if lambda > 0.0 { (len0 - 1.0).abs() } else { (1.0 - len0).max(0.0) };
        if violation == 0.0 || (lambda == 0.0 && len0 >= 1.0) {
            self.paths[k].support = support;
            return violation;
        }
        let delta = if self.q == 1.0 {
            ((1.0 - len0) / slope0).max(-lambda)
        } else {
            let (mut lo, mut hi) = if len0 < 1.0 { (0.0, f64::NAN) } else { (-lambda, 0.0) };
            if len0 < 1.0 {
                let mut step = if slope0.is_finite() && slope0 > 0.0 { (1.0 - len0) / slope0 } else { 1.0 };
                loop {
                    if self.length_at(&support, step).0 >= 1.0 {
                        hi = step;
                        break;
                    }
                    lo = step;
                    step *= 2.0;
                }
            } else if self.length_at(&support, -lambda).0 >= 1.0 {
                lo = -lambda;
                hi = -lambda;
            }
            let mut x = 0.5 * (lo + hi);
            for _ in 0..100 {
                if hi - lo <= 1e-15 * hi.abs().max(lambda).max(1e-300) {
                    break;
                }
                let (l, d) = self.length_at(&support, x);
                if l < 1.0 {
                    lo = x;
                } else {
                    hi = x;
                }
                let newton = x - (l - 1.0) / d;
                x = if d.is_finite() && d > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
            }
            x
        };
        for &(v, a) in &support {
            let v = v as usize;
            self.s[v] += delta * a;
            self.rho[v] = self.density(v, self.s[v]);
        }
        self.paths[k].lambda = (lambda + delta).max(0.0);
        self.paths[k].support = support;
        violation
    }

    fn sweep(&mut self, rounds: usize, tol: f64) {
        for _ in 0..rounds {
            let mut worst: f64 = 0.0;
            for k in 0..self.paths.len() {
                worst = worst.max(self.update(k));
            }
            if worst <= tol {
                break;
            }
        }
    }

    fn dual_value(&self) -> f64 {
        let lam: f64 = self.paths.iter().map(|p| p.lambda).sum();
        lam - (self.g.p - 1.0) * self.g.energy(&self.rho)
    }
}

/// Discrete modulus of the source–sink path family by constraint generation.
pub fn modulus_connect(g: &GridGraph, opts: &SolverOptions) -> Result<ModulusEstimate> {
    if !(opts.tol > 0.0 && opts.tol < 1.0) {
        return Err(Error::Precondition(format!("solver tolerance must lie in (0, 1), got {}", opts.tol)));
    }
    let adj = g.adjacency();
    let mut dual = Dual::new(g);
    let mut seen: HashSet<Vec<u32>> = HashSet::new();
    let unit: Vec<f64> = g.edges.iter().map(|e| e.length).collect();
    let (dist, pred) = dijkstra(g, &adj, &unit);
    if g.sinks.iter().all(|&t| !dist[t as usize].is_finite()) {
        return Err(Error::Graph("no sink is reachable from the sources".into()));
    }
    let seeds = match g.radial_lines() {
        Some(lines) => lines,
        None => g.sinks.iter().filter(|&&t| dist[t as usize].is_finite()).map(|&t| trace(g, &pred, t)).collect(),
    };
    for p in seeds {
        if seen.insert(p.clone()) {
            dual.push_path(&p);
        }
    }
    let inner = 0.1 * opts.tol;
    let mut stalls = 0;
    for round in 1..=opts.max_rounds {
        dual.sweep(opts.sweeps, inner);
        let w = g.edge_weights(&dual.rho);
        let (dist, pred) = dijkstra(g, &adj, &w);
        let shortest = g.sinks.iter().map(|&t| dist[t as usize]).fold(f64::INFINITY, f64::min);
        if shortest >= 1.0 - opts.tol {
            return Ok(finish(g, &dual, shortest, round));
        }
        let mut added = 0;
        for &t in &g.sinks {
            if dist[t as usize] < 1.0 - opts.tol {
                let p = trace(g, &pred, t);
                if seen.insert(p.clone()) {
                    dual.push_path(&p);
                    added += 1;
                }
            }
        }
        stalls = if added == 0 { stalls + 1 } else { 0 };
        if dual.paths.len() > opts.max_paths || stalls > 50 {
            let est = finish(g, &dual, shortest, round);
            return Err(Error::Convergence { paths: dual.paths.len(), lower: est.lower, upper: est.m_gamma });
        }
    }
    let w = g.edge_weights(&dual.rho);
    let (dist, _) = dijkstra(g, &adj, &w);
    let shortest = g.sinks.iter().map(|&t| dist[t as usize]).fold(f64::INFINITY, f64::min);
    let est = finish(g, &dual, shortest, opts.max_rounds);
    Err(Error::Convergence { paths: dual.paths.len(), lower: est.lower, upper: est.m_gamma })
}

fn finish(g: &GridGraph, dual: &Dual<'_>, shortest: f64, rounds: usize) -> ModulusEstimate {
    let scale = if shortest > 0.0 { 1.0 / shortest } else { f64::INFINITY };
    let rho: Vec<f64> = dual.rho.iter().map(|r| r * scale).collect();
    let m_gamma = g.energy(&rho);
    ModulusEstimate {
        m_gamma,
        lower: dual.dual_value(),
        mo: mo_from_gamma(m_gamma, g.semiring, g.dim).unwrap_or(f64::NAN),
        iterations: rounds,
        paths: dual.paths.len(),
        duality_gap: (1.0 - shortest).max(0.0),
        shortest,
        resolution: g.resolution,
        rho,
    }
}

/// Shortest ρ-length between the sources and the sinks.
pub fn shortest_length(g: &GridGraph, rho: &[f64]) -> f64 {
    let adj = g.adjacency();
    let (dist, _) = dijkstra(g, &adj, &g.edge_weights(rho));
    g.sinks.iter().map(|&t| dist[t as usize]).fold(f64::INFINITY, f64::min)
}

/// Separating-family modulus through `M(Σ) = M(Γ)^{1/(1−n)}`.
pub fn modulus_separate(g: &GridGraph, opts: &SolverOptions) -> Result<f64> {
    let est = modulus_connect(g, opts)?;
    Ok(separate_from_gamma(est.m_gamma, g.dim))
}

pub fn separate_from_gamma(m_gamma: f64, n: usize) -> f64 {
    m_gamma.powf(1.0 / (1.0 - n as f64))
}

/// `mo = (ω_{n−1}/M)^{1/(n−1)}` for rings and `(ω_{n−1}/(2M))^{1/(n−1)}` for semirings.
pub fn mo_from_gamma(m_gamma: f64, semiring: bool, n: usize) -> Result<f64> {
    if !(m_gamma > 0.0 && m_gamma.is_finite()) {
        return Err(Error::Precondition(format!("curve family modulus must be positive, got {m_gamma}")));
    }
    if n < 2 {
        return Err(Error::OutOfRange(format!("dimension must be >= 2, got {n}")));
    }
    let w = sphere_area(n);
    let m = if semiring { 2.0 * m_gamma } else { m_gamma };
    Ok((w / m).powf(1.0 / (n as f64 - 1.0)))
}

pub fn shape_modulus(
    shape: &Shape,
    res: Resolution,
    grid: &GridOptions,
    opts: &SolverOptions,
) -> Result<ModulusEstimate> {
    modulus_connect(&build_grid(shape, res, grid)?, opts)
}

/// Modulus of `f(shape)` from the pushed-forward grid of `shape`.
pub fn image_modulus(
    map: &MapSpec,
    shape: &Shape,
    res: Resolution,
    grid: &GridOptions,
    opts: &SolverOptions,
) -> Result<ModulusEstimate> {
    if let Some(d) = map.fixed_dim() {
        if d != shape.dim() {
            return Err(Error::InvalidMap(format!("map acts on R^{d}, shape lives in R^{}", shape.dim())));
        }
    }
    let g = build_grid(shape, res, grid)?;
    modulus_connect(&g.image(map)?, opts)
}

/// Writes one CSV row per edge: tail coordinates, head coordinates, mean
/// density and length.
pub fn write_density_csv<W: Write>(out: &mut W, g: &GridGraph, rho: &[f64]) -> std::io::Result<()> {
    let n = g.dim;
    let mut header: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
    header.extend((1..=n).map(|i| format!("x{i}'")));
    header.push("rho".into());
    header.push("length".into());
    writeln!(out, "{}", header.join(","))?;
    for e in &g.edges {
        let mut row: Vec<String> = g.nodes[e.tail as usize].iter().map(|c| c.to_string()).collect();
        row.extend(g.nodes[e.head as usize].iter().map(|c| c.to_string()));
        row.push(g.edge_density(e, rho).to_string());
        row.push(e.length.to_string());
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e() -> f64 {
        1f64.exp()
    }

    #[test]
    fn resolution_parse() {
        assert_eq!("64x256".parse::<Resolution>().unwrap(), Resolution::new(64, 256));
        assert!("64".parse::<Resolution>().is_err());
        assert_eq!(Resolution::new(3, 4).to_string(), "3x4");
    }

    #[test]
    fn offsets_are_primitive_and_oriented() {
        let o = primitive_offsets(2, 1);
        assert_eq!(o.len(), 4);
        assert_eq!(primitive_offsets(3, 1).len(), 13);
        let o2 = primitive_offsets(2, 2);
        assert_eq!(o2.len(), 8);
        assert!(!o2.contains(&vec![2, 0]) && !o2.contains(&vec![2, 2]));
    }

    #[test]
    fn sample_weights_sum_to_one() {
        let lat = Lattice { dims: vec![6, 10], periodic: vec![false, true], offsets: primitive_offsets(2, 3) };
        for o in &lat.offsets {
            let mut total = 0.0;
            lat.for_each_sample(&[1, 8], o, |v, w| {
                assert!(v < 60);
                total += w;
            });
            assert!((total - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn grid_sizes() {
        let ann = Shape::annulus_at_origin(2, 1.0, e()).unwrap();
        let g = build_grid(&ann, Resolution::new(16, 64), &GridOptions::default()).unwrap();
        assert_eq!(g.nodes().len(), 16 * 64);
        assert_eq!((g.sources().len(), g.sinks().len()), (64, 64));
        let half = Shape::half_semiring_at_origin(2, 1.0, e()).unwrap();
        let g = build_grid(&half, Resolution::new(16, 33), &GridOptions::default()).unwrap();
        assert_eq!((g.sources().len(), g.sinks().len()), (33, 33));
        assert!(g.nodes().iter().all(|x| x[1] >= -1e-15));
        assert!(build_grid(&half, Resolution::new(4, 33), &GridOptions::default()).is_err());
    }

    #[test]
    fn volumes_are_exact() {
        let ann = Shape::annulus_at_origin(2, 1.0, e()).unwrap();
        let g = build_grid(&ann, Resolution::new(9, 16), &GridOptions::default()).unwrap();
        let total: f64 = g.volumes().iter().sum();
        assert!((total - PI * (e() * e() - 1.0)).abs() < 1e-10);
        let half = Shape::half_semiring_at_origin(3, 1.0, 2.0).unwrap();
        let g = build_grid(&half, Resolution::new(8, 16), &GridOptions::default()).unwrap();
        let total: f64 = g.volumes().iter().sum();
        assert!((total - 2.0 / 3.0 * PI * 7.0).abs() < 1e-10);
    }

    #[test]
    fn apollonian_nodes_lie_on_level_sets() {
        let xi = Vector::from_vec(vec![0.0, 1.0]);
        let shape = Shape::apollonian(2, xi.clone(), 0.1, 1.0).unwrap();
        let g = build_grid(&shape, Resolution::new(8, 9), &GridOptions::default()).unwrap();
        for &s in g.sources() {
            let x = &g.nodes()[s as usize];
            assert!(((x - &xi).norm() / (x + &xi).norm() - 0.1).abs() < 1e-12);
            assert!(x.norm() <= 1.0 + 1e-12);
        }
        for &t in g.sinks() {
            let x = &g.nodes()[t as usize];
            assert!(((x - &xi).norm() / (x + &xi).norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn single_edge() {
        let nodes = vec![Vector::from_vec(vec![0.0, 0.0]), Vector::from_vec(vec![1.0, 0.0])];
        let g = GridGraph::from_parts(nodes, vec![(0, 1)], vec![0], vec![1], 2.0).unwrap();
        let est = modulus_connect(&g, &SolverOptions::default()).unwrap();
        assert!((est.m_gamma - 1.0).abs() < 1e-9);
        assert!(est.rho.iter().all(|r| (r - 1.0).abs() < 1e-9));
    }

    #[test]
    fn series_and_parallel_edges() {
        // two unit edges in series: M = 1/2; two parallel unit paths: M = 2
        let pts = |v: &[f64]| v.iter().map(|&x| Vector::from_vec(vec![x, 0.0])).collect::<Vec<_>>();
        let g = GridGraph::from_parts(pts(&[0.0, 1.0, 2.0]), vec![(0, 1), (1, 2)], vec![0], vec![2], 2.0).unwrap();
        assert!((modulus_connect(&g, &SolverOptions::default()).unwrap().m_gamma - 0.5).abs() < 1e-9);
        let nodes = vec![
            Vector::from_vec(vec![0.0, 0.0]),
            Vector::from_vec(vec![1.0, 0.0]),
            Vector::from_vec(vec![0.0, 5.0]),
            Vector::from_vec(vec![1.0, 5.0]),
        ];
        let g = GridGraph::from_parts(nodes, vec![(0, 1), (2, 3)], vec![0, 2], vec![1, 3], 3.0).unwrap();
        assert!((modulus_connect(&g, &SolverOptions::default()).unwrap().m_gamma - 2.0).abs() < 1e-9);
    }

    #[test]
    fn graph_errors() {
        let nodes = vec![Vector::from_vec(vec![0.0, 0.0]), Vector::from_vec(vec![1.0, 0.0])];
        assert!(GridGraph::from_parts(nodes.clone(), vec![(0, 1)], vec![0], vec![0], 2.0).is_err());
        assert!(GridGraph::from_parts(nodes.clone(), vec![(0, 1)], vec![], vec![1], 2.0).is_err());
        let three = vec![nodes[0].clone(), nodes[1].clone(), Vector::from_vec(vec![2.0, 0.0])];
        let g = GridGraph::from_parts(three, vec![(0, 1), (1, 2)], vec![0], vec![2], 2.0).unwrap();
        let cut = GridGraph { edges: vec![g.edges()[0]], ..g };
        assert!(matches!(modulus_connect(&cut, &SolverOptions::default()), Err(Error::Graph(_))));
    }

    #[test]
    fn mo_normalizations() {
        assert!((mo_from_gamma(PI, true, 2).unwrap() - 1.0).abs() < 1e-15);
        assert!((mo_from_gamma(2.0 * PI, false, 2).unwrap() - 1.0).abs() < 1e-15);
        assert!((mo_from_gamma(2.0 * PI, true, 3).unwrap() - 1.0).abs() < 1e-15);
        assert!(mo_from_gamma(0.0, true, 2).is_err());
        assert!((separate_from_gamma(2.0 * PI, 2) - 1.0 / (2.0 * PI)).abs() < 1e-15);
        assert!((separate_from_gamma(2.0 * PI, 3) - (2.0 * PI).powf(-0.5)).abs() < 1e-15);
    }

    #[test]
    fn coarse_annulus() {
        let ann = Shape::annulus_at_origin(2, 1.0, e()).unwrap();
        let est =
            shape_modulus(&ann, Resolution::new(16, 64), &GridOptions::default(), &SolverOptions::default()).unwrap();
        assert!(est.shortest >= 1.0 - 1e-3);
        assert!(est.lower <= est.m_gamma * (1.0 + 1e-12));
        assert!((est.m_gamma / (2.0 * PI) - 1.0).abs() < 0.05, "{}", est.m_gamma);
    }
}
