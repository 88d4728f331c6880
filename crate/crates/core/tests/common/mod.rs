#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use ringmod_core::{MapSpec, Matrix, Vector};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn unit(rng: &mut ChaCha8Rng, n: usize) -> Vector {
    loop {
        let v = Vector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let r = v.norm();
        if r > 1e-8 {
            return v / r;
        }
    }
}

/// Random matrix with entries in [-2, 2] and |det| ≥ 0.05.
pub fn matrix(rng: &mut ChaCha8Rng, n: usize) -> Matrix {
    loop {
        let m = Matrix::from_fn(n, n, |_, _| rng.gen_range(-2.0..2.0));
        if m.determinant().abs() >= 0.05 {
            return m;
        }
    }
}

pub fn orthogonal(rng: &mut ChaCha8Rng, n: usize) -> Matrix {
    let m = Matrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    m.qr().q()
}

/// `min |Ah|/|h·u|` over `count` random unit directions.
pub fn sampled_ell(a: &Matrix, u: &Vector, count: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut best = f64::INFINITY;
    for _ in 0..count {
        let h = unit(&mut r, u.len());
        let d = h.dot(u).abs();
        if d > 0.0 {
            best = best.min((a * &h).norm() / d);
        }
    }
    best
}

/// `max |Ah|·|h·u|` over `count` random unit directions.
pub fn sampled_lcal(a: &Matrix, u: &Vector, count: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    (0..count)
        .map(|_| {
            let h = unit(&mut r, u.len());
            (a * &h).norm() * h.dot(u).abs()
        })
        .fold(0.0, f64::max)
}

/// `a ≤ b` up to a relative and absolute slack of `tol`.
pub fn le(a: f64, b: f64, tol: f64) -> bool {
    a <= b + tol * (1.0 + b.abs())
}

/// A built-in map chosen by index, for dimension `n`.
pub fn builtin_map(rng: &mut ChaCha8Rng, n: usize, which: usize) -> MapSpec {
    match which % 5 {
        0 => MapSpec::identity(),
        1 => MapSpec::radial(rng.gen_range(0.2..3.0)).unwrap(),
        2 => MapSpec::twist(),
        3 => MapSpec::linear(matrix(rng, n)).unwrap(),
        _ => MapSpec::compose(vec![
            MapSpec::twist(),
            MapSpec::linear(matrix(rng, n)).unwrap(),
            MapSpec::radial(rng.gen_range(0.5..2.0)).unwrap(),
        ])
        .unwrap(),
    }
}

/// Random point in `[-3, 3]ⁿ` at distance ≥ `margin` from the map's singular set.
pub fn regular_point(rng: &mut ChaCha8Rng, map: &MapSpec, n: usize, margin: f64) -> Vector {
    loop {
        let x = Vector::from_fn(n, |_, _| rng.gen_range(-3.0..3.0));
        if map.singular_distance(&x) >= margin {
            return x;
        }
    }
}
