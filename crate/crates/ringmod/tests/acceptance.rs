//! The twelve acceptance criteria, each against an oracle computed here.

use std::f64::consts::{E, PI, SQRT_2};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use ringmod::report::strip_timing;
use ringmod::{run_all, RunConfig};
use ringmod_core::bounds::{
    dominated_modulus_bound, holder_identity_check, infinity_check, is_divergence_type, quad_weighted, AngularField,
    DilatationIntegrals, DivergenceType, DominatingFactor, Trend,
};
use ringmod_core::dilatation::{directional_sample, ell_f, matrix_dilatations};
use ringmod_core::graph::{image_modulus, shape_modulus, GridOptions, Resolution, SolverOptions};
use ringmod_core::quadrature::QuadratureSpec;
use ringmod_core::special::{compute_a2, phi2};
use ringmod_core::{MapSpec, Matrix, Shape, Vector};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, msg: String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg)
    }
}

fn spec() -> QuadratureSpec {
    QuadratureSpec::default()
}

fn half(n: usize, r: f64, big_r: f64) -> Shape {
    Shape::half_semiring_at_origin(n, r, big_r).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn le(a: f64, b: f64, tol: f64) -> bool {
    a <= b + tol * (1.0 + b.abs())
}

fn unit(rng: &mut ChaCha8Rng, n: usize) -> Vector {
    loop {
        let v = Vector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        if v.norm() > 1e-8 {
            return v.normalize();
        }
    }
}

fn matrix(rng: &mut ChaCha8Rng, n: usize) -> Matrix {
    loop {
        let m = Matrix::from_fn(n, n, |_, _| rng.gen_range(-2.0..2.0));
        if m.determinant().abs() >= 0.05 {
            return m;
        }
    }
}

fn a2_recovery() -> Outcome {
    let t = Instant::now();
    let r = compute_a2();
    let secs = t.elapsed().as_secs_f64();
    ensure((r.value - PI).abs() <= 1e-6, format!("A2 = {}", r.value))?;
    ensure(secs < 1.0, format!("took {secs:.3} s"))?;
    Ok(format!("A2 = {:.12}, {secs:.3} s", r.value))
}

fn lambda2_recovery() -> Outcome {
    let q = phi2(1e8).map_err(|e| e.to_string())? / 1e8;
    ensure((q - 4.0).abs() <= 1e-6, format!("Phi2(1e8)/1e8 = {q}"))?;
    Ok(format!("Phi2(1e8)/1e8 = {q:.12}"))
}

fn solver_closed_forms() -> Outcome {
    let opts = SolverOptions::default();
    let grid = GridOptions::default();
    let timed = |shape: &Shape, res: Resolution| {
        let t = Instant::now();
        let est = shape_modulus(shape, res, &grid, &opts).map_err(|e| e.to_string());
        (est, t.elapsed())
    };
    let budget = Duration::from_secs(60);
    let annulus = Shape::annulus_at_origin(2, 1.0, E).unwrap();
    let (a, ta) = timed(&annulus, Resolution::new(64, 256));
    let a = a?.m_gamma;
    ensure(rel(a, 2.0 * PI) <= 0.02 && ta < budget, format!("annulus {a} in {ta:?}"))?;
    let (h, th) = timed(&half(2, 1.0, E), Resolution::new(64, 129));
    let h = h?.m_gamma;
    ensure(rel(h, PI) <= 0.02 && th < budget, format!("half semiring {h} in {th:?}"))?;
    let apo = Shape::apollonian(2, Vector::from_vec(vec![0.0, 1.0]), 0.1, 1.0).unwrap();
    let (p, tp) = timed(&apo, Resolution::new(32, 65));
    let p = p?.mo;
    ensure(rel(p, 10f64.ln()) <= 0.03 && tp < budget, format!("Apollonian mo {p} in {tp:?}"))?;
    Ok(format!("annulus {a:.4}, half semiring {h:.4}, Apollonian mo {p:.4}"))
}

fn twist_certification() -> Outcome {
    let f = MapSpec::twist();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut summary = Vec::new();
    for n in [2usize, 3] {
        let want = (1.0 + SQRT_2).powi(n as i32);
        let mut count = 0;
        let mut worst = [0.0f64; 4];
        while count < 1000 {
            let x = Vector::from_fn(n, |_, _| rng.gen_range(-3.0..3.0));
            if x[0].hypot(x[1]) < 1e-3 {
                continue;
            }
            count += 1;
            let s = directional_sample(&f, &x, &Vector::zeros(n)).map_err(|e| format!("{x:?}: {e}"))?;
            let devs = [(s.j - 1.0).abs(), (s.matrix.h_i - want).abs(), (s.matrix.h_o - want).abs(), (s.d - 1.0).abs()];
            for (w, d) in worst.iter_mut().zip(devs) {
                *w = w.max(d);
            }
        }
        ensure(
            worst[0] <= 1e-10 && worst[1] <= 1e-6 && worst[2] <= 1e-6 && worst[3] <= 1e-8,
            format!("n={n}: worst |J-1|, |H_I-h|, |H_O-h|, |D-1| = {worst:?}"),
        )?;
        summary.push(format!("n={n} max|D-1| {:.1e}", worst[3]));
    }
    Ok(summary.join(", "))
}

fn eq1est_sharpness() -> Outcome {
    let f = MapSpec::radial(0.8).unwrap();
    let s = half(2, 1.0, E);
    let ints = DilatationIntegrals::compute(&f, &s, &spec()).map_err(|e| e.to_string())?;
    let r = ints.eq1est(None);
    ensure((r.left - 0.8).abs() <= 1e-3 && (r.right - 0.8).abs() <= 1e-3, format!("bounds [{}, {}]", r.left, r.right))?;
    let est = image_modulus(&f, &s, Resolution::new(64, 129), &GridOptions::default(), &SolverOptions::default())
        .map_err(|e| e.to_string())?;
    // mo S = 1 exactly.
    ensure(rel(est.mo, 0.8) <= 0.02, format!("solver ratio {}", est.mo))?;
    Ok(format!("bounds [{:.6}, {:.6}], solver ratio {:.4}", r.left, r.right, est.mo))
}

fn eq2est_sandwich() -> Outcome {
    let f = MapSpec::radial(0.8).unwrap();
    let ints = DilatationIntegrals::compute(&f, &half(2, 1.0, E), &spec()).map_err(|e| e.to_string())?;
    let r = ints.eq2est(None);
    let truth = 1.0 - 0.8;
    ensure(
        (r.left - 0.2).abs() <= 1e-4 && (r.right - 0.25).abs() <= 1e-4,
        format!("bounds [{}, {}]", r.left, r.right),
    )?;
    ensure(le(r.left, truth, 1e-4) && le(truth, r.right, 1e-4), format!("{truth} outside [{}, {}]", r.left, r.right))?;
    Ok(format!("{:.6} <= {truth} <= {:.6}", r.left, r.right))
}

fn measure_self_test() -> Outcome {
    let two = quad_weighted(|_| Ok(1.0), &half(2, 1.0, E), &spec()).map_err(|e| e.to_string())?.value;
    let three = quad_weighted(|_| Ok(1.0), &half(3, 1.0, E), &spec()).map_err(|e| e.to_string())?.value;
    // ω₂ = 4π, so (ω₂/2)·log e = 2π.
    ensure((two - PI).abs() <= 1e-6 && (three - 2.0 * PI).abs() <= 1e-6, format!("n=2 {two}, n=3 {three}"))?;
    Ok(format!("n=2 {two:.10}, n=3 {three:.10}"))
}

fn dilatation_chains() -> Outcome {
    let tol = 1e-9;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for n in [2usize, 3, 4] {
        let nf = n as f64;
        for _ in 0..1000 {
            let a = matrix(&mut rng, n);
            let m = matrix_dilatations(&a).map_err(|e| e.to_string())?;
            let (lo, hi) = (m.h_i.min(m.h_o), m.h_i.max(m.h_o));
            ensure(
                le(m.h, lo, tol)
                    && le(lo, m.h.powf(nf / 2.0), tol)
                    && le(m.h.powf(nf / 2.0), hi, tol)
                    && le(hi, m.h.powf(nf - 1.0), tol),
                format!("matrix chain {m:?}"),
            )?;
            let map = MapSpec::linear(a.clone()).map_err(|e| e.to_string())?;
            let x = unit(&mut rng, n) * rng.gen_range(0.5..2.0);
            let x0 = unit(&mut rng, n) * rng.gen_range(0.0..0.4);
            let s = directional_sample(&map, &x, &x0).map_err(|e| e.to_string())?;
            let hi_root = m.h_i.powf(1.0 / (1.0 - nf));
            let ho_root = m.h_o.powf(1.0 / (nf - 1.0));
            ensure(le(1.0 / m.h_o, s.d, tol) && le(s.d, m.h_i, tol), format!("D chain {s:?}"))?;
            ensure(
                le(1.0 / m.h_o, hi_root, tol)
                    && le(hi_root, s.t, tol)
                    && le(s.t, ho_root, tol)
                    && le(ho_root, m.h_i, tol),
                format!("T chain {s:?}"),
            )?;
        }
    }
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let a = matrix(&mut rng, 2);
        let u = unit(&mut rng, 2);
        let exact = ell_f(&a, &u).map_err(|e| e.to_string())?;
        let mut sampled = f64::INFINITY;
        for _ in 0..100_000 {
            let h = unit(&mut rng, 2);
            let d = h.dot(&u).abs();
            if d > 0.0 {
                sampled = sampled.min((&a * &h).norm() / d);
            }
        }
        worst = worst.max(rel(sampled, exact));
    }
    ensure(worst <= 1e-3, format!("ell vs sampling: worst relative gap {worst}"))?;
    Ok(format!("3000 matrices and samples, ell gap {worst:.1e}"))
}

fn dominating_factor() -> Outcome {
    let h1 = DominatingFactor::linear(1.0).map_err(|e| e.to_string())?;
    ensure(is_divergence_type(&h1, 2) == DivergenceType::Divergent, "Linear not divergent".into())?;
    let (big_m, r0) = (PI, 1.0);
    let mut worst = 0.0f64;
    for n in [2usize, 3, 4] {
        let nf = n as f64;
        let sigma = (2.0 * nf * big_m / (ringmod_core::geometry::sphere_area(n) * r0)).ln();
        for gamma in [0.5, 1.0, 2.0] {
            let h = DominatingFactor::linear(gamma).map_err(|e| e.to_string())?;
            for m in [1.0, 10.0, 100.0] {
                // ∫ ((nt + σ)/γ)^{−1/(n−1)} dt in closed form.
                let g = gamma.powf(1.0 / (nf - 1.0));
                let (a, b) = (1.0 + sigma, nf * m + sigma);
                let oracle = if n == 2 {
                    g / nf * (b / a).ln()
                } else {
                    let mu = (nf - 2.0) / (nf - 1.0);
                    g / (nf * mu) * (b.powf(mu) - a.powf(mu))
                };
                let got = dominated_modulus_bound(m, big_m, r0, n, &h).map_err(|e| e.to_string())?.value;
                worst = worst.max(rel(got, oracle));
            }
        }
    }
    ensure(worst <= 1e-8, format!("worst relative gap {worst}"))?;
    let at = |m: f64| dominated_modulus_bound(m, big_m, r0, 2, &h1).map(|b| b.value).map_err(|e| e.to_string());
    let growth = at(1e4)? - at(10.0)?;
    ensure(growth > 1.0, format!("bound(1e4) - bound(10) = {growth}"))?;
    Ok(format!("27 cases within {worst:.1e}, growth {growth:.3}"))
}

fn holder_identity() -> Outcome {
    let o = Vector::zeros(2);
    let mut parts = Vec::new();
    for map in [MapSpec::identity(), MapSpec::radial(0.5).unwrap(), MapSpec::radial(0.8).unwrap()] {
        let r = holder_identity_check(&map, &o, 0.01, 1.0, &spec()).map_err(|e| e.to_string())?;
        ensure(
            (r.left - r.right).abs() <= r.error + 1e-12,
            format!("{map:?}: {} vs {} (error {})", r.left, r.right, r.error),
        )?;
        parts.push(format!("{:.6}", r.left));
    }
    Ok(format!("sides agree at {}", parts.join(", ")))
}

fn infinity() -> Outcome {
    let radii: Vec<f64> = [5.0f64, 10.0, 25.0, 50.0, 100.0, 200.0].iter().map(|t| t.exp()).collect();
    let f = AngularField::Map(MapSpec::radial(0.8).unwrap());
    let r = infinity_check(&f, 2, 1.0, &radii, &spec()).map_err(|e| e.to_string())?;
    ensure(r.verdict == Trend::Extends, format!("radial trend {:?}", r.values))?;
    let s = infinity_check(&AngularField::LogRadius, 2, 1.0, &radii, &spec()).map_err(|e| e.to_string())?;
    // ∫_{S(0;1,R)} log|x| dν = π (log R)²/2, so the normalized value tends to π/2 = ω₁/4.
    let last = *s.values.last().unwrap();
    ensure(
        s.verdict == Trend::Inconclusive && rel(last, 2.0 * PI / 4.0) <= 0.05,
        format!("synthetic {last}, {:?}", s.verdict),
    )?;
    Ok(format!("radial -> {:.2e} extends, synthetic -> {last:.4} inconclusive", r.values.last().unwrap()))
}

fn determinism() -> Outcome {
    let cfg = RunConfig::default();
    let t = Instant::now();
    let first = run_all(None, &cfg, None).map_err(|e| e.to_string())?;
    let second = run_all(None, &cfg, Some(1)).map_err(|e| e.to_string())?;
    let secs = t.elapsed().as_secs_f64();
    let a = serde_json::to_string(&strip_timing(&serde_json::to_value(&first).unwrap())).unwrap();
    let b = serde_json::to_string(&strip_timing(&serde_json::to_value(&second).unwrap())).unwrap();
    ensure(a == b, "reports differ".into())?;
    ensure(first.pass, format!("{} scenarios failed", first.failed))?;
    ensure(secs / 2.0 < 600.0, format!("suite took {:.1} s", secs / 2.0))?;
    Ok(format!("{} scenarios, identical reports, {:.1} s per run", first.reports.len(), secs / 2.0))
}

fn main() {
    let criteria: [Criterion; 12] = [
        ("A2 recovery", a2_recovery),
        ("lambda2 recovery", lambda2_recovery),
        ("solver vs closed form", solver_closed_forms),
        ("rotation-twist certification", twist_certification),
        ("eq1est sharpness", eq1est_sharpness),
        ("eq2est sandwich", eq2est_sandwich),
        ("measure self-test", measure_self_test),
        ("dilatation chains", dilatation_chains),
        ("dominating factor", dominating_factor),
        ("Hoelder identity", holder_identity),
        ("infinity check", infinity),
        ("determinism", determinism),
    ];
    let mut failed = Vec::new();
    for (k, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("criterion {:>2} {name}: PASS ({detail})", k + 1),
            Err(why) => {
                println!("criterion {:>2} {name}: FAIL ({why})", k + 1);
                failed.push(k + 1);
            }
        }
    }
    if failed.is_empty() {
        println!("acceptance: all 12 criteria pass");
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
