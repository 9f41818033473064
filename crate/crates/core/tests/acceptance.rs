//! Acceptance criteria, one PASS/FAIL line each. Run with
//! `cargo test -p capcmk --test acceptance`.

mod common;

use capcmk::manufactured::{manufactured_datum, manufactured_support};
use capcmk::symfunc::CONE_MARGIN;
use capcmk::*;
use common::{axi_grid, fitted_order, full_grid, robin_compatible, QuadraticPolynomial};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::time::Instant;

struct Outcome {
    id: usize,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn outcome(id: usize, name: &'static str, pass: bool, detail: String) -> Outcome {
    Outcome { id, name, pass, detail }
}

fn settings() -> SolverSettings {
    SolverSettings::default()
}

fn solve_on(f: ScalarField, k: usize) -> Result<Solution> {
    solve(&ProblemSpec::new(f, k, settings())?)
}

/// Minkowski residuals of converged solutions, grouped by refinement family.
#[derive(Default)]
struct MinkowskiLog {
    at_finest: Vec<(String, Vec<f64>)>,
    families: Vec<(String, Vec<Vec<f64>>)>,
}

fn exact_cap(log: &mut MinkowskiLog) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (label, theta) in [("pi/6", PI / 6.0), ("pi/3", PI / 3.0), ("4pi/9", 4.0 * PI / 9.0)] {
        let clock = Instant::now();
        let g = full_grid(theta, 128, 128);
        let res = solve_on(ScalarField::constant(&g, 2.0), 1);
        let secs = clock.elapsed().as_secs_f64();
        match res {
            Ok(sol) => {
                let err = sol.h.field().max_diff(&ell_field(&g)).unwrap();
                pass &= err <= 5e-4 && secs <= 10.0;
                parts.push(format!("theta={label}: err={err:.2e} time={secs:.2}s"));
                log.at_finest.push((format!("cap theta={label}"), minkowski_identity_check(&sol.h)));
            }
            Err(e) => {
                pass = false;
                parts.push(format!("theta={label}: {e}"));
            }
        }
    }
    outcome(1, "exact-cap recovery (n=2, k=1, 128x128)", pass, parts.join("; "))
}

fn axisymmetric_order_two() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    // σ_2(I_3) = 3, so f ≡ 3 is solved by ℓ and f ≡ 1 by ℓ/√3.
    for (c, scale) in [(3.0, 1.0), (1.0, 1.0 / 3f64.sqrt())] {
        let clock = Instant::now();
        let g = axi_grid(3, PI / 3.0, 512);
        let res = solve_on(ScalarField::constant(&g, c), 2);
        let secs = clock.elapsed().as_secs_f64();
        match res {
            Ok(sol) => {
                let err = sol.h.field().max_diff(&ell_field(&g).scaled(scale)).unwrap();
                pass &= err <= 1e-4 && secs <= 2.0;
                parts.push(format!("f={c}: err={err:.2e} time={secs:.3}s"));
            }
            Err(e) => {
                pass = false;
                parts.push(format!("f={c}: {e}"));
            }
        }
    }
    outcome(2, "axisymmetric n=3, k=2 (512 rings)", pass, parts.join("; "))
}

struct ManufacturedRun {
    outcome: Outcome,
    finest: Option<SupportField>,
}

fn manufactured(log: &mut MinkowskiLog) -> ManufacturedRun {
    let theta = PI / 3.0;
    let sizes = [32, 64, 128];
    let mut errors = Vec::new();
    let mut deltas = Vec::new();
    let mut family = Vec::new();
    let mut finest = None;
    for &m in &sizes {
        let g = full_grid(theta, m, m);
        let f = manufactured_datum(&g, 0.05, 2).unwrap();
        match solve_on(f, 2) {
            Ok(sol) => {
                errors.push(sol.h.field().max_diff(&manufactured_support(&g, 0.05)).unwrap());
                deltas.push(g.d_rho());
                family.push(minkowski_identity_check(&sol.h));
                if m == 128 {
                    log.at_finest.push(("manufactured".into(), family.last().unwrap().clone()));
                    finest = Some(sol.h);
                }
            }
            Err(e) => {
                return ManufacturedRun {
                    outcome: outcome(3, "manufactured convergence", false, format!("{m}^2: {e}")),
                    finest: None,
                }
            }
        }
    }
    log.families.push(("manufactured k=2".into(), family));
    let orders: Vec<f64> = (1..errors.len()).map(|i| (errors[i - 1] / errors[i]).log2()).collect();
    let pass = orders.iter().all(|&p| p >= 1.8);
    let detail = format!(
        "errors={:?} orders={:?} fitted={:.3}",
        errors.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>(),
        orders.iter().map(|p| format!("{p:.3}")).collect::<Vec<_>>(),
        fitted_order(&deltas, &errors)
    );
    ManufacturedRun { outcome: outcome(3, "manufactured convergence (k=2, 32/64/128)", pass, detail), finest }
}

fn necessary_condition() -> Outcome {
    let theta = PI / 3.0;
    let g = full_grid(theta, 64, 64);
    let f = ScalarField::from_fn(&g, |r, p| 1.0 + 0.5 * r.sin() * p.cos());
    let c = theta.cos();
    let analytic = 0.5 * PI * (2.0 / 3.0 - c + c.powi(3) / 3.0);
    let spec = ProblemSpec::new(f, 2, settings()).unwrap();
    match solve(&spec) {
        Err(Error::InconsistentData { alpha, defect, tolerance }) => {
            let rel = (defect - analytic).abs() / analytic;
            outcome(
                4,
                "orthogonality rejection",
                alpha == 1 && rel <= 0.05,
                format!("alpha={alpha} defect={defect:.6e} analytic={analytic:.6e} rel={rel:.2e} tol={tolerance:.1e}"),
            )
        }
        Err(e) => outcome(4, "orthogonality rejection", false, format!("wrong error: {e}")),
        Ok(_) => outcome(4, "orthogonality rejection", false, "datum was accepted".into()),
    }
}

fn uniqueness() -> Outcome {
    let g = full_grid(PI / 3.0, 64, 64);
    let f = manufactured_datum(&g, 0.05, 2).unwrap();
    let ell = ell_field(&g);
    let v1 = kernel_fields(&g).remove(0);
    let st = settings();
    let run = |start: ScalarField| newton_solve(&SupportField::new(start), &f, 2, &st);
    match (run(ell.clone()), run(ell.axpy(0.3, &v1).unwrap())) {
        (Ok((a, ta)), Ok((b, tb))) => {
            let a = normalize_translation(a.field());
            let b = normalize_translation(b.field());
            let d = a.max_diff(&b).unwrap();
            outcome(
                5,
                "uniqueness modulo translations",
                d <= 1e-8,
                format!("max diff={d:.2e} iterations={}/{}", ta.iterations, tb.iterations),
            )
        }
        (a, b) => outcome(
            5,
            "uniqueness modulo translations",
            false,
            format!("newton failed: {:?} / {:?}", a.err().map(|f| f.error), b.err().map(|f| f.error)),
        ),
    }
}

fn self_adjointness() -> Outcome {
    let theta = PI / 3.0;
    let sizes = [16, 32, 64, 128];
    let mut rng = ChaCha8Rng::seed_from_u64(0x5e1f_ad01);
    let samples: Vec<[QuadraticPolynomial; 3]> = (0..10)
        .map(|_| {
            [QuadraticPolynomial::random(&mut rng), QuadraticPolynomial::random(&mut rng), QuadraticPolynomial::random(&mut rng)]
        })
        .collect();
    let mut worst = Vec::new();
    let mut deltas = Vec::new();
    for &m in &sizes {
        let g = full_grid(theta, m, m);
        let ell = ell_field(&g);
        let mut max_rel: f64 = 0.0;
        for [ph, pv, pw] in &samples {
            let bump = robin_compatible(&g, ph);
            // shrink the perturbation until W(h) stays in Γ_2
            let mut amp = 0.1 / bump.max_abs().max(1.0);
            let sys = loop {
                let h = ell.axpy(amp, &bump).unwrap();
                match linearize(&SupportField::new(h), 2) {
                    Ok(s) => break s,
                    Err(_) if amp > 1e-3 => amp *= 0.5,
                    Err(e) => return outcome(6, "self-adjointness", false, format!("{m}^2: {e}")),
                }
            };
            let v = robin_compatible(&g, pv);
            let w = robin_compatible(&g, pw);
            let asym = sys.weighted_asymmetry(v.values(), w.values());
            let wt = g.weights();
            let lv = sys.apply(v.values());
            let scale: f64 = wt.iter().zip(w.values().iter().zip(&lv)).map(|(d, (a, b))| (d * a * b).abs()).sum();
            max_rel = max_rel.max(asym.abs() / scale);
        }
        worst.push(max_rel);
        deltas.push(g.d_rho());
    }
    let order = fitted_order(&deltas, &worst);
    let c = worst.iter().zip(&deltas).map(|(e, d)| e / (d * d)).fold(0.0, f64::max);
    outcome(
        6,
        "self-adjointness of the linearization",
        order >= 1.8,
        format!(
            "relative asymmetry={:?} fitted order={order:.3} C={c:.3}",
            worst.iter().map(|e| format!("{e:.2e}")).collect::<Vec<_>>()
        ),
    )
}

fn minkowski(log: &mut MinkowskiLog) -> Outcome {
    // a second refinement family: the exact cap at k = 1
    let mut cap = Vec::new();
    for m in [32, 64, 128] {
        let g = full_grid(PI / 3.0, m, m);
        match solve_on(ScalarField::constant(&g, 2.0), 1) {
            Ok(sol) => cap.push(minkowski_identity_check(&sol.h)),
            Err(e) => return outcome(7, "Minkowski identities", false, format!("cap {m}^2: {e}")),
        }
    }
    log.families.push(("cap k=1".into(), cap));
    let floor = 1e-12;
    let mut pass = !log.at_finest.is_empty();
    let mut parts = Vec::new();
    for (label, r) in &log.at_finest {
        let m = r.iter().copied().fold(0.0, f64::max);
        pass &= m <= 1e-3;
        parts.push(format!("{label}: max={m:.2e}"));
    }
    for (label, fam) in &log.families {
        for l in 0..fam[0].len() {
            let seq: Vec<f64> = fam.iter().map(|r| r[l]).collect();
            let ok = seq.windows(2).all(|w| w[1] <= w[0] || w[1] <= floor);
            pass &= ok;
            parts.push(format!(
                "{label} l={l}: {:?}{}",
                seq.iter().map(|e| format!("{e:.2e}")).collect::<Vec<_>>(),
                if ok { "" } else { " not decreasing" }
            ));
        }
    }
    outcome(7, "Minkowski identities", pass, parts.join("; "))
}

fn steiner(body: Option<&SupportField>) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for theta in [PI / 6.0, PI / 3.0, 4.0 * PI / 9.0] {
        let g = full_grid(theta, 128, 128);
        let unit = reconstruct_surface(&SupportField::new(ell_field(&g)), None, 2);
        let s0 = quermassintegrals(&unit)[0];
        let c = theta.cos();
        let exact = PI * (1.0 - c).powi(2) * (2.0 + c);
        let rel = (s0 - exact).abs() / exact;
        pass &= rel <= 1e-5;
        parts.push(format!("S0 theta={theta:.4}: rel={rel:.2e}"));
    }
    match body {
        Some(h) => match steiner_volume_check(h, &[0.25, 0.5, 1.0]) {
            Ok(chk) => {
                pass &= chk.max_relative <= 1e-4;
                parts.push(format!(
                    "Steiner (manufactured 128^2): {:?}",
                    chk.samples.iter().map(|s| format!("s={} rel={:.2e}", s.s, s.relative)).collect::<Vec<_>>()
                ));
            }
            Err(e) => {
                pass = false;
                parts.push(format!("Steiner: {e}"));
            }
        },
        None => {
            pass = false;
            parts.push("no converged body".into());
        }
    }
    outcome(8, "measure and Steiner consistency", pass, parts.join("; "))
}

fn certificate() -> Outcome {
    let k = 2;
    let g = full_grid(PI / 3.0, 64, 64);
    let ell = ell_field(&g);
    let top = ell.max();
    let good = ell.map(|v| (v / top).powf(-(k as f64)));
    let mut parts = Vec::new();
    let mut pass = true;
    match solve_on(good, k) {
        Ok(sol) => {
            let convex_warning = sol.report.validation.warnings.iter().any(|w| w.contains("not convex"));
            let min_node = sol.certificate.node_min_eigenvalue.iter().copied().fold(f64::INFINITY, f64::min);
            pass &= !convex_warning && sol.certificate.strictly_convex && min_node > 0.0;
            parts.push(format!(
                "validated datum: min eigenvalue={min_node:.4e} certified={}",
                sol.certificate.strictly_convex
            ));
        }
        Err(e) => {
            pass = false;
            parts.push(format!("validated datum: {e}"));
        }
    }
    // k = 1 is linear, so this converges although f^{-1} is far from convex
    let theta = g.theta();
    let bad = ScalarField::from_fn(&g, |r, _| 1.0 / (1.0 + 0.6 * (4.0 * PI * r / theta).cos()));
    match solve_on(bad, 1) {
        Ok(sol) => {
            let flagged = sol.report.validation.warnings.iter().any(|w| w.contains("not convex"));
            let cert = &sol.certificate;
            let evidence = cert.node_min_eigenvalue.iter().all(|&e| e > cert.epsilon * cert.max_eigenvalue.abs());
            let consistent = !cert.strictly_convex || evidence;
            let reported = cert.strictly_convex || sol.report.warnings.iter().any(|w| w.contains("not certified"));
            pass &= flagged && consistent && reported;
            parts.push(format!(
                "violating datum: flagged={flagged} certified={} min eigenvalue={:.3e}",
                cert.strictly_convex, cert.min_eigenvalue
            ));
        }
        Err(e) => {
            pass = false;
            parts.push(format!("violating datum did not converge: {e}"));
        }
    }
    outcome(9, "convexity certificate", pass, parts.join("; "))
}

fn close(a: f64, b: f64, scale: f64) -> bool {
    (a - b).abs() <= 1e-10 * scale.max(1e-300)
}

fn cone_sample(rng: &mut impl Rng, n: usize, k: usize) -> Spectrum {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..3.0)).collect();
        let s = Spectrum::new(v).unwrap();
        if gamma_cone_member_with_margin(&s, k, CONE_MARGIN) {
            return s;
        }
    }
}

fn symfunc_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x51_6a_4a);
    let pairs: Vec<(usize, usize)> = (1..=6).flat_map(|n| (1..=n).map(move |k| (n, k))).collect();
    let total = 10_000;
    let mut failures = Vec::new();
    let mut count = 0;
    for idx in 0..total {
        let (n, k) = pairs[idx % pairs.len()];
        let lam = cone_sample(&mut rng, n, k);
        count += 1;
        let v = lam.values();
        let sk = sigma_k(&lam, k as i64).unwrap();
        let del: Vec<Spectrum> = (0..n).map(|i| lam.without(i)).collect();
        let del_k: Vec<f64> = del.iter().map(|d| sigma_k(d, k as i64).unwrap()).collect();
        let del_km1: Vec<f64> = del.iter().map(|d| sigma_k(d, k as i64 - 1).unwrap()).collect();
        for i in 0..n {
            let rhs = del_k[i] + v[i] * del_km1[i];
            if !close(sk, rhs, del_k[i].abs() + (v[i] * del_km1[i]).abs()) {
                failures.push(format!("(1) n={n} k={k} i={i}"));
            }
        }
        let s2: f64 = (0..n).map(|i| v[i] * del_km1[i]).sum();
        let s2_scale: f64 = (0..n).map(|i| (v[i] * del_km1[i]).abs()).sum();
        if !close(s2, k as f64 * sk, s2_scale) {
            failures.push(format!("(2) n={n} k={k}"));
        }
        let s3: f64 = del_k.iter().sum();
        let s3_scale: f64 = del_k.iter().map(|x| x.abs()).sum::<f64>() + (n - k) as f64 * sk.abs();
        if !close(s3, (n - k) as f64 * sk, s3_scale) {
            failures.push(format!("(3) n={n} k={k}"));
        }
        let sorted = lam.sorted_desc();
        let sv = sorted.values();
        let chain: Vec<f64> = (0..n).map(|i| sigma_k(&sorted.without(i), k as i64 - 1).unwrap()).collect();
        let chain_scale = chain.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        for i in 1..n {
            if chain[i] < chain[i - 1] - 1e-10 * chain_scale && sv[i] < sv[i - 1] {
                failures.push(format!("(4) order n={n} k={k}"));
            }
        }
        if chain[0] <= 0.0 {
            failures.push(format!("(4) positivity n={n} k={k}"));
        }
        let ku = k;
        if ku >= 1 {
            let l = rng.random_range(0..ku);
            let r = rng.random_range(1..=ku);
            let s = rng.random_range(0..r.min(l + 1));
            match newton_maclaurin_check(&lam, ku, l, r, s) {
                Ok(chk) if chk.holds => {}
                Ok(chk) => failures.push(format!("NM n={n} ({ku},{l},{r},{s}) lhs={} rhs={}", chk.lhs, chk.rhs)),
                Err(e) => failures.push(format!("NM n={n}: {e}")),
            }
        }
    }
    // second-order finite-difference consistency of the gradient and Hessian
    let mut fd_orders = Vec::new();
    for n in 3..=6 {
        for k in 1..=n {
            let lam = cone_sample(&mut rng, n, k);
            let q = random_orthogonal(&mut rng, n);
            let a = SymMatrix::diagonal(lam.values()).conjugate(&q);
            let e = random_sym(&mut rng, n);
            let grad = sigma_k_gradient(&a, k as i64).unwrap();
            let hess = sigma_k_hessian(&a, k as i64).unwrap();
            let dir: f64 = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| grad.get(i, j) * e.get(i, j)).sum();
            let mut second = 0.0;
            for i in 0..n {
                for j in 0..n {
                    for p in 0..n {
                        for r in 0..n {
                            second += hess.get(i, j, p, r) * e.get(i, j) * e.get(p, r);
                        }
                    }
                }
            }
            let val = |t: f64| sigma_k_matrix(&a.add(&e.scaled(t)), k as i64).unwrap();
            let d1 = |t: f64| (val(t) - val(-t)) / (2.0 * t);
            let d2 = |t: f64| (val(t) - 2.0 * val(0.0) + val(-t)) / (t * t);
            let hs = [2e-2, 1e-2];
            let e1: Vec<f64> = hs.iter().map(|&t| (d1(t) - dir).abs()).collect();
            let e2: Vec<f64> = hs.iter().map(|&t| (d2(t) - second).abs()).collect();
            for (errs, scale) in [(&e1, dir.abs() + 1.0), (&e2, second.abs() + 1.0)] {
                if errs[1] <= 1e-9 * scale {
                    continue;
                }
                let p = (errs[0] / errs[1]).log2();
                fd_orders.push(p);
                if p < 1.8 {
                    failures.push(format!("FD order {p:.2} at n={n} k={k}"));
                }
            }
        }
    }
    let min_order = fd_orders.iter().copied().fold(f64::INFINITY, f64::min);
    outcome(
        10,
        "symmetric-function identities",
        failures.is_empty(),
        format!(
            "samples={count} failures={} fd checks={} min fd order={min_order:.3}{}",
            failures.len(),
            fd_orders.len(),
            failures.first().map(|f| format!(" first: {f}")).unwrap_or_default()
        ),
    )
}

fn random_sym(rng: &mut impl Rng, n: usize) -> SymMatrix {
    let mut m = SymMatrix::zeros(n);
    for i in 0..n {
        for j in i..n {
            m.set(i, j, rng.random_range(-1.0..1.0));
        }
    }
    m
}

fn random_orthogonal(rng: &mut impl Rng, n: usize) -> nalgebra::DMatrix<f64> {
    let m = nalgebra::DMatrix::<f64>::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    m.qr().q()
}

fn main() {
    let clock = Instant::now();
    let mut log = MinkowskiLog::default();
    let mut results = vec![exact_cap(&mut log), axisymmetric_order_two()];
    let run = manufactured(&mut log);
    results.push(run.outcome);
    results.push(necessary_condition());
    results.push(uniqueness());
    results.push(self_adjointness());
    results.push(minkowski(&mut log));
    results.push(steiner(run.finest.as_ref()));
    results.push(certificate());
    results.push(symfunc_suite());
    results.sort_by_key(|o| o.id);
    for o in &results {
        println!("{} criterion {:>2} {}: {}", if o.pass { "PASS" } else { "FAIL" }, o.id, o.name, o.detail);
    }
    let failed = results.iter().filter(|o| !o.pass).count();
    println!("{} passed, {} failed, {:.1}s", results.len() - failed, failed, clock.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
