//! Acceptance suite: every exit criterion of the laboratory, one test per
//! criterion, each printing a single PASS/FAIL line with its residual and
//! tolerance. All tolerances are pinned here, in code.

use nalgebra::{DMatrix, DVector};

use carleman::boundary::{
    cauchy_pairing, delta_pairing, e2_norm, membership_test, GridFunction, SideHint,
};
use carleman::geometry::{
    disc_threshold, integral_bound, norm_probe_set, verify_disc_inclusion, weighted_resolvent_sups,
    ParabolicDomain, Side,
};
use carleman::harness::scenario::{
    complex_gaussian, complex_gaussian_vec, scenario_rng, TAG_DUALITY, TAG_INTERTWINE, TAG_KBOUND,
    TAG_KERNEL, TAG_PLEMELJ,
};
use carleman::harness::{build_pipeline, Pipeline, Scenario};
use carleman::operator::{build_system, op_norm, DomainCase, SpectralDiagonal, WeightFamily, C64};
use carleman::transforms::{
    ctrl_transform, h_eval, obs_on_contour, rational_calculus, truncated_mult, CalculusMode,
    CharFunEvaluator, CtrlInput, ModelElement, RationalFunction,
};

fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn criterion_line(num: u32, name: &str, residual: f64, tolerance: f64) -> bool {
    let pass = residual <= tolerance;
    println!(
        "criterion {:>2} [{}] {:<22} residual {:>12.4e}  tolerance {:>9.3e}",
        num,
        if pass { "PASS" } else { "FAIL" },
        name,
        residual,
        tolerance
    );
    pass
}

fn fixture_pipeline(nodes: usize) -> Pipeline {
    let mut s = Scenario::fixture_n3();
    s.quadrature.nodes = nodes;
    build_pipeline(&s).expect("fixture pipeline")
}

/// 1. Inverse identity: max over the contour nodes of ||delta (I+Phi) - I||
///    on the n = 3 fixture at 512 nodes, quadrature-free algebra.
#[test]
fn criterion_01_inverse_identity() {
    let p = fixture_pipeline(512);
    let n = p.system.dimension();
    let id = DMatrix::<C64>::identity(n, n);
    let mut worst: f64 = 0.0;
    for (j, &z) in p.contour.nodes().iter().enumerate() {
        let inv = &id + p.evaluator.transfer(z).unwrap();
        worst = worst.max((&p.delta_samples.values[j] * &inv - &id).norm());
    }
    assert!(criterion_line(1, "inverse_identity", worst, 1e-10));
}

/// 2. Scalar golden values: delta_1(0) and its inverse on the scalar fixture.
#[test]
fn criterion_02_scalar_golden() {
    let a0 = SpectralDiagonal::new(vec![2.0], DomainCase::HalfLine).unwrap();
    let w = WeightFamily::power_affine(0.5, DomainCase::HalfLine).unwrap();
    let f = DMatrix::from_element(1, 1, c64(0.2, 0.0));
    let sys = build_system(a0, w, f, 1.0, 1.0).unwrap();
    let domain = ParabolicDomain::new(1.0, 2.68, w).unwrap();
    let ev = CharFunEvaluator::new(sys, domain, 2.7, 0.05).unwrap();
    let d = ev.delta(c64(0.0, 0.0)).unwrap()[(0, 0)];
    let dinv = (DMatrix::<C64>::identity(1, 1) + ev.transfer(c64(0.0, 0.0)).unwrap())[(0, 0)];
    let res = (d - c64(0.363207, -0.353774))
        .norm()
        .max((dinv - c64(1.412844, 1.376147)).norm());
    assert!(criterion_line(2, "scalar_golden", res, 1e-6));
    // the two values really are mutual inverses
    assert!((d * dinv - c64(1.0, 0.0)).norm() < 1e-12);
}

/// 3. Intertwining: z (O x)(z) - C x - (O A x)(z) node-wise for 20 random x.
#[test]
fn criterion_03_intertwining() {
    let p = fixture_pipeline(2048);
    let mut rng = scenario_rng(p.scenario.seed, TAG_INTERTWINE);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let x = complex_gaussian_vec(&mut rng, 3);
        let elem =
            ModelElement::from_obs(&p.evaluator, &x, &p.delta_samples, &p.contour, 1e-4).unwrap();
        let (_, shifted) =
            truncated_mult(&elem, &p.evaluator, &p.delta_samples, &p.contour, 1e-4).unwrap();
        let oax = obs_on_contour(&p.system, &(&p.system.a * &x), &p.contour).unwrap();
        for j in 0..p.contour.len() {
            worst = worst.max((&shifted.f.values[j] - &oax.values[j]).norm() / x.norm());
        }
    }
    assert!(criterion_line(3, "intertwining", worst, 1e-10));
}

fn duality_residual(p: &Pipeline, trials: usize) -> f64 {
    let n = p.system.dimension();
    let mut rng = scenario_rng(p.scenario.seed, TAG_DUALITY);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let x1 = complex_gaussian_vec(&mut rng, n);
        let x2 = complex_gaussian_vec(&mut rng, n);
        let f1 = obs_on_contour(&p.system, &x1, &p.contour).unwrap();
        let f = GridFunction {
            values: f1
                .values
                .iter()
                .map(|v| v * c64(-p.constants.kappa, 0.0))
                .collect(),
            side_hint: SideHint::ExtAnalytic,
            decays: true,
        };
        // O_{A*,B*} x2 sampled directly
        let a_star = p.system.a.adjoint();
        let g = GridFunction::sample(
            &p.contour,
            |z| {
                let mut sh = -a_star.clone();
                for i in 0..n {
                    sh[(i, i)] += z;
                }
                let y = sh.lu().solve(&x2).unwrap();
                DVector::from_iterator(
                    n,
                    y.iter()
                        .zip(p.system.b_diag.iter())
                        .map(|(v, &b)| c64(b, 0.0) * v),
                )
            },
            SideHint::ExtAnalytic,
            true,
        );
        let pairing = delta_pairing(&f, &g, &p.delta_samples, &p.contour).unwrap();
        let inner: C64 = x2.dotc(&x1);
        worst = worst.max((inner - pairing.value).norm() / (x1.norm() * x2.norm()));
    }
    worst
}

/// 4. Duality: |<x1,x2> - <O_{A,-kC} x1, O_{A*,B*} x2>_delta| normalized,
///    50 pairs, 1e-4 at N = 2048 (tail target 1e-7) and half that bound at
///    N = 4096; doubling the nodes must not inflate the residual.
#[test]
fn criterion_04_duality() {
    let p2048 = fixture_pipeline(2048);
    let r2048 = duality_residual(&p2048, 50);
    let p4096 = fixture_pipeline(4096);
    let r4096 = duality_residual(&p4096, 50);
    let pass = criterion_line(4, "duality_n2048", r2048, 1e-4)
        & criterion_line(4, "duality_n4096", r4096, 5e-5)
        & criterion_line(4, "duality_monotone", r4096, 2.0 * r2048);
    assert!(pass);
}

/// 5. Kernel: ||W(delta g)||/||g|| <= 1e-5 over 20 rational g at N = 2048,
///    and the adjointness residual <= 1e-6.
#[test]
fn criterion_05_kernel_adjointness() {
    let p = fixture_pipeline(2048);
    let n = p.system.dimension();
    let mut rng = scenario_rng(p.scenario.seed, TAG_KERNEL);
    let mut kernel_worst: f64 = 0.0;
    let mut adj_worst: f64 = 0.0;
    for _ in 0..20 {
        // exterior pole with a wide margin
        let pole = loop {
            let x = -1.5 * p.constants.r_outer
                + 4.0 * p.constants.r_outer * rand::Rng::random::<f64>(&mut rng);
            let sign: f64 = if rand::Rng::random::<f64>(&mut rng) < 0.5 {
                1.0
            } else {
                -1.0
            };
            let y = sign
                * (1.5 + 2.0 * rand::Rng::random::<f64>(&mut rng))
                * p.constants.mu
                * p.system.weight.phi_star(x).max(1.0);
            let z = c64(x, y);
            let (side, margin) = p.domain.membership(z);
            if side == Side::Exterior && margin < -0.3 * p.constants.r_outer.min(p.constants.mu) {
                break z;
            }
        };
        let u = complex_gaussian_vec(&mut rng, n);
        let g = GridFunction::sample(
            &p.contour,
            |z| &u * (z - pole).inv(),
            SideHint::IntAnalytic,
            true,
        );
        let dg = GridFunction {
            values: g
                .values
                .iter()
                .zip(p.delta_samples.values.iter())
                .map(|(v, d)| d * v)
                .collect(),
            side_hint: SideHint::IntAnalytic,
            decays: true,
        };
        let w = ctrl_transform(&p.system, CtrlInput::Samples(&dg), &p.domain, &p.contour).unwrap();
        kernel_worst = kernel_worst.max(w.norm() / e2_norm(&g, &p.contour).unwrap());

        // adjointness on the same pole
        let x = complex_gaussian_vec(&mut rng, n);
        let terms = [(pole, u.clone())];
        let wf = ctrl_transform(
            &p.system,
            CtrlInput::Rational(&terms),
            &p.domain,
            &p.contour,
        )
        .unwrap();
        let lhs: C64 = x.dotc(&wf);
        let a_star = p.system.a.adjoint();
        let gstar = GridFunction::sample(
            &p.contour,
            |z| {
                let mut sh = -a_star.clone();
                for i in 0..n {
                    sh[(i, i)] += z;
                }
                let y = sh.lu().solve(&x).unwrap();
                DVector::from_iterator(
                    n,
                    y.iter()
                        .zip(p.system.b_diag.iter())
                        .map(|(v, &b)| c64(b, 0.0) * v),
                )
            },
            SideHint::ExtAnalytic,
            true,
        );
        let rhs = cauchy_pairing(&g, &gstar, &p.contour).unwrap().value;
        adj_worst = adj_worst.max((lhs - rhs).norm() / (u.norm() * x.norm()));
    }
    let pass = criterion_line(5, "kernel", kernel_worst, 1e-5)
        & criterion_line(5, "adjointness", adj_worst, 1e-6);
    assert!(pass);
}

/// 6. Exactness: positive frame bounds and the K-spectral bound
///    ||q(A)|| <= K sup_Gamma |q| with zero violations over 50 rational q.
#[test]
fn criterion_06_exactness_k_bound() {
    let p = fixture_pipeline(2048);
    let n = p.system.dimension();
    // frame bounds from the Gram matrix of the basis images
    let basis: Vec<DVector<C64>> = (0..n)
        .map(|j| {
            let mut e = DVector::<C64>::zeros(n);
            e[j] = c64(1.0, 0.0);
            e
        })
        .collect();
    let fs = carleman::transforms::obs_batch(&p.system, &basis, &p.contour).unwrap();
    let mut g = DMatrix::<C64>::zeros(n, n);
    for k in 0..p.contour.len() {
        let w = p.contour.arclen()[k] / (2.0 * std::f64::consts::PI);
        for i in 0..n {
            for j in 0..n {
                g[(j, i)] += fs[j].values[k].dotc(&fs[i].values[k]) * c64(w, 0.0);
            }
        }
    }
    let eig = nalgebra::SymmetricEigen::new(g);
    let lower = eig
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let upper = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    let k_sim = (upper / lower).sqrt();
    println!("criterion  6 frame bounds [{lower:.6e}, {upper:.6e}], K = {k_sim:.6e}");

    let mut rng = scenario_rng(p.scenario.seed, TAG_KBOUND);
    let mut violations = 0usize;
    for _ in 0..50 {
        let n_terms = 1 + (rand::Rng::random::<u64>(&mut rng) % 3) as usize;
        let mut terms = Vec::new();
        for _ in 0..n_terms {
            let pole = loop {
                let x = -1.5 * p.constants.r_outer
                    + 4.0 * p.constants.r_outer * rand::Rng::random::<f64>(&mut rng);
                let sign: f64 = if rand::Rng::random::<f64>(&mut rng) < 0.5 {
                    1.0
                } else {
                    -1.0
                };
                let y = sign
                    * (1.5 + 2.0 * rand::Rng::random::<f64>(&mut rng))
                    * p.system.weight.phi_star(x).max(1.0);
                let z = c64(x, y);
                let (side, margin) = p.domain.membership(z);
                if side == Side::Exterior && margin < -0.3 {
                    break z;
                }
            };
            terms.push((pole, complex_gaussian(&mut rng)));
        }
        let q = RationalFunction {
            constant: complex_gaussian(&mut rng),
            terms,
        };
        let qa =
            rational_calculus(&p.system, &q, CalculusMode::Direct, &p.domain, &p.contour).unwrap();
        if op_norm(&qa) > k_sim * q.sup_on_contour(&p.contour) * (1.0 + 1e-9) {
            violations += 1;
        }
    }
    let pass = criterion_line(6, "frame_lower_positive", 1e-10 - lower, 0.0)
        & criterion_line(6, "k_bound_violations", violations as f64, 0.0);
    assert!(pass);
}

/// 7. Geometry: disc inclusion with zero violations over 1e5 samples, the
///    closed-form threshold t* = (1 + sqrt 3)/2 to 1e-8, and the boundary
///    integral stable to 1% under node doubling.
#[test]
fn criterion_07_geometry() {
    let w = WeightFamily::power_affine(0.5, DomainCase::HalfLine).unwrap();
    let t_star = disc_threshold(1.0, 0.5, &w).unwrap();
    let t_err = (t_star - (1.0 + 3.0f64.sqrt()) / 2.0).abs();

    let p = fixture_pipeline(512);
    let r0_domain = ParabolicDomain::new(p.constants.mu, p.constants.r0, w).unwrap();
    let violations = match verify_disc_inclusion(&r0_domain, p.constants.r_prime, 1000, 100) {
        Ok(()) => 0.0,
        Err(_) => 1.0,
    };
    let rep = integral_bound(&w, &p.domain, &p.contour, p.system.a0.eigenvalues()).unwrap();
    let pass = criterion_line(7, "threshold_t_star", t_err, 1e-8)
        & criterion_line(7, "disc_inclusion", violations, 0.0)
        & criterion_line(7, "integral_bound_drift", rep.refinement_drift, 0.01);
    assert!(pass);
}

/// 8. Norm bounds: both weighted resolvent sups <= 1 - eps on the exterior
///    probe set after the R search, and ||H^-1|| <= 1/eps on probes.
#[test]
fn criterion_08_norm_bounds() {
    let p = fixture_pipeline(512);
    let probes = norm_probe_set(&p.domain, p.contour.t_max).unwrap();
    let (s1, s2) = weighted_resolvent_sups(&p.system, &probes).unwrap();
    let cap = 1.0 - p.constants.eps;
    let n = p.system.dimension();
    let mut h_sup: f64 = 0.0;
    for &z in &p.domain.exterior_probes(16) {
        let h = h_eval(&p.system, z).unwrap();
        let hinv = h.lu().solve(&DMatrix::<C64>::identity(n, n)).unwrap();
        h_sup = h_sup.max(op_norm(&hinv));
    }
    let pass = criterion_line(8, "weighted_resolvent_sup", s1.max(s2) - cap, 0.0)
        & criterion_line(8, "h_inverse_bound", h_sup - 1.0 / p.constants.eps, 0.0);
    assert!(pass);
}

/// 9. Spectral inclusion: eigenvalues strictly interior with positive margin
///    across 10 seeded scenarios with t_max in {10, 100, 1000}.
#[test]
fn criterion_09_spectral_inclusion_sweep() {
    let mut min_margin = f64::INFINITY;
    let mut all_interior = true;
    for (i, &t_max) in [
        10.0, 100.0, 1000.0, 10.0, 100.0, 1000.0, 10.0, 100.0, 1000.0, 10.0,
    ]
    .iter()
    .enumerate()
    {
        let mut s = Scenario::random(&format!("sweep-{i}"), 100 + i as u64, 8, t_max, 0.3);
        s.quadrature.nodes = 512;
        let p = build_pipeline(&s).expect("sweep pipeline");
        let eigs = p
            .system
            .a
            .clone()
            .schur()
            .eigenvalues()
            .expect("eigenvalues");
        for &lam in eigs.iter() {
            let (side, margin) = p.domain.membership(lam);
            if side != Side::Interior {
                all_interior = false;
            }
            min_margin = min_margin.min(margin);
        }
    }
    println!("criterion  9 min interior margin over the sweep: {min_margin:.6e}");
    let pass = criterion_line(9, "spectral_inclusion", -min_margin, 0.0) && all_interior;
    assert!(pass);
}

/// 10. Plemelj suite: zero misclassifications of pole side over 50 seeded
///     rational functions at membership tolerance 1e-4.
#[test]
fn criterion_10_plemelj() {
    let p = fixture_pipeline(1024);
    let mut rng = scenario_rng(p.scenario.seed, TAG_PLEMELJ);
    let mn = p.constants.r_outer.min(p.constants.mu);
    let mut misclassified = 0usize;
    for trial in 0..50 {
        let interior = trial % 2 == 0;
        let pole = loop {
            let z = if interior {
                let rad = 0.8 * p.constants.r_outer * rand::Rng::random::<f64>(&mut rng).sqrt();
                let ang = 2.0 * std::f64::consts::PI * rand::Rng::random::<f64>(&mut rng);
                C64::from_polar(rad, ang)
            } else {
                let x = -1.5 * p.constants.r_outer
                    + 4.0 * p.constants.r_outer * rand::Rng::random::<f64>(&mut rng);
                let sign: f64 = if rand::Rng::random::<f64>(&mut rng) < 0.5 {
                    1.0
                } else {
                    -1.0
                };
                c64(
                    x,
                    sign * (1.5 + 2.0 * rand::Rng::random::<f64>(&mut rng))
                        * p.system.weight.phi_star(x).max(1.0),
                )
            };
            let (side, margin) = p.domain.membership(z);
            if interior && side == Side::Interior && margin > 0.25 * mn {
                break z;
            }
            if !interior && side == Side::Exterior && margin < -0.3 * mn {
                break z;
            }
        };
        let u = complex_gaussian(&mut rng);
        let f = GridFunction::sample(
            &p.contour,
            |z| DVector::from_vec(vec![u / (z - pole)]),
            SideHint::Unknown,
            true,
        );
        let int_rep =
            membership_test(&f, &p.contour, &p.domain, SideHint::IntAnalytic, 1e-4).unwrap();
        let ext_rep =
            membership_test(&f, &p.contour, &p.domain, SideHint::ExtAnalytic, 1e-4).unwrap();
        let ok = if interior {
            ext_rep.pass && !int_rep.pass
        } else {
            int_rep.pass && !ext_rep.pass
        };
        if !ok {
            misclassified += 1;
        }
    }
    assert!(criterion_line(10, "plemelj", misclassified as f64, 0.0));
}
