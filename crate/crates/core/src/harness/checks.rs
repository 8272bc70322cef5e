//! The theorem-level check battery. Each check produces a named result with
//! a residual and the tolerance it was held to; a check passes exactly when
//! residual <= tolerance.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::boundary::{
    cauchy_pairing, delta_pairing, e2_norm, membership_test, GridFunction, SideHint,
};
use crate::error::{Error, Result};
use crate::geometry::{
    integral_bound, norm_probe_set, separation_check, verify_disc_inclusion, winding_number, Side,
};
use crate::harness::scenario::{
    complex_gaussian, complex_gaussian_vec, scenario_rng, TAG_DUALITY, TAG_HFACTOR, TAG_INTERTWINE,
    TAG_KBOUND, TAG_KERNEL, TAG_PLEMELJ,
};
use crate::harness::Pipeline;
use crate::operator::{check_weight_laws, op_norm, ResolventMode, C64};
use crate::transforms::{
    ctrl_transform, h_eval, obs_on_contour, rational_calculus, truncated_mult, CalculusMode,
    CtrlInput, ModelElement, RationalFunction,
};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Outcome of one check. `pass` is recomputable as residual <= tolerance.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub residual: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl CheckResult {
    fn new(name: &str, residual: f64, tolerance: f64, detail: String) -> Self {
        Self {
            name: name.into(),
            pass: residual <= tolerance,
            residual,
            tolerance,
            detail,
        }
    }
}

/// Reported operator bounds: admissibility sups and frame data.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct Bounds {
    pub sup_delta_interior: f64,
    pub sup_delta_inv_contour: f64,
    pub frame_lower: f64,
    pub frame_upper: f64,
    pub k_similarity: f64,
}

/// All check names in execution order.
pub const CHECK_ORDER: [&str; 24] = [
    "constants_chain",
    "weight_laws",
    "reconstruction",
    "resolvent_factorization",
    "winding",
    "disc_inclusion",
    "integral_bound",
    "separation",
    "norm_bounds",
    "h_inverse",
    "spectral_inclusion",
    "inverse_identity",
    "delta_forms",
    "admissibility",
    "h_factorization",
    "intertwining",
    "membership_coherence",
    "exactness",
    "k_bound",
    "duality",
    "kernel",
    "adjointness",
    "surjectivity",
    "plemelj",
];

fn default_tolerance(name: &str) -> f64 {
    match name {
        "weight_laws" => 1e-12,
        "reconstruction" => 1e-14,
        "resolvent_factorization" => 1e-10,
        "winding" => 1e-6,
        "integral_bound" => 0.01,
        "inverse_identity" => 1e-10,
        "delta_forms" => 1e-10,
        "h_factorization" => 1e-10,
        "intertwining" => 1e-10,
        "membership_coherence" => 1.0,
        "duality" => 1e-4,
        "kernel" => 1e-5,
        "adjointness" => 1e-6,
        "plemelj" => 0.0,
        "mem_tol" => 1e-4,
        _ => 0.0,
    }
}

fn tolerance_for(p: &Pipeline, name: &str) -> f64 {
    p.scenario
        .tolerances
        .get(name)
        .copied()
        .unwrap_or_else(|| default_tolerance(name))
}

fn enabled(p: &Pipeline, name: &str) -> bool {
    match &p.scenario.checks {
        None => true,
        Some(list) => list.iter().any(|c| c == name),
    }
}

/// Run every enabled check in the fixed order and collect the bounds.
pub fn run_checks(p: &Pipeline) -> Result<(Vec<CheckResult>, Bounds)> {
    let mut results = Vec::new();
    let mut bounds = Bounds::default();
    for name in CHECK_ORDER {
        if !enabled(p, name) {
            continue;
        }
        let r = match name {
            "constants_chain" => constants_chain(p),
            "weight_laws" => weight_laws(p),
            "reconstruction" => reconstruction(p),
            "resolvent_factorization" => resolvent_factorization(p),
            "winding" => winding(p),
            "disc_inclusion" => disc_inclusion(p),
            "integral_bound" => integral_bound_check(p),
            "separation" => separation(p),
            "norm_bounds" => norm_bounds(p),
            "h_inverse" => h_inverse(p),
            "spectral_inclusion" => spectral_inclusion(p),
            "inverse_identity" => inverse_identity(p),
            "delta_forms" => delta_forms(p),
            "admissibility" => admissibility(p, &mut bounds),
            "h_factorization" => h_factorization(p),
            "intertwining" => intertwining(p),
            "membership_coherence" => membership_coherence(p),
            "exactness" => exactness(p, &mut bounds),
            "k_bound" => k_bound(p, &mut bounds),
            "duality" => duality(p),
            "kernel" => kernel(p),
            "adjointness" => adjointness(p),
            "surjectivity" => surjectivity(p),
            "plemelj" => plemelj(p),
            _ => unreachable!(),
        }?;
        results.push(r);
    }
    Ok((results, bounds))
}

fn constants_chain(p: &Pipeline) -> Result<CheckResult> {
    let c = &p.constants;
    let cone = c.r_prime / (1.0 - (c.r_prime * c.k).powi(2)).sqrt();
    let slacks = [
        c.mu - c.mu0,
        c.r_prime - c.ess,
        1.0 - c.r_prime * c.k,
        c.mu - cone,
        c.r_outer - c.r0,
        c.mu1 - c.mu,
        c.eps,
        1.0 - c.eps,
        c.kappa.abs() - c.kappa0,
    ];
    let min_slack = slacks.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(CheckResult::new(
        "constants_chain",
        -min_slack,
        tolerance_for(p, "constants_chain"),
        format!("min inequality slack {min_slack:.6e}"),
    ))
}

fn weight_laws(p: &Pipeline) -> Result<CheckResult> {
    let worst = check_weight_laws(&p.system.weight, 1000);
    Ok(CheckResult::new(
        "weight_laws",
        (-worst).max(0.0),
        tolerance_for(p, "weight_laws"),
        format!("worst law slack {worst:.3e} on a 1e3 grid"),
    ))
}

fn reconstruction(p: &Pipeline) -> Result<CheckResult> {
    let defect = p.system.reconstruction_defect();
    Ok(CheckResult::new(
        "reconstruction",
        defect,
        tolerance_for(p, "reconstruction"),
        "||A - (A0 + i psi F psi)|| / (1 + ||A||)".into(),
    ))
}

fn resolvent_factorization(p: &Pipeline) -> Result<CheckResult> {
    let probes = p.domain.exterior_probes(12);
    let mut worst: f64 = 0.0;
    for &z in &probes {
        let d = p.system.resolvent(z, ResolventMode::Direct)?;
        let g = p.system.resolvent(z, ResolventMode::Factored)?;
        worst = worst.max((d.clone() - g).norm() / d.norm().max(1e-300));
    }
    Ok(CheckResult::new(
        "resolvent_factorization",
        worst,
        tolerance_for(p, "resolvent_factorization"),
        format!("direct vs factored over {} exterior probes", probes.len()),
    ))
}

fn winding(p: &Pipeline) -> Result<CheckResult> {
    let mut worst: f64 = 0.0;
    for &w in &p.domain.interior_probes(8) {
        worst = worst.max((winding_number(&p.contour, w) - C64::new(1.0, 0.0)).norm());
    }
    for &w in &p.domain.exterior_probes(8) {
        worst = worst.max(winding_number(&p.contour, w).norm());
    }
    Ok(CheckResult::new(
        "winding",
        worst,
        tolerance_for(p, "winding"),
        format!("8 + 8 probes, tail bound {:.2e}", p.contour.tail_bound),
    ))
}

fn disc_inclusion(p: &Pipeline) -> Result<CheckResult> {
    let r0_domain =
        crate::geometry::ParabolicDomain::new(p.constants.mu, p.constants.r0, p.system.weight)?;
    let violations = match verify_disc_inclusion(&r0_domain, p.constants.r_prime, 1000, 100) {
        Ok(()) => 0.0,
        Err(_) => 1.0,
    };
    Ok(CheckResult::new(
        "disc_inclusion",
        violations,
        tolerance_for(p, "disc_inclusion"),
        "1e5 sampled (center, angle) pairs inside Omega_{mu,R0}".into(),
    ))
}

fn integral_bound_check(p: &Pipeline) -> Result<CheckResult> {
    let rep = integral_bound(
        &p.system.weight,
        &p.domain,
        &p.contour,
        p.system.a0.eigenvalues(),
    )?;
    Ok(CheckResult::new(
        "integral_bound",
        rep.refinement_drift,
        tolerance_for(p, "integral_bound"),
        format!(
            "K_hat = {:.6e}, drift {:.3e} under node doubling",
            rep.k_hat, rep.refinement_drift
        ),
    ))
}

fn separation(p: &Pipeline) -> Result<CheckResult> {
    let rep = separation_check(
        p.constants.kappa,
        p.constants.mu1,
        p.constants.ell,
        &p.system.weight,
        40,
    )?;
    let min_slack = rep.min_slack_interior.min(rep.min_slack_boundary_form);
    Ok(CheckResult::new(
        "separation",
        -min_slack,
        tolerance_for(p, "separation"),
        format!(
            "min slack {:.6e} (interior) / {:.6e} (boundary form)",
            rep.min_slack_interior, rep.min_slack_boundary_form
        ),
    ))
}

fn norm_bounds(p: &Pipeline) -> Result<CheckResult> {
    let probes = norm_probe_set(&p.domain, p.contour.t_max)?;
    let (s1, s2) = crate::geometry::weighted_resolvent_sups(&p.system, &probes)?;
    let cap = 1.0 - p.constants.eps;
    let residual = (s1 - cap).max(s2 - cap);
    Ok(CheckResult::new(
        "norm_bounds",
        residual,
        tolerance_for(p, "norm_bounds"),
        format!("sup ||FC R B|| = {s1:.6e}, sup ||C R B F|| = {s2:.6e} vs 1 - eps = {cap:.6e}"),
    ))
}

fn h_inverse(p: &Pipeline) -> Result<CheckResult> {
    let probes = p.domain.exterior_probes(16);
    let cap = 1.0 / p.constants.eps;
    let n = p.system.dimension();
    let mut sup: f64 = 0.0;
    for &z in &probes {
        let h = h_eval(&p.system, z)?;
        let hinv = h
            .clone()
            .lu()
            .solve(&DMatrix::<C64>::identity(n, n))
            .ok_or(Error::NearSingular {
                residual: f64::INFINITY,
                context: format!("H({z}) inverse"),
            })?;
        sup = sup.max(op_norm(&hinv));
    }
    Ok(CheckResult::new(
        "h_inverse",
        sup - cap,
        tolerance_for(p, "h_inverse"),
        format!("sup ||H^-1|| = {sup:.6e} vs 1/eps = {cap:.6e}"),
    ))
}

fn spectral_inclusion(p: &Pipeline) -> Result<CheckResult> {
    let eigs = p
        .system
        .a
        .clone()
        .schur()
        .eigenvalues()
        .ok_or_else(|| Error::Infeasible("eigenvalue iteration failed".into()))?;
    let mut min_margin = f64::INFINITY;
    let mut worst = C64::new(0.0, 0.0);
    for &lam in eigs.iter() {
        let (side, margin) = p.domain.membership(lam);
        if side != Side::Interior {
            return Ok(CheckResult::new(
                "spectral_inclusion",
                f64::INFINITY,
                tolerance_for(p, "spectral_inclusion"),
                format!("eigenvalue {lam} escapes the enclosure (margin {margin:.3e})"),
            ));
        }
        if margin < min_margin {
            min_margin = margin;
            worst = lam;
        }
    }
    Ok(CheckResult::new(
        "spectral_inclusion",
        -min_margin,
        tolerance_for(p, "spectral_inclusion"),
        format!("min interior margin {min_margin:.6e} at eigenvalue {worst}"),
    ))
}

fn inverse_identity(p: &Pipeline) -> Result<CheckResult> {
    let n = p.system.dimension();
    let id = DMatrix::<C64>::identity(n, n);
    let mut worst: f64 = 0.0;
    for (j, &z) in p.contour.nodes().iter().enumerate() {
        let inv = &id + p.evaluator.transfer(z)?;
        worst = worst.max((&p.delta_samples.values[j] * &inv - &id).norm());
    }
    Ok(CheckResult::new(
        "inverse_identity",
        worst,
        tolerance_for(p, "inverse_identity"),
        format!(
            "max over {} nodes of ||delta (I + Phi) - I||",
            p.contour.len()
        ),
    ))
}

fn delta_forms(p: &Pipeline) -> Result<CheckResult> {
    let step = (p.contour.len() / 64).max(1);
    let mut worst: f64 = 0.0;
    for &z in p.contour.nodes().iter().step_by(step) {
        let a = p.evaluator.delta(z)?;
        let b = p.evaluator.delta_alt(z)?;
        worst = worst.max((a.clone() - b).norm() / a.norm().max(1e-300));
    }
    Ok(CheckResult::new(
        "delta_forms",
        worst,
        tolerance_for(p, "delta_forms"),
        "quotient vs resolvent form of delta on sampled nodes".into(),
    ))
}

fn admissibility(p: &Pipeline, bounds: &mut Bounds) -> Result<CheckResult> {
    // sup ||delta|| over an interior grid of the widened parabola
    let weight = &p.system.weight;
    let mut sup_delta: f64 = 0.0;
    for i in 0..24 {
        let frac = i as f64 / 23.0;
        let mag = if frac == 0.0 {
            0.0
        } else {
            0.05 * (40.0 * p.constants.r_outer).powf(frac)
        };
        let xs: &[f64] = if weight.domain_case == crate::operator::DomainCase::EvenOnR {
            &[mag, -mag]
        } else {
            &[mag]
        };
        for &x in xs {
            for &yf in &[0.0, 0.35, 0.7, 0.95] {
                let z = C64::new(x, yf * p.constants.mu1 * weight.phi_star(x));
                sup_delta = sup_delta.max(op_norm(&p.evaluator.delta(z)?));
            }
        }
    }
    // sup ||delta^-1|| over the contour nodes (direct inverse of the samples)
    let n = p.system.dimension();
    let id = DMatrix::<C64>::identity(n, n);
    let mut sup_inv: f64 = 0.0;
    for d in &p.delta_samples.values {
        let inv = d.clone().lu().solve(&id).ok_or(Error::NearSingular {
            residual: f64::INFINITY,
            context: "delta sample inversion on the contour".into(),
        })?;
        sup_inv = sup_inv.max(op_norm(&inv));
    }
    bounds.sup_delta_interior = sup_delta;
    bounds.sup_delta_inv_contour = sup_inv;
    let finite = sup_delta.is_finite() && sup_inv.is_finite();
    Ok(CheckResult::new(
        "admissibility",
        if finite { 0.0 } else { f64::INFINITY },
        tolerance_for(p, "admissibility"),
        format!("sup ||delta|| = {sup_delta:.6e} (interior grid), sup ||delta^-1|| = {sup_inv:.6e} (contour)"),
    ))
}

fn h_factorization(p: &Pipeline) -> Result<CheckResult> {
    let n = p.system.dimension();
    let mut rng = scenario_rng(p.scenario.seed, TAG_HFACTOR);
    let probes = p.domain.exterior_probes(10);
    let mut worst: f64 = 0.0;
    for trial in 0..20 {
        let x = complex_gaussian_vec(&mut rng, n);
        let z = probes[trial % probes.len()];
        let h = h_eval(&p.system, z)?;
        let r0 = p.system.a0.resolvent_diag(z)?;
        let lhs = DVector::from_iterator(
            n,
            x.iter()
                .enumerate()
                .map(|(j, v)| C64::i() * C64::new(p.system.b_diag[j], 0.0) * (-r0[j]) * v),
        );
        let obs = crate::transforms::obs_transform(&p.system, &x, &[z])?;
        let rhs = &h * &obs[0];
        worst = worst.max((lhs - rhs).norm() / x.norm());
    }
    Ok(CheckResult::new(
        "h_factorization",
        worst,
        tolerance_for(p, "h_factorization"),
        "O_{A0,C} x = H O_{A,C} x on 20 random states".into(),
    ))
}

fn intertwining(p: &Pipeline) -> Result<CheckResult> {
    let n = p.system.dimension();
    let mut rng = scenario_rng(p.scenario.seed, TAG_INTERTWINE);
    let tol_mem = tolerance_for(p, "mem_tol");
    let mut worst: f64 = 0.0;
    for _ in 0..p.scenario.trials.intertwining {
        let x = complex_gaussian_vec(&mut rng, n);
        let elem = ModelElement::from_obs(&p.evaluator, &x, &p.delta_samples, &p.contour, tol_mem)?;
        let (_, shifted) =
            truncated_mult(&elem, &p.evaluator, &p.delta_samples, &p.contour, tol_mem)?;
        let ax = &p.system.a * &x;
        let oax = obs_on_contour(&p.system, &ax, &p.contour)?;
        for j in 0..p.contour.len() {
            worst = worst.max((&shifted.f.values[j] - &oax.values[j]).norm() / x.norm());
        }
    }
    Ok(CheckResult::new(
        "intertwining",
        worst,
        tolerance_for(p, "intertwining"),
        format!(
            "z (O x)(z) - C x vs (O A x)(z), {} random states",
            p.scenario.trials.intertwining
        ),
    ))
}

fn membership_coherence(p: &Pipeline) -> Result<CheckResult> {
    let n = p.system.dimension();
    let tol_mem = tolerance_for(p, "mem_tol");
    let mut worst_ratio: f64 = 0.0;
    for j in 0..n {
        let mut e = DVector::<C64>::zeros(n);
        e[j] = C64::new(1.0, 0.0);
        let elem = ModelElement::from_obs(&p.evaluator, &e, &p.delta_samples, &p.contour, tol_mem)?;
        worst_ratio = worst_ratio
            .max(elem.membership_ext.residual / elem.membership_ext.tolerance)
            .max(elem.membership_int.residual / elem.membership_int.tolerance);
    }
    Ok(CheckResult::new(
        "membership_coherence",
        worst_ratio,
        tolerance_for(p, "membership_coherence"),
        "O e_j passes both model-space membership tests for every basis vector".into(),
    ))
}

/// Gram matrix of the observation transform over the standard basis.
fn gram(p: &Pipeline) -> Result<DMatrix<C64>> {
    let n = p.system.dimension();
    let basis: Vec<DVector<C64>> = (0..n)
        .map(|j| {
            let mut e = DVector::<C64>::zeros(n);
            e[j] = C64::new(1.0, 0.0);
            e
        })
        .collect();
    let fs = crate::transforms::obs_batch(&p.system, &basis, &p.contour)?;
    let mut g = DMatrix::<C64>::zeros(n, n);
    for k in 0..p.contour.len() {
        let w = p.contour.arclen()[k] / TWO_PI;
        for (i, fi) in fs.iter().enumerate() {
            for (j, fj) in fs.iter().enumerate() {
                // entry (j, i) multiplies conj(x_j) x_i in x^H G x
                g[(j, i)] += fj.values[k].dotc(&fi.values[k]) * C64::new(w, 0.0);
            }
        }
    }
    Ok(g)
}

fn frame_bounds(p: &Pipeline, bounds: &mut Bounds) -> Result<()> {
    if bounds.frame_upper > 0.0 {
        return Ok(());
    }
    let g = gram(p)?;
    let eig = nalgebra::SymmetricEigen::new(g);
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for &l in eig.eigenvalues.iter() {
        lo = lo.min(l);
        hi = hi.max(l);
    }
    bounds.frame_lower = lo;
    bounds.frame_upper = hi;
    bounds.k_similarity = (hi / lo.max(f64::MIN_POSITIVE)).sqrt();
    Ok(())
}

fn exactness(p: &Pipeline, bounds: &mut Bounds) -> Result<CheckResult> {
    frame_bounds(p, bounds)?;
    Ok(CheckResult::new(
        "exactness",
        1e-10 - bounds.frame_lower,
        tolerance_for(p, "exactness"),
        format!(
            "frame bounds [{:.6e}, {:.6e}], K = {:.6e}",
            bounds.frame_lower, bounds.frame_upper, bounds.k_similarity
        ),
    ))
}

fn k_bound(p: &Pipeline, bounds: &mut Bounds) -> Result<CheckResult> {
    frame_bounds(p, bounds)?;
    let k = bounds.k_similarity;
    let mut rng = scenario_rng(p.scenario.seed, TAG_KBOUND);
    let mut violations = 0usize;
    let mut worst_ratio: f64 = 0.0;
    for _ in 0..p.scenario.trials.k_bound {
        let n_terms = 1 + (rng.random_u64() % 3) as usize;
        let mut terms = Vec::with_capacity(n_terms);
        for _ in 0..n_terms {
            terms.push((exterior_point(p, &mut rng), complex_gaussian(&mut rng)));
        }
        let constant = if rng.random_u64().is_multiple_of(2) {
            complex_gaussian(&mut rng)
        } else {
            C64::new(0.0, 0.0)
        };
        let q = RationalFunction { constant, terms };
        let qa = rational_calculus(&p.system, &q, CalculusMode::Direct, &p.domain, &p.contour)?;
        let bound = k * q.sup_on_contour(&p.contour);
        let ratio = op_norm(&qa) / bound.max(1e-300);
        worst_ratio = worst_ratio.max(ratio);
        if ratio > 1.0 + 1e-9 {
            violations += 1;
        }
    }
    Ok(CheckResult::new(
        "k_bound",
        violations as f64,
        tolerance_for(p, "k_bound"),
        format!(
            "||q(A)|| <= K sup |q| for {} rational q; worst ratio {:.6}",
            p.scenario.trials.k_bound, worst_ratio
        ),
    ))
}

trait RandU64 {
    fn random_u64(&mut self) -> u64;
}

impl RandU64 for rand_chacha::ChaCha8Rng {
    fn random_u64(&mut self) -> u64 {
        rand::Rng::random::<u64>(self)
    }
}

/// Deterministic exterior point with a safe margin, driven by the rng.
fn exterior_point(p: &Pipeline, rng: &mut rand_chacha::ChaCha8Rng) -> C64 {
    let r = p.constants.r_outer;
    let mu = p.constants.mu;
    let weight = &p.system.weight;
    loop {
        let x = -1.5 * r + 4.0 * r * rand::Rng::random::<f64>(rng);
        let sign = if rand::Rng::random::<f64>(rng) < 0.5 {
            1.0
        } else {
            -1.0
        };
        let y =
            sign * (1.5 + 2.0 * rand::Rng::random::<f64>(rng)) * mu * weight.phi_star(x).max(1.0);
        let z = C64::new(x, y);
        let (side, margin) = p.domain.membership(z);
        if side == Side::Exterior && margin < -0.3 * r.min(mu) {
            return z;
        }
    }
}

/// Deterministic interior point with a safe margin.
fn interior_point(p: &Pipeline, rng: &mut rand_chacha::ChaCha8Rng) -> C64 {
    let r = p.constants.r_outer;
    loop {
        let rad = 0.8 * r * rand::Rng::random::<f64>(rng).sqrt();
        let ang = TWO_PI * rand::Rng::random::<f64>(rng);
        let z = C64::from_polar(rad, ang);
        let (side, margin) = p.domain.membership(z);
        if side == Side::Interior && margin > 0.25 * r.min(p.constants.mu) {
            return z;
        }
    }
}

fn duality(p: &Pipeline) -> Result<CheckResult> {
    let n = p.system.dimension();
    let mut rng = scenario_rng(p.scenario.seed, TAG_DUALITY);
    let trials = p.scenario.trials.duality;
    let x1s: Vec<DVector<C64>> = (0..trials)
        .map(|_| complex_gaussian_vec(&mut rng, n))
        .collect();
    let x2s: Vec<DVector<C64>> = (0..trials)
        .map(|_| complex_gaussian_vec(&mut rng, n))
        .collect();
    // O_{A,-kappa C} x1 = -kappa O_{A,C} x1
    let f1s = crate::transforms::obs_batch(&p.system, &x1s, &p.contour)?;
    let g2s = obs_star_batch(p, &x2s)?;
    let minus_kappa = C64::new(-p.constants.kappa, 0.0);
    let mut worst: f64 = 0.0;
    let mut worst_est = 0.0f64;
    for t in 0..trials {
        let f = GridFunction {
            values: f1s[t].values.iter().map(|v| v * minus_kappa).collect(),
            side_hint: SideHint::ExtAnalytic,
            decays: true,
        };
        let pairing = delta_pairing(&f, &g2s[t], &p.delta_samples, &p.contour)?;
        let inner: C64 = x2s[t].dotc(&x1s[t]);
        let residual = (inner - pairing.value).norm() / (x1s[t].norm() * x2s[t].norm());
        worst = worst.max(residual);
        worst_est = worst_est.max(pairing.quadrature_error_estimate);
    }
    Ok(CheckResult::new(
        "duality",
        worst,
        tolerance_for(p, "duality"),
        format!("{trials} random pairs; worst quadrature estimate {worst_est:.3e}"),
    ))
}

/// O_{A*,B*} x along the contour: B (zI - A*)^-1 x, batched.
fn obs_star_batch(p: &Pipeline, xs: &[DVector<C64>]) -> Result<Vec<GridFunction>> {
    let n = p.system.dimension();
    let a_star = p.system.a.adjoint();
    let mut out: Vec<Vec<DVector<C64>>> = vec![Vec::with_capacity(p.contour.len()); xs.len()];
    for &z in p.contour.nodes() {
        let mut shifted = -a_star.clone();
        for i in 0..n {
            shifted[(i, i)] += z;
        }
        let lu = shifted.lu();
        for (k, x) in xs.iter().enumerate() {
            let y = lu.solve(x).ok_or(Error::NearSingular {
                residual: f64::INFINITY,
                context: format!("adjoint observation solve at z = {z}"),
            })?;
            out[k].push(DVector::from_iterator(
                n,
                y.iter()
                    .zip(p.system.b_diag.iter())
                    .map(|(v, &b)| C64::new(b, 0.0) * v),
            ));
        }
    }
    Ok(out
        .into_iter()
        .map(|values| GridFunction {
            values,
            side_hint: SideHint::ExtAnalytic,
            decays: true,
        })
        .collect())
}

fn kernel(p: &Pipeline) -> Result<CheckResult> {
    let n = p.system.dimension();
    let mut rng = scenario_rng(p.scenario.seed, TAG_KERNEL);
    let mut worst: f64 = 0.0;
    for _ in 0..p.scenario.trials.kernel {
        let pole = exterior_point(p, &mut rng);
        let u = complex_gaussian_vec(&mut rng, n);
        // g = u/(z - pole) is interior-class; delta g must be annihilated by W
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
        let w = ctrl_transform(&p.system, CtrlInput::Samples(&dg), &p.domain, &p.contour)?;
        let gnorm = e2_norm(&g, &p.contour)?;
        worst = worst.max(w.norm() / gnorm.max(1e-300));
    }
    Ok(CheckResult::new(
        "kernel",
        worst,
        tolerance_for(p, "kernel"),
        format!(
            "||W(delta g)|| / ||g|| over {} rational g",
            p.scenario.trials.kernel
        ),
    ))
}

fn adjointness(p: &Pipeline) -> Result<CheckResult> {
    let n = p.system.dimension();
    let mut rng = scenario_rng(p.scenario.seed, TAG_KERNEL.wrapping_add(100));
    let mut worst: f64 = 0.0;
    for _ in 0..p.scenario.trials.kernel {
        let pole = exterior_point(p, &mut rng);
        let u = complex_gaussian_vec(&mut rng, n);
        let x = complex_gaussian_vec(&mut rng, n);
        let terms = [(pole, u.clone())];
        let wf = ctrl_transform(
            &p.system,
            CtrlInput::Rational(&terms),
            &p.domain,
            &p.contour,
        )?;
        let lhs: C64 = x.dotc(&wf);
        let f = GridFunction::sample(
            &p.contour,
            |z| &u * (z - pole).inv(),
            SideHint::IntAnalytic,
            true,
        );
        let g = obs_star_batch(p, std::slice::from_ref(&x))?.remove(0);
        let rhs = cauchy_pairing(&f, &g, &p.contour)?.value;
        worst = worst.max((lhs - rhs).norm() / (u.norm() * x.norm()));
    }
    Ok(CheckResult::new(
        "adjointness",
        worst,
        tolerance_for(p, "adjointness"),
        "<W f, x> vs Cauchy pairing of f with O_{A*,B*} x on rational f".into(),
    ))
}

fn surjectivity(p: &Pipeline) -> Result<CheckResult> {
    let n = p.system.dimension();
    let r = p.constants.r_outer;
    // straight above and below the vertex region: exterior for both domain
    // cases regardless of how wide the parabola opens near the origin
    let lift = 1.8 * (r + p.constants.mu * p.system.weight.phi_star(0.0));
    let poles = [C64::new(0.0, lift), C64::new(0.1 * r, -1.3 * lift)];
    let mut cols = DMatrix::<C64>::zeros(n, 2 * n);
    for (pi, &pole) in poles.iter().enumerate() {
        for j in 0..n {
            let mut e = DVector::<C64>::zeros(n);
            e[j] = C64::new(1.0, 0.0);
            let terms = [(pole, e)];
            let w = ctrl_transform(
                &p.system,
                CtrlInput::Rational(&terms),
                &p.domain,
                &p.contour,
            )?;
            cols.set_column(pi * n + j, &w);
        }
    }
    let sv = cols.singular_values();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for s in sv.iter() {
        lo = lo.min(*s);
        hi = hi.max(*s);
    }
    Ok(CheckResult::new(
        "surjectivity",
        1e-10 - lo / hi.max(f64::MIN_POSITIVE),
        tolerance_for(p, "surjectivity"),
        format!(
            "2n resolvent columns span the state space (sigma ratio {:.3e})",
            lo / hi
        ),
    ))
}

fn plemelj(p: &Pipeline) -> Result<CheckResult> {
    let mut rng = scenario_rng(p.scenario.seed, TAG_PLEMELJ);
    let tol_mem = tolerance_for(p, "mem_tol");
    let mut misclassified = 0usize;
    for trial in 0..p.scenario.trials.plemelj {
        let interior = trial % 2 == 0;
        let pole = if interior {
            interior_point(p, &mut rng)
        } else {
            exterior_point(p, &mut rng)
        };
        let u = complex_gaussian(&mut rng);
        let f = GridFunction::sample(
            &p.contour,
            |z| DVector::from_vec(vec![u / (z - pole)]),
            SideHint::Unknown,
            true,
        );
        let int_rep = membership_test(&f, &p.contour, &p.domain, SideHint::IntAnalytic, tol_mem)?;
        let ext_rep = membership_test(&f, &p.contour, &p.domain, SideHint::ExtAnalytic, tol_mem)?;
        // interior pole: exterior-class only; exterior pole: interior-class only
        let ok = if interior {
            ext_rep.pass && !int_rep.pass
        } else {
            int_rep.pass && !ext_rep.pass
        };
        if !ok {
            misclassified += 1;
        }
    }
    Ok(CheckResult::new(
        "plemelj",
        misclassified as f64,
        tolerance_for(p, "plemelj"),
        format!(
            "{} trials, alternating pole side",
            p.scenario.trials.plemelj
        ),
    ))
}
