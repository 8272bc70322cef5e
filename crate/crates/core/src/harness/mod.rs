//! Scenario-driven verification: assembles the full pipeline (constants,
//! enclosure, contour, characteristic function), runs the theorem-level
//! checks, and emits machine-readable reports.

pub mod checks;
pub mod report;
pub mod scenario;

pub use checks::{run_checks, CheckResult};
pub use report::{emit_report, Report};
pub use scenario::Scenario;

use crate::boundary::MatrixGridFunction;
use crate::error::{Error, Result};
use crate::geometry::{
    build_contour, kappa0_of, mu0_of, mu1_search, norm_probe_set, pick_constants, r0_search,
    r_search, separation_check, t0_of, weighted_resolvent_sups, ConstantsBundle, Contour,
    ParabolicDomain,
};
use crate::operator::{build_system, op_norm, SpectralDiagonal, SystemTriple, WeightFamily};
use crate::transforms::CharFunEvaluator;

/// Everything the checks need, assembled once per scenario.
pub struct Pipeline {
    pub scenario: Scenario,
    pub system: SystemTriple,
    pub constants: ConstantsBundle,
    pub domain: ParabolicDomain,
    pub contour: Contour,
    pub evaluator: CharFunEvaluator,
    pub delta_samples: MatrixGridFunction,
}

/// Truncation abscissa achieving the requested certified tail bound, by
/// doubling from 10 R.
pub fn t_max_for_tail(weight: &WeightFamily, mu: f64, r: f64, tail_target: f64) -> Result<f64> {
    let ends = match weight.domain_case {
        crate::operator::DomainCase::HalfLine => 2.0,
        crate::operator::DomainCase::EvenOnR => 4.0,
    };
    let mut t = 10.0 * r.max(1.0);
    for _ in 0..128 {
        let slope = mu * weight.phi_star_deriv(t).abs();
        if ends * (1.0 + slope * slope).sqrt() / t <= tail_target {
            return Ok(t);
        }
        t *= 2.0;
    }
    Err(Error::Infeasible(format!(
        "tail target {tail_target} unreachable"
    )))
}

/// Assemble the full pipeline: constants chain, enclosure, contour, system
/// and characteristic-function evaluator. Aborts naming the violated
/// inequality when any precondition of the chain fails.
pub fn build_pipeline(scenario: &Scenario) -> Result<Pipeline> {
    let weight = WeightFamily::power_affine(scenario.alpha, scenario.domain_case)?;
    let eigenvalues = scenario.realize_spectrum()?;
    let a0 = SpectralDiagonal::new(eigenvalues, scenario.domain_case)?;
    let n = a0.dimension();
    if n > 64 {
        return Err(Error::Dimension(format!(
            "supported envelope is n <= 64, got {n}"
        )));
    }
    let f = scenario.realize_perturbation(n)?;
    let norm_f = op_norm(&f);

    let ess = scenario.ess_surrogate;
    let k0 = weight.k0();
    let mu0 = mu0_of(ess, k0)?;
    let mu = scenario.mu.unwrap_or_else(|| (2.0 * mu0).max(1.0));
    if mu <= mu0 {
        return Err(Error::Infeasible(format!(
            "scenario violates mu > mu0: mu = {mu}, mu0 = {mu0}"
        )));
    }
    let (r_prime, k) = pick_constants(mu, ess, k0)?;
    let r0 = r0_search(mu, r_prime, &weight)?;
    let ell = scenario.ell.unwrap_or_else(|| (1.25 * norm_f).max(1.0));
    if ell <= norm_f {
        return Err(Error::ConstantViolation(format!(
            "ell = {ell} must exceed ||F|| = {norm_f}"
        )));
    }

    // R and eps by doubling; the probe set needs only (A0, psi, F)
    let probe_system = build_system(a0.clone(), weight, f.clone(), 0.0, ell)?;
    let t_max_probe = t_max_for_tail(&weight, mu, r0, scenario.quadrature.tail_target.max(1e-9))?;
    let rs = r_search(&probe_system, r0, mu, scenario.eps_target, t_max_probe)?;

    let mu1 = mu1_search(mu, rs.r_outer, &weight)?;
    let kappa0 = kappa0_of(ell, mu1, &weight);
    let kappa = scenario
        .kappa_override
        .unwrap_or(scenario.kappa_sign as f64 * scenario.kappa_factor * kappa0);
    separation_check(kappa, mu1, ell, &weight, 40)?;

    let domain = ParabolicDomain::new(mu, rs.r_outer, weight)?;

    // shrink parameter: halve until the norm bounds still hold on the shrunk
    // boundary (the certified region of delta^-1)
    let mut sigma = 0.05 * rs.r_outer.min(mu);
    let mut sigma_ok = false;
    for _ in 0..20 {
        let shrunk = domain.shrink(sigma)?;
        let probes = norm_probe_set(&shrunk, t_max_probe)?;
        let sups = weighted_resolvent_sups(&probe_system, &probes)?;
        if sups.0 <= 1.0 - scenario.eps_target && sups.1 <= 1.0 - scenario.eps_target {
            sigma_ok = true;
            break;
        }
        sigma *= 0.5;
    }
    if !sigma_ok {
        return Err(Error::Infeasible(
            "no shrink parameter keeps the norm bounds on the shrunk boundary".into(),
        ));
    }

    let system = build_system(a0, weight, f, kappa, ell)?;
    let t_max = match scenario.quadrature.t_max {
        Some(t) => t,
        None => t_max_for_tail(&weight, mu, rs.r_outer, scenario.quadrature.tail_target)?,
    };
    let contour = build_contour(&domain, t_max, scenario.quadrature.nodes)?;
    let evaluator = CharFunEvaluator::new(system.clone(), domain, mu1, sigma)?;
    let delta_samples = evaluator.delta_on_contour(&contour)?;

    let constants = ConstantsBundle {
        ess,
        k0,
        mu0,
        mu,
        r_prime,
        k,
        r0,
        r_outer: rs.r_outer,
        eps: rs.eps,
        mu1,
        ell,
        kappa0,
        kappa,
        sigma_shrink: sigma,
        t0: t0_of(k, &weight),
    };
    constants.validate()?;

    Ok(Pipeline {
        scenario: scenario.clone(),
        system,
        constants,
        domain,
        contour,
        evaluator,
        delta_samples,
    })
}

/// Build the pipeline, run every enabled check, and assemble the report.
/// Stage timings ride along in the report but stay out of its serialization.
pub fn run_scenario(scenario: &Scenario) -> Result<Report> {
    let t0 = std::time::Instant::now();
    let pipeline = build_pipeline(scenario)?;
    let t_build = t0.elapsed();
    let (results, bounds) = run_checks(&pipeline)?;
    let t_checks = t0.elapsed() - t_build;
    let mut report = report::assemble(&pipeline, results, bounds);
    report.timing_ms = vec![
        ("pipeline".into(), t_build.as_secs_f64() * 1e3),
        ("checks".into(), t_checks.as_secs_f64() * 1e3),
    ];
    Ok(report)
}
