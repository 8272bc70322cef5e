//! Report assembly and machine-readable emission: versioned JSON plus the
//! contour and plot-data CSVs (UTF-8, LF line endings, '.' decimal).

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::ConstantsBundle;
use crate::harness::checks::{Bounds, CheckResult};
use crate::harness::{Pipeline, Scenario};
use crate::operator::C64;

/// Quadrature facts echoed next to the constants.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct QuadratureEcho {
    pub nodes_requested: usize,
    pub nodes_actual: usize,
    pub t_max: f64,
    pub tail_bound: f64,
}

/// The full machine-readable outcome of one scenario run. Serialization is
/// deterministic for a fixed scenario (timings are kept out of the JSON).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub scenario: Scenario,
    pub constants: ConstantsBundle,
    pub quadrature: QuadratureEcho,
    pub bounds: Bounds,
    /// delta_{kappa=1}(0) echo for scalar scenarios (golden-value diagnostic)
    pub scalar_delta1_origin: Option<(f64, f64)>,
    pub checks: Vec<CheckResult>,
    pub all_pass: bool,
    /// wall-clock stage timings; never serialized so reports stay byte-stable
    #[serde(skip)]
    pub timing_ms: Vec<(String, f64)>,
}

/// Assemble the report from a finished pipeline and check results.
pub fn assemble(p: &Pipeline, checks: Vec<CheckResult>, bounds: Bounds) -> Report {
    let all_pass = checks.iter().all(|c| c.pass);
    let scalar_delta1_origin = if p.system.dimension() == 1 {
        scalar_delta1(p)
    } else {
        None
    };
    Report {
        schema_version: 1,
        scenario: p.scenario.clone(),
        constants: p.constants,
        quadrature: QuadratureEcho {
            nodes_requested: p.contour.n_requested,
            nodes_actual: p.contour.len(),
            t_max: p.contour.t_max,
            tail_bound: p.contour.tail_bound,
        },
        bounds,
        scalar_delta1_origin,
        checks,
        all_pass,
        timing_ms: Vec::new(),
    }
}

/// delta at kappa = 1 evaluated at the origin, for scalar scenarios.
fn scalar_delta1(p: &Pipeline) -> Option<(f64, f64)> {
    let mut sys = p.system.clone();
    sys.kappa = 1.0;
    let ev = crate::transforms::CharFunEvaluator::new(
        sys,
        p.domain,
        p.constants.mu1,
        p.constants.sigma_shrink,
    )
    .ok()?;
    let d = ev.delta(C64::new(0.0, 0.0)).ok()?;
    Some((d[(0, 0)].re, d[(0, 0)].im))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(contents.as_bytes())?;
    Ok(())
}

/// Write report.json, contour.csv, delta_singular.csv and eigenvalues.csv
/// into `out_dir`; returns the written paths.
pub fn emit_report(report: &Report, pipeline: &Pipeline, out_dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();

    let json_path = out_dir.join("report.json");
    let mut json = serde_json::to_string_pretty(report)?;
    json.push('\n');
    write_file(&json_path, &json)?;
    written.push(json_path);

    // contour nodes with quadrature weights
    let mut csv = String::from("re_z,im_z,re_dz,im_dz,abs_dz\n");
    for (j, z) in pipeline.contour.nodes().iter().enumerate() {
        let dz = pipeline.contour.dz()[j];
        csv.push_str(&format!(
            "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}\n",
            z.re,
            z.im,
            dz.re,
            dz.im,
            pipeline.contour.arclen()[j]
        ));
    }
    let contour_path = out_dir.join("contour.csv");
    write_file(&contour_path, &csv)?;
    written.push(contour_path);

    // singular values of delta along the contour, against arc length
    let mut csv = String::from("arclength,sigma_min,sigma_max\n");
    let mut s = 0.0;
    for (j, d) in pipeline.delta_samples.values.iter().enumerate() {
        s += pipeline.contour.arclen()[j];
        let sv = d.singular_values();
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for v in sv.iter() {
            lo = lo.min(*v);
            hi = hi.max(*v);
        }
        csv.push_str(&format!("{:.17e},{:.17e},{:.17e}\n", s, lo, hi));
    }
    let delta_path = out_dir.join("delta_singular.csv");
    write_file(&delta_path, &csv)?;
    written.push(delta_path);

    // eigenvalues of A with their interior margins
    let mut csv = String::from("re,im,margin\n");
    if let Some(eigs) = pipeline.system.a.clone().schur().eigenvalues() {
        for &lam in eigs.iter() {
            let (_, margin) = pipeline.domain.membership(lam);
            csv.push_str(&format!(
                "{:.17e},{:.17e},{:.17e}\n",
                lam.re, lam.im, margin
            ));
        }
    }
    let eig_path = out_dir.join("eigenvalues.csv");
    write_file(&eig_path, &csv)?;
    written.push(eig_path);

    Ok(written)
}

/// One human-readable line per check, as printed by the CLI.
pub fn render_lines(report: &Report) -> String {
    let mut out = String::new();
    for c in &report.checks {
        out.push_str(&format!(
            "{} {:<24} residual {:>12.4e}  tol {:>9.1e}  {}\n",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.residual,
            c.tolerance,
            c.detail
        ));
    }
    out.push_str(&format!(
        "{}: {} of {} checks passed\n",
        if report.all_pass { "OK" } else { "FAILED" },
        report.checks.iter().filter(|c| c.pass).count(),
        report.checks.len()
    ));
    out
}
