//! Python bindings for the carleman laboratory: scenario-driven runs plus
//! direct access to the weight data, the enclosure geometry, and the
//! characteristic function.

use nalgebra::DVector;
use num_complex::Complex;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use carleman::geometry::winding_number;
use carleman::harness::{build_pipeline, run_checks, Pipeline, Scenario};
use carleman::operator::{weight_info as weight_info_rs, DomainCase, WeightFamily};
use carleman::C64;

fn pyerr(e: carleman::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_case(domain_case: &str) -> PyResult<DomainCase> {
    match domain_case {
        "half_line" => Ok(DomainCase::HalfLine),
        "even_on_r" => Ok(DomainCase::EvenOnR),
        other => Err(PyValueError::new_err(format!(
            "domain_case must be 'half_line' or 'even_on_r', got '{other}'"
        ))),
    }
}

/// (psi(x), phi(x), k0) for the power-affine weight (1 + |x|)^alpha.
#[pyfunction]
fn weight_info(alpha: f64, domain_case: &str, x: f64) -> PyResult<(f64, f64, f64)> {
    let family = WeightFamily::power_affine(alpha, parse_case(domain_case)?).map_err(pyerr)?;
    weight_info_rs(&family, x).map_err(pyerr)
}

/// mu0 = ess / sqrt(1 - ess^2 k0^2).
#[pyfunction]
fn mu0_of(ess: f64, k0: f64) -> PyResult<f64> {
    carleman::geometry::mu0_of(ess, k0).map_err(pyerr)
}

/// kappa0 = ell + mu1 (2 + a + phi(a)), a = 1 + ell phi(1).
#[pyfunction]
fn kappa0_of(ell: f64, mu1: f64, alpha: f64, domain_case: &str) -> PyResult<f64> {
    let family = WeightFamily::power_affine(alpha, parse_case(domain_case)?).map_err(pyerr)?;
    Ok(carleman::geometry::kappa0_of(ell, mu1, &family))
}

/// Membership of z in Omega_{mu,R}: ("interior" | "exterior", signed margin).
#[pyfunction]
fn membership(
    mu: f64,
    r: f64,
    alpha: f64,
    domain_case: &str,
    z: Complex<f64>,
) -> PyResult<(String, f64)> {
    let family = WeightFamily::power_affine(alpha, parse_case(domain_case)?).map_err(pyerr)?;
    let domain = carleman::geometry::ParabolicDomain::new(mu, r, family).map_err(pyerr)?;
    let (side, margin) = domain.membership(z);
    let name = match side {
        carleman::geometry::Side::Interior => "interior",
        carleman::geometry::Side::Exterior => "exterior",
    };
    Ok((name.to_string(), margin))
}

/// Run a scenario (JSON) through the full check battery; returns the report
/// as a JSON string.
#[pyfunction]
fn run_scenario(scenario_json: &str) -> PyResult<String> {
    let scenario = Scenario::from_json(scenario_json).map_err(pyerr)?;
    let report = carleman::harness::run_scenario(&scenario).map_err(pyerr)?;
    serde_json::to_string_pretty(&report).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// The built-in scenario fixtures as JSON.
#[pyfunction]
fn fixture(name: &str) -> PyResult<String> {
    let s = match name {
        "scalar" => Scenario::scalar_fixture(),
        "n3" => Scenario::fixture_n3(),
        "n3_unperturbed" => Scenario::fixture_n3_unperturbed(),
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown fixture '{other}' (use 'scalar', 'n3' or 'n3_unperturbed')"
            )))
        }
    };
    s.to_json().map_err(pyerr)
}

/// One assembled laboratory: the system, enclosure, contour and the
/// characteristic-function evaluator for a scenario.
#[pyclass]
struct Lab {
    pipeline: Pipeline,
}

#[pymethods]
impl Lab {
    #[new]
    fn new(scenario_json: &str) -> PyResult<Self> {
        let scenario = Scenario::from_json(scenario_json).map_err(pyerr)?;
        Ok(Self {
            pipeline: build_pipeline(&scenario).map_err(pyerr)?,
        })
    }

    /// The constants bundle as JSON.
    fn constants(&self) -> PyResult<String> {
        serde_json::to_string_pretty(&self.pipeline.constants)
            .map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn dimension(&self) -> usize {
        self.pipeline.system.dimension()
    }

    /// delta_kappa(z) as a nested list of complex numbers.
    fn delta(&self, z: Complex<f64>) -> PyResult<Vec<Vec<Complex<f64>>>> {
        let d = self.pipeline.evaluator.delta(z).map_err(pyerr)?;
        Ok(matrix_rows(&d))
    }

    /// delta(z)^-1 = I + Phi(z) on its certified region.
    fn delta_inverse(&self, z: Complex<f64>) -> PyResult<Vec<Vec<Complex<f64>>>> {
        let d = self.pipeline.evaluator.delta_inverse(z).map_err(pyerr)?;
        Ok(matrix_rows(&d))
    }

    /// (A - zI)^-1 by dense solve.
    fn resolvent(&self, z: Complex<f64>) -> PyResult<Vec<Vec<Complex<f64>>>> {
        let r = self
            .pipeline
            .system
            .resolvent(z, carleman::operator::ResolventMode::Direct)
            .map_err(pyerr)?;
        Ok(matrix_rows(&r))
    }

    /// The observation transform C (zI - A)^-1 x at one point.
    fn obs(&self, x: Vec<Complex<f64>>, z: Complex<f64>) -> PyResult<Vec<Complex<f64>>> {
        let xv = DVector::from_vec(x);
        let out =
            carleman::transforms::obs_transform(&self.pipeline.system, &xv, &[z]).map_err(pyerr)?;
        Ok(out[0].iter().cloned().collect())
    }

    /// Contour nodes as (z, dz, |dz|) triples.
    fn contour(&self) -> Vec<(Complex<f64>, Complex<f64>, f64)> {
        let c = &self.pipeline.contour;
        (0..c.len())
            .map(|j| (c.nodes()[j], c.dz()[j], c.arclen()[j]))
            .collect()
    }

    /// Winding number of the contour about w.
    fn winding(&self, w: Complex<f64>) -> Complex<f64> {
        winding_number(&self.pipeline.contour, w)
    }

    /// Eigenvalues of A with their interior margins.
    fn eigenvalues(&self) -> PyResult<Vec<(Complex<f64>, f64)>> {
        let eigs = self
            .pipeline
            .system
            .a
            .clone()
            .schur()
            .eigenvalues()
            .ok_or_else(|| PyValueError::new_err("eigenvalue iteration failed"))?;
        Ok(eigs
            .iter()
            .map(|&lam| {
                let (_, margin) = self.pipeline.domain.membership(lam);
                (lam, margin)
            })
            .collect())
    }

    /// Run the check battery and return the report JSON.
    fn verify(&self) -> PyResult<String> {
        let (results, bounds) = run_checks(&self.pipeline).map_err(pyerr)?;
        let report = carleman::harness::report::assemble(&self.pipeline, results, bounds);
        serde_json::to_string_pretty(&report).map_err(|e| PyValueError::new_err(e.to_string()))
    }
}

fn matrix_rows(m: &nalgebra::DMatrix<C64>) -> Vec<Vec<Complex<f64>>> {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|c| m[(r, c)]).collect())
        .collect()
}

#[pymodule]
fn carleman_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(weight_info, m)?)?;
    m.add_function(wrap_pyfunction!(mu0_of, m)?)?;
    m.add_function(wrap_pyfunction!(kappa0_of, m)?)?;
    m.add_function(wrap_pyfunction!(membership, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(fixture, m)?)?;
    m.add_class::<Lab>()?;
    Ok(())
}
