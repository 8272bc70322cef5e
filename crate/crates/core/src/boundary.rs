//! Smirnov-space numerics on the boundary contour: E^2 norms, the Cauchy
//! and delta pairings, Cauchy projections, and the probe-based membership
//! test that stands in for boundary-value analyticity at finite resolution.
//!
//! Functions are represented by node samples only. Conjugate arguments are
//! obtained through the contour's exact conjugation permutation, never by
//! resampling, and every interpolation-like need is routed through the
//! Cauchy projection so there is a single analytic-extension mechanism.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Contour, ParabolicDomain};
use crate::operator::C64;

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Declared analyticity side of a sampled function (advisory; the membership
/// test is the operational check).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SideHint {
    ExtAnalytic,
    IntAnalytic,
    Unknown,
}

/// Vector-valued boundary samples aligned with a contour's nodes.
#[derive(Clone, Debug)]
pub struct GridFunction {
    pub values: Vec<DVector<C64>>,
    pub side_hint: SideHint,
    /// carries an O(1/z) decay tag: tail corrections apply
    pub decays: bool,
}

impl GridFunction {
    pub fn sample(
        contour: &Contour,
        f: impl Fn(C64) -> DVector<C64>,
        side_hint: SideHint,
        decays: bool,
    ) -> Self {
        let values = contour.nodes().iter().map(|&z| f(z)).collect();
        Self {
            values,
            side_hint,
            decays,
        }
    }

    pub fn zeros(contour: &Contour, dim: usize) -> Self {
        Self {
            values: vec![DVector::zeros(dim); contour.len()],
            side_hint: SideHint::Unknown,
            decays: true,
        }
    }

    pub fn dim(&self) -> usize {
        self.values.first().map_or(0, |v| v.len())
    }

    pub fn check_alignment(&self, contour: &Contour) -> Result<()> {
        if self.values.len() != contour.len() {
            return Err(Error::Dimension(format!(
                "grid function has {} samples, contour has {} nodes",
                self.values.len(),
                contour.len()
            )));
        }
        if self
            .values
            .iter()
            .any(|v| v.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()))
        {
            return Err(Error::Domain(
                "grid function carries non-finite entries".into(),
            ));
        }
        Ok(())
    }

    /// Restriction to the surviving nodes of a halved contour.
    pub fn restrict(&self, kept: &[usize]) -> GridFunction {
        GridFunction {
            values: kept.iter().map(|&j| self.values[j].clone()).collect(),
            side_hint: self.side_hint,
            decays: self.decays,
        }
    }

    /// alpha * self + other, pointwise.
    pub fn axpy(&self, alpha: C64, other: &GridFunction) -> GridFunction {
        let values = self
            .values
            .iter()
            .zip(other.values.iter())
            .map(|(a, b)| a * alpha + b)
            .collect();
        GridFunction {
            values,
            side_hint: self.side_hint,
            decays: self.decays && other.decays,
        }
    }
}

/// Matrix-valued samples (the characteristic function on the contour).
#[derive(Clone, Debug)]
pub struct MatrixGridFunction {
    pub values: Vec<nalgebra::DMatrix<C64>>,
}

impl MatrixGridFunction {
    pub fn check_alignment(&self, contour: &Contour) -> Result<()> {
        if self.values.len() != contour.len() {
            return Err(Error::Dimension(format!(
                "matrix grid function has {} samples, contour has {} nodes",
                self.values.len(),
                contour.len()
            )));
        }
        Ok(())
    }

    pub fn restrict(&self, kept: &[usize]) -> MatrixGridFunction {
        MatrixGridFunction {
            values: kept.iter().map(|&j| self.values[j].clone()).collect(),
        }
    }
}

/// A contour pairing value together with the difference between the full and
/// the half-resolution quadrature, as an error estimate.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PairingResult {
    pub value: C64,
    pub quadrature_error_estimate: f64,
}

/// Indices of the outermost decile of nodes by |z| (at least 4).
fn outer_decile(contour: &Contour) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..contour.len()).collect();
    idx.sort_by(|&a, &b| {
        contour.nodes()[b]
            .norm()
            .partial_cmp(&contour.nodes()[a].norm())
            .unwrap()
    });
    let take = (contour.len() / 10).max(4).min(contour.len());
    idx.truncate(take);
    idx
}

/// Sum over open ends of the analytic tail integral of z^-2: the discarded
/// integral of c/z^2 over the truncated tails equals c times this factor.
fn tail_completion(contour: &Contour) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for comp in contour.components() {
        if comp.closed {
            continue;
        }
        let z_start = contour.nodes()[comp.start];
        let z_end = contour.nodes()[comp.end - 1];
        acc += z_end.inv() - z_start.inv();
    }
    acc
}

/// || f ||_{E^2} = sqrt( (1/2pi) int_Gamma ||f||^2 |dz| ), tail-corrected for
/// decaying samples using the certified tail bound.
pub fn e2_norm(f: &GridFunction, contour: &Contour) -> Result<f64> {
    f.check_alignment(contour)?;
    let mut acc = 0.0;
    for (j, v) in f.values.iter().enumerate() {
        acc += v.norm_squared() * contour.arclen()[j];
    }
    if f.decays && contour.tail_bound > 0.0 {
        // mean of ||f z||^2 over the outermost decile approximates the
        // squared z^-1 coefficient
        let idx = outer_decile(contour);
        let coef: f64 = idx
            .iter()
            .map(|&j| f.values[j].norm_squared() * contour.nodes()[j].norm_sqr())
            .sum::<f64>()
            / idx.len() as f64;
        acc += coef * contour.tail_bound;
    }
    Ok((acc / TWO_PI).sqrt())
}

fn pairing_kernel(
    f: &GridFunction,
    g: &GridFunction,
    delta: Option<&MatrixGridFunction>,
    contour: &Contour,
) -> Result<C64> {
    let mut acc = C64::new(0.0, 0.0);
    let node_term = |j: usize| -> C64 {
        let jc = contour.conj_index(j);
        let lhs = match delta {
            Some(d) => &d.values[j] * &f.values[j],
            None => f.values[j].clone(),
        };
        // <lhs, g(conj z)> with the inner product linear in the first slot;
        // dotc conjugates its receiver, so the receiver is g
        g.values[jc].dotc(&lhs)
    };
    for j in 0..contour.len() {
        acc += node_term(j) * contour.dz()[j];
    }
    // analytic completion of the discarded 1/z^2 tail
    if f.decays && g.decays {
        let outer = outer_decile(contour);
        let mut coef = C64::new(0.0, 0.0);
        for &j in &outer {
            coef += node_term(j) * contour.nodes()[j] * contour.nodes()[j];
        }
        coef /= C64::new(outer.len() as f64, 0.0);
        acc += coef * tail_completion(contour);
    }
    Ok(acc / (C64::i() * TWO_PI))
}

/// The Cauchy pairing (1/2pi i) int <f(z), g(conj z)> dz, sesquilinear with
/// the conjugate-linear slot on g. Conjugate samples come from the contour's
/// node-conjugation permutation.
pub fn cauchy_pairing(
    f: &GridFunction,
    g: &GridFunction,
    contour: &Contour,
) -> Result<PairingResult> {
    f.check_alignment(contour)?;
    g.check_alignment(contour)?;
    let value = pairing_kernel(f, g, None, contour)?;
    let (half, kept) = contour.halved();
    let coarse = pairing_kernel(&f.restrict(&kept), &g.restrict(&kept), None, &half)?;
    Ok(PairingResult {
        value,
        quadrature_error_estimate: (value - coarse).norm(),
    })
}

/// The delta pairing (1/2pi i) int <delta(z) f(z), g(conj z)> dz; reduces to
/// the Cauchy pairing when delta is the identity.
pub fn delta_pairing(
    f: &GridFunction,
    g: &GridFunction,
    delta: &MatrixGridFunction,
    contour: &Contour,
) -> Result<PairingResult> {
    f.check_alignment(contour)?;
    g.check_alignment(contour)?;
    delta.check_alignment(contour)?;
    let value = pairing_kernel(f, g, Some(delta), contour)?;
    let (half, kept) = contour.halved();
    let coarse = pairing_kernel(
        &f.restrict(&kept),
        &g.restrict(&kept),
        Some(&delta.restrict(&kept)),
        &half,
    )?;
    Ok(PairingResult {
        value,
        quadrature_error_estimate: (value - coarse).norm(),
    })
}

/// Cauchy integral (1/2pi i) int f(zeta)/(zeta - w) d zeta evaluated from
/// samples, completed over the truncation arcs with the estimated limit of f
/// at infinity (zero for decaying functions, the constant for constants).
///
/// Contract: for f analytic outside with O(1/z) decay this is 0 at interior
/// w and -f(w) at exterior w; for f analytic inside it is f(w) at interior w
/// and 0 at exterior w.
pub fn cauchy_project(f: &GridFunction, contour: &Contour, w: C64) -> Result<DVector<C64>> {
    f.check_alignment(contour)?;
    let dim = f.dim();
    // accuracy guard: w must stay off the discretized curve
    for (j, &z) in contour.nodes().iter().enumerate() {
        if (z - w).norm() < contour.local_spacing(j) {
            return Err(Error::Quadrature(format!(
                "projection point {w} is within one node spacing of the contour"
            )));
        }
    }
    let mut acc = DVector::<C64>::zeros(dim);
    for (j, &z) in contour.nodes().iter().enumerate() {
        let k = contour.dz()[j] / (z - w);
        acc.axpy(k, &f.values[j], C64::new(1.0, 0.0));
    }
    // limit of f at infinity from the outermost nodes; closes the curve for
    // non-decaying (constant-like) samples
    if !contour.closures().is_empty() {
        let idx = outer_decile(contour);
        let mut c_inf = DVector::<C64>::zeros(dim);
        for &j in &idx {
            c_inf += &f.values[j];
        }
        c_inf /= C64::new(idx.len() as f64, 0.0);
        let mut closure_term = C64::new(0.0, 0.0);
        for cl in contour.closures() {
            closure_term += ((cl.to - w) / (cl.from - w)).ln();
        }
        acc.axpy(closure_term, &c_inf, C64::new(1.0, 0.0));
    }
    Ok(acc / (C64::i() * TWO_PI))
}

/// Outcome of the probe-based analyticity test.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct MembershipReport {
    pub pass: bool,
    /// max over probes of the Cauchy-projection norm on the side that must
    /// vanish
    pub residual: f64,
    pub tolerance: f64,
    pub e2: f64,
}

/// Numerical E^2-membership: a function is exterior-analytic when its Cauchy
/// projection vanishes at interior probes (and symmetrically). `tol_mem` is
/// relative to the E^2 norm; 1e-4 is the default used by the harness.
pub fn membership_test(
    f: &GridFunction,
    contour: &Contour,
    domain: &ParabolicDomain,
    side: SideHint,
    tol_mem: f64,
) -> Result<MembershipReport> {
    f.check_alignment(contour)?;
    let probes = match side {
        SideHint::ExtAnalytic => domain.interior_probes(8),
        SideHint::IntAnalytic => domain.exterior_probes(8),
        SideHint::Unknown => {
            return Err(Error::Domain(
                "membership test needs a definite side".into(),
            ))
        }
    };
    if probes.len() < 8 {
        return Err(Error::Geometry(
            "could not place 8 probes for the membership test".into(),
        ));
    }
    let norm = e2_norm(f, contour)?;
    let mut residual: f64 = 0.0;
    for &p in &probes {
        residual = residual.max(cauchy_project(f, contour, p)?.norm());
    }
    let tolerance = tol_mem * norm.max(f64::MIN_POSITIVE);
    Ok(MembershipReport {
        pass: residual <= tolerance,
        residual,
        tolerance,
        e2: norm,
    })
}
