//! The model maps: the observation transform, the generalized
//! characteristic function delta_kappa and its inverse I + Phi, the
//! comparison factor H, truncated multiplication with its resolvent, the
//! control transform W, and the rational H-infinity calculus.

use nalgebra::{DMatrix, DVector};

use crate::boundary::{
    cauchy_project, membership_test, GridFunction, MatrixGridFunction, MembershipReport, SideHint,
};
use crate::error::{Error, Result};
use crate::geometry::{Contour, ParabolicDomain, Side};
use crate::operator::{op_norm, resolvent_dense, SystemTriple, C64};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Evaluator for delta_kappa(z) = [A_k - zI + i phi F]^-1 [A0 - zI + i phi F]
/// and its certified inverse I + Phi. Carries the enclosure geometry so the
/// certified-region guards can be enforced.
#[derive(Clone, Debug)]
pub struct CharFunEvaluator {
    pub system: SystemTriple,
    pub domain: ParabolicDomain,
    pub mu1: f64,
    pub sigma_shrink: f64,
}

impl CharFunEvaluator {
    pub fn new(
        system: SystemTriple,
        domain: ParabolicDomain,
        mu1: f64,
        sigma_shrink: f64,
    ) -> Result<Self> {
        if mu1 <= domain.mu {
            return Err(Error::ConstantViolation(format!(
                "mu1 = {mu1} must exceed mu = {}",
                domain.mu
            )));
        }
        if sigma_shrink <= 0.0 || sigma_shrink >= domain.mu.min(domain.r) {
            return Err(Error::ConstantViolation(format!(
                "shrink parameter sigma = {sigma_shrink} out of range"
            )));
        }
        Ok(Self {
            system,
            domain,
            mu1,
            sigma_shrink,
        })
    }

    pub fn kappa(&self) -> f64 {
        self.system.kappa
    }

    fn dimension(&self) -> usize {
        self.system.dimension()
    }

    /// i phi(A0) F, the common off-diagonal block of both delta factors.
    fn i_phi_f(&self) -> DMatrix<C64> {
        let n = self.dimension();
        let phi = self.system.phi_diag();
        let mut m = DMatrix::<C64>::zeros(n, n);
        for r in 0..n {
            for c in 0..n {
                m[(r, c)] = C64::i() * C64::new(phi[r], 0.0) * self.system.f[(r, c)];
            }
        }
        m
    }

    /// delta_kappa(z) by the defining quotient of the two affine factors.
    pub fn delta(&self, z: C64) -> Result<DMatrix<C64>> {
        let n = self.dimension();
        let ipf = self.i_phi_f();
        let ak = self.system.a_kappa_diag();
        let mut m1 = ipf.clone();
        let mut m2 = ipf;
        for i in 0..n {
            m1[(i, i)] += ak[i] - z;
            m2[(i, i)] += C64::new(self.system.a0.eigenvalues()[i], 0.0) - z;
        }
        let lu = m1.clone().lu();
        let out = lu.solve(&m2).ok_or(Error::NearSingular {
            residual: f64::INFINITY,
            context: format!("delta factor A_kappa - zI + i phi F at z = {z}"),
        })?;
        let residual = (&m1 * &out - &m2).norm();
        if residual > 1e-9 * (1.0 + m1.norm() * out.norm()) {
            return Err(Error::NearSingular {
                residual,
                context: format!("delta evaluation at z = {z}"),
            });
        }
        Ok(out)
    }

    /// The equivalent resolvent form
    /// delta(z) = I - i kappa [I + i phi (A_k - z)^-1 F]^-1 (A_k - z)^-1 phi,
    /// with the bracket conditioning checked against the certified bound
    /// 1/(1 - ||F||/ell).
    pub fn delta_alt(&self, z: C64) -> Result<DMatrix<C64>> {
        let n = self.dimension();
        let phi = self.system.phi_diag();
        let ak = self.system.a_kappa_diag();
        let mut bracket = DMatrix::<C64>::identity(n, n);
        for r in 0..n {
            let scale = C64::i() * C64::new(phi[r], 0.0) / (ak[r] - z);
            for c in 0..n {
                bracket[(r, c)] += scale * self.system.f[(r, c)];
            }
        }
        let inv = bracket
            .clone()
            .lu()
            .solve(&DMatrix::<C64>::identity(n, n))
            .ok_or(Error::NearSingular {
                residual: f64::INFINITY,
                context: "delta_alt bracket".into(),
            })?;
        let certified = 1.0 / (1.0 - op_norm(&self.system.f) / self.system.ell);
        let inv_norm = op_norm(&inv);
        if inv_norm > 1.05 * certified {
            return Err(Error::ConstantViolation(format!(
                "bracket inverse norm {inv_norm:.3e} exceeds certified bound {certified:.3e} at z = {z}"
            )));
        }
        let mut out = DMatrix::<C64>::identity(n, n);
        for r in 0..n {
            for c in 0..n {
                let col_scale = C64::new(phi[c], 0.0) / (ak[c] - z);
                out[(r, c)] -=
                    C64::i() * C64::new(self.system.kappa, 0.0) * inv[(r, c)] * col_scale;
            }
        }
        Ok(out)
    }

    /// Transfer function Phi(z) = kappa C (A - zI)^-1 B of (A, B, -kappa C).
    pub fn transfer(&self, z: C64) -> Result<DMatrix<C64>> {
        let n = self.dimension();
        let res = self
            .system
            .resolvent(z, crate::operator::ResolventMode::Direct)?;
        let mut out = DMatrix::<C64>::zeros(n, n);
        let b = &self.system.b_diag;
        for r in 0..n {
            for c in 0..n {
                // C = i psi, B = psi, both diagonal
                out[(r, c)] = C64::new(self.system.kappa, 0.0)
                    * C64::i()
                    * C64::new(b[r], 0.0)
                    * res[(r, c)]
                    * C64::new(b[c], 0.0);
            }
        }
        Ok(out)
    }

    /// delta(z)^-1 = I + Phi(z), certified on the widened parabola minus the
    /// shrunk enclosure and on the exterior; inside the shrunk enclosure
    /// delta can be singular (at eigenvalues of A), so the call is refused.
    pub fn delta_inverse(&self, z: C64) -> Result<DMatrix<C64>> {
        let shrunk = self.domain.shrink(self.sigma_shrink)?;
        if shrunk.membership(z).0 == Side::Interior {
            return Err(Error::ConstantViolation(format!(
                "z = {z} lies inside the shrunk enclosure where delta^-1 = I + Phi is not certified"
            )));
        }
        let n = self.dimension();
        Ok(DMatrix::<C64>::identity(n, n) + self.transfer(z)?)
    }

    /// delta sampled at every contour node.
    pub fn delta_on_contour(&self, contour: &Contour) -> Result<MatrixGridFunction> {
        let values = contour
            .nodes()
            .iter()
            .map(|&z| self.delta(z))
            .collect::<Result<Vec<_>>>()?;
        Ok(MatrixGridFunction { values })
    }

    /// Relative smallest singular value of delta(z); points below 1e-8 count
    /// as the spectrum of delta.
    pub fn delta_spec_distance(&self, z: C64) -> Result<f64> {
        let d = self.delta(z)?;
        let sv = d.singular_values();
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for s in sv.iter() {
            lo = lo.min(*s);
            hi = hi.max(*s);
        }
        Ok(lo / hi.max(f64::MIN_POSITIVE))
    }
}

/// H(z) = I + C (A0 - zI)^-1 B F = I + i diag(phi/(t - z)) F; the comparison
/// factor linking the unperturbed and perturbed observation transforms.
pub fn h_eval(system: &SystemTriple, z: C64) -> Result<DMatrix<C64>> {
    let n = system.dimension();
    let r0 = system.a0.resolvent_diag(z)?;
    let phi = system.phi_diag();
    let mut out = DMatrix::<C64>::identity(n, n);
    for r in 0..n {
        let scale = C64::i() * C64::new(phi[r], 0.0) * r0[r];
        for c in 0..n {
            out[(r, c)] += scale * system.f[(r, c)];
        }
    }
    Ok(out)
}

fn apply_c(system: &SystemTriple, y: &DVector<C64>) -> DVector<C64> {
    DVector::from_iterator(
        y.len(),
        y.iter()
            .zip(system.b_diag.iter())
            .map(|(v, &b)| C64::i() * C64::new(b, 0.0) * v),
    )
}

impl SystemTriple {
    /// (zI - A)^-1 x, the resolvent in the observation convention.
    pub fn resolvent_apply_neg(&self, z: C64, x: &DVector<C64>) -> Result<DVector<C64>> {
        Ok(-self.resolvent_apply(z, x)?)
    }
}

/// Observation transform samples C (zI - A)^-1 x at the given points.
pub fn obs_transform(
    system: &SystemTriple,
    x: &DVector<C64>,
    points: &[C64],
) -> Result<Vec<DVector<C64>>> {
    points
        .iter()
        .map(|&z| {
            let y = system.resolvent_apply_neg(z, x)?;
            Ok(apply_c(system, &y))
        })
        .collect()
}

/// Observation transform along the contour, as an exterior-class grid
/// function with O(1/z) decay.
pub fn obs_on_contour(
    system: &SystemTriple,
    x: &DVector<C64>,
    contour: &Contour,
) -> Result<GridFunction> {
    let values = obs_transform(system, x, contour.nodes())?;
    Ok(GridFunction {
        values,
        side_hint: SideHint::ExtAnalytic,
        decays: true,
    })
}

/// Batched observation transform: one factorization per contour node shared
/// across all state vectors.
pub fn obs_batch(
    system: &SystemTriple,
    xs: &[DVector<C64>],
    contour: &Contour,
) -> Result<Vec<GridFunction>> {
    let n = system.dimension();
    let mut out: Vec<Vec<DVector<C64>>> = vec![Vec::with_capacity(contour.len()); xs.len()];
    for &z in contour.nodes() {
        let mut shifted = -system.a.clone();
        for i in 0..n {
            shifted[(i, i)] += z;
        }
        let lu = shifted.lu();
        for (k, x) in xs.iter().enumerate() {
            let y = lu.solve(x).ok_or(Error::NearSingular {
                residual: f64::INFINITY,
                context: format!("batched observation solve at z = {z}"),
            })?;
            out[k].push(apply_c(system, &y));
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

/// An element of the observation model space: exterior-class samples f
/// together with f_tilde = delta f (interior-class) and the cached
/// membership certificates for both conditions.
#[derive(Clone, Debug)]
pub struct ModelElement {
    pub f: GridFunction,
    pub f_tilde: GridFunction,
    pub membership_ext: MembershipReport,
    pub membership_int: MembershipReport,
    /// the state vector when f is in the range of the observation transform;
    /// enables exact constants and extensions instead of tail estimation
    pub source: Option<DVector<C64>>,
}

impl ModelElement {
    /// Wrap exterior-class samples: computes f_tilde = delta f node-wise and
    /// runs both membership tests.
    pub fn new(
        f: GridFunction,
        delta: &MatrixGridFunction,
        contour: &Contour,
        domain: &ParabolicDomain,
        tol_mem: f64,
        source: Option<DVector<C64>>,
    ) -> Result<Self> {
        f.check_alignment(contour)?;
        delta.check_alignment(contour)?;
        let values: Vec<DVector<C64>> = f
            .values
            .iter()
            .zip(delta.values.iter())
            .map(|(v, d)| d * v)
            .collect();
        let f_tilde = GridFunction {
            values,
            side_hint: SideHint::IntAnalytic,
            decays: f.decays,
        };
        let membership_ext = membership_test(&f, contour, domain, SideHint::ExtAnalytic, tol_mem)?;
        let membership_int =
            membership_test(&f_tilde, contour, domain, SideHint::IntAnalytic, tol_mem)?;
        Ok(Self {
            f,
            f_tilde,
            membership_ext,
            membership_int,
            source,
        })
    }

    /// The element O_{A,C} x of the model space.
    pub fn from_obs(
        evaluator: &CharFunEvaluator,
        x: &DVector<C64>,
        delta: &MatrixGridFunction,
        contour: &Contour,
        tol_mem: f64,
    ) -> Result<Self> {
        let f = obs_on_contour(&evaluator.system, x, contour)?;
        Self::new(
            f,
            delta,
            contour,
            &evaluator.domain,
            tol_mem,
            Some(x.clone()),
        )
    }

    /// Both membership certificates hold: f is in the model space.
    pub fn is_member(&self) -> bool {
        self.membership_ext.pass && self.membership_int.pass
    }

    /// Defect of f_tilde = delta f as computed (should be zero to roundoff).
    pub fn tilde_defect(&self, delta: &MatrixGridFunction) -> f64 {
        let mut worst: f64 = 0.0;
        for (j, v) in self.f.values.iter().enumerate() {
            let want = &delta.values[j] * v;
            let got = &self.f_tilde.values[j];
            worst = worst.max((want - got).norm() / (1.0 + got.norm()));
        }
        worst
    }
}

/// Truncated multiplication (M_z f)(z) = z f(z) - c: extracts the unique
/// constant c keeping z f - c exterior-class, returns it with the shifted
/// element. For observation elements c = C x exactly; otherwise c comes from
/// a two-term fit of z f(z) ~ c + d/z over the outermost node decile.
pub fn truncated_mult(
    elem: &ModelElement,
    evaluator: &CharFunEvaluator,
    delta: &MatrixGridFunction,
    contour: &Contour,
    tol_mem: f64,
) -> Result<(DVector<C64>, ModelElement)> {
    let dim = elem.f.dim();
    let c = match &elem.source {
        Some(x) => apply_c(&evaluator.system, x),
        None => {
            // least-squares fit of z f = c + d/z on the outer decile
            let mut idx: Vec<usize> = (0..contour.len()).collect();
            idx.sort_by(|&a, &b| {
                contour.nodes()[b]
                    .norm()
                    .partial_cmp(&contour.nodes()[a].norm())
                    .unwrap()
            });
            idx.truncate((contour.len() / 10).max(8));
            let mut g00 = C64::new(0.0, 0.0);
            let mut g01 = C64::new(0.0, 0.0);
            let mut g11 = C64::new(0.0, 0.0);
            for &j in &idx {
                let w = contour.nodes()[j].inv();
                g00 += C64::new(1.0, 0.0);
                g01 += w;
                g11 += w.conj() * w;
            }
            let mut c = DVector::<C64>::zeros(dim);
            for comp in 0..dim {
                let mut b0 = C64::new(0.0, 0.0);
                let mut b1 = C64::new(0.0, 0.0);
                for &j in &idx {
                    let zf = contour.nodes()[j] * elem.f.values[j][comp];
                    b0 += zf;
                    b1 += contour.nodes()[j].inv().conj() * zf;
                }
                // 2x2 hermitian normal equations for (c, d)
                let det = g00 * g11 - g01 * g01.conj();
                c[comp] = (b0 * g11 - g01 * b1) / det;
            }
            c
        }
    };
    let shifted_values: Vec<DVector<C64>> = elem
        .f
        .values
        .iter()
        .zip(contour.nodes().iter())
        .map(|(v, &z)| {
            let mut out = v * z;
            out -= &c;
            out
        })
        .collect();
    let shifted = GridFunction {
        values: shifted_values,
        side_hint: SideHint::ExtAnalytic,
        decays: true,
    };
    let source = elem.source.as_ref().map(|x| &evaluator.system.a * x);
    let elem2 = ModelElement::new(shifted, delta, contour, &evaluator.domain, tol_mem, source)?;
    if !elem2.is_member() {
        return Err(Error::Domain(format!(
            "z f - c leaves the model space (residuals {:.3e} / {:.3e}): f not in D(M_z)",
            elem2.membership_ext.residual, elem2.membership_int.residual
        )));
    }
    Ok((c, elem2))
}

/// Resolvent of truncated multiplication: (M_z - lambda)^-1 f at the nodes is
/// (f(z) - f(lambda))/(z - lambda), with f(lambda) from the exact formula for
/// observation elements, the Cauchy projection outside, or the interior
/// extension delta(lambda)^-1 f_tilde(lambda) inside (off the spectrum of
/// delta).
pub fn model_resolvent(
    elem: &ModelElement,
    lambda: C64,
    evaluator: &CharFunEvaluator,
    delta: &MatrixGridFunction,
    contour: &Contour,
    tol_mem: f64,
) -> Result<ModelElement> {
    let interior = evaluator.domain.membership(lambda).0 == Side::Interior;
    if interior {
        let rel = evaluator.delta_spec_distance(lambda)?;
        if rel < 1e-8 {
            return Err(Error::SpectralPoint(format!(
                "delta({lambda}) is numerically singular (relative sigma_min = {rel:.3e})"
            )));
        }
    }
    let f_lambda: DVector<C64> = match &elem.source {
        Some(x) => {
            let y = evaluator.system.resolvent_apply_neg(lambda, x)?;
            apply_c(&evaluator.system, &y)
        }
        None if !interior => -cauchy_project(&elem.f, contour, lambda)?,
        None => {
            let ft = cauchy_project(&elem.f_tilde, contour, lambda)?;
            let d = evaluator.delta(lambda)?;
            d.lu().solve(&ft).ok_or(Error::SpectralPoint(format!(
                "delta({lambda}) not invertible for the interior extension"
            )))?
        }
    };
    let values: Vec<DVector<C64>> = elem
        .f
        .values
        .iter()
        .zip(contour.nodes().iter())
        .map(|(v, &z)| {
            let mut out = v.clone();
            out -= &f_lambda;
            out / (z - lambda)
        })
        .collect();
    let g = GridFunction {
        values,
        side_hint: SideHint::ExtAnalytic,
        decays: true,
    };
    let source = match &elem.source {
        Some(x) => Some(evaluator.system.resolvent_apply(lambda, x)?),
        None => None,
    };
    ModelElement::new(g, delta, contour, &evaluator.domain, tol_mem, source)
}

/// Input to the control transform: a rational interior-class function as a
/// pole/vector list, or boundary samples.
pub enum CtrlInput<'a> {
    /// sum_j u_j / (z - lambda_j) with every lambda_j exterior
    Rational(&'a [(C64, DVector<C64>)]),
    /// interior-class samples with O(1/z) decay
    Samples(&'a GridFunction),
}

/// The control transform W_{A,B}: resolvent superposition on rational input,
/// -(1/2pi i) int (A - zeta)^-1 B f(zeta) d zeta on sampled input.
pub fn ctrl_transform(
    system: &SystemTriple,
    input: CtrlInput<'_>,
    domain: &ParabolicDomain,
    contour: &Contour,
) -> Result<DVector<C64>> {
    let n = system.dimension();
    match input {
        CtrlInput::Rational(terms) => {
            let mut acc = DVector::<C64>::zeros(n);
            for (pole, u) in terms {
                if domain.membership(*pole).0 == Side::Interior {
                    return Err(Error::Domain(format!(
                        "control-transform pole {pole} lies inside the spectral enclosure"
                    )));
                }
                let bu = DVector::from_iterator(
                    n,
                    u.iter()
                        .zip(system.b_diag.iter())
                        .map(|(v, &b)| C64::new(b, 0.0) * v),
                );
                acc += system.resolvent_apply(*pole, &bu)?;
            }
            Ok(acc)
        }
        CtrlInput::Samples(f) => {
            f.check_alignment(contour)?;
            let mut outer: Vec<usize> = (0..contour.len()).collect();
            outer.sort_by(|&a, &b| {
                contour.nodes()[b]
                    .norm()
                    .partial_cmp(&contour.nodes()[a].norm())
                    .unwrap()
            });
            outer.truncate((contour.len() / 10).max(4));
            let mut acc = DVector::<C64>::zeros(n);
            let mut outer_coef = DVector::<C64>::zeros(n);
            for (j, &z) in contour.nodes().iter().enumerate() {
                let bf = DVector::from_iterator(
                    n,
                    f.values[j]
                        .iter()
                        .zip(system.b_diag.iter())
                        .map(|(v, &b)| C64::new(b, 0.0) * v),
                );
                let term = system.resolvent_apply(z, &bf)?;
                acc.axpy(contour.dz()[j], &term, C64::new(1.0, 0.0));
                if outer.contains(&j) {
                    outer_coef.axpy(z * z, &term, C64::new(1.0, 0.0));
                }
            }
            // analytic completion of the 1/z^2 tail
            if f.decays {
                outer_coef /= C64::new(outer.len() as f64, 0.0);
                let mut completion = C64::new(0.0, 0.0);
                for comp in contour.components() {
                    if !comp.closed {
                        completion +=
                            contour.nodes()[comp.end - 1].inv() - contour.nodes()[comp.start].inv();
                    }
                }
                acc.axpy(completion, &outer_coef, C64::new(1.0, 0.0));
            }
            Ok(-acc / (C64::i() * TWO_PI))
        }
    }
}

/// A rational scalar function c0 + sum_j r_j/(z - w_j) with simple poles.
#[derive(Clone, Debug)]
pub struct RationalFunction {
    pub constant: C64,
    pub terms: Vec<(C64, C64)>,
}

impl RationalFunction {
    pub fn eval(&self, z: C64) -> C64 {
        let mut acc = self.constant;
        for &(pole, res) in &self.terms {
            acc += res / (z - pole);
        }
        acc
    }

    /// max |q| over the contour nodes and the limit at infinity.
    pub fn sup_on_contour(&self, contour: &Contour) -> f64 {
        let mut sup = self.constant.norm();
        for &z in contour.nodes() {
            sup = sup.max(self.eval(z).norm());
        }
        sup
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CalculusMode {
    /// partial fractions over resolvents
    Direct,
    /// Cauchy integral over the closed contour (nodes plus truncation arcs)
    Contour,
}

/// q(A) for rational q in H-infinity of the enclosure (poles exterior).
pub fn rational_calculus(
    system: &SystemTriple,
    q: &RationalFunction,
    mode: CalculusMode,
    domain: &ParabolicDomain,
    contour: &Contour,
) -> Result<DMatrix<C64>> {
    let n = system.dimension();
    for &(pole, _) in &q.terms {
        let (side, margin) = domain.membership(pole);
        if side == Side::Interior || margin.abs() < 1e-12 {
            return Err(Error::Domain(format!(
                "calculus pole {pole} lies in the closed spectral enclosure"
            )));
        }
    }
    match mode {
        CalculusMode::Direct => {
            let mut acc = DMatrix::<C64>::identity(n, n) * q.constant;
            for &(pole, res) in &q.terms {
                acc += resolvent_dense(&system.a, pole)? * res;
            }
            Ok(acc)
        }
        CalculusMode::Contour => {
            // (1/2pi i) oint q(zeta) (zeta I - A)^-1 d zeta over the curve
            // closed through the truncation arcs
            let mut acc = DMatrix::<C64>::zeros(n, n);
            let neg_res = |z: C64| -> Result<DMatrix<C64>> {
                // (zI - A)^-1 = -(A - zI)^-1
                Ok(-resolvent_dense(&system.a, z)?)
            };
            for (j, &z) in contour.nodes().iter().enumerate() {
                acc += neg_res(z)? * (q.eval(z) * contour.dz()[j]);
            }
            for cl in contour.closures() {
                for (k, &z) in cl.nodes.iter().enumerate() {
                    acc += neg_res(z)? * (q.eval(z) * cl.dz[k]);
                }
            }
            Ok(acc / (C64::i() * TWO_PI))
        }
    }
}
