//! The finite-dimensional operator triple (A, B, C) built from a diagonal
//! self-adjoint part, an admissible weight and a bounded perturbation.
//!
//! Everything here is dense complex linear algebra at desk scale (n <= 64):
//! the self-adjoint part is a real eigenvalue vector, functions of it act
//! entrywise, and `A = A0 + i psi(A0) F psi(A0)` is assembled explicitly.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

/// Largest singular value, used as the operator norm throughout.
pub fn op_norm(m: &DMatrix<C64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().iter().cloned().fold(0.0, f64::max)
}

/// Where the weight lives: an even weight on all of R, or a weight on
/// [0, oo) paired with a spectrum bounded away from zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainCase {
    EvenOnR,
    HalfLine,
}

/// The self-adjoint part: an ordered real spectrum plus the domain-case flag.
#[derive(Clone, Debug)]
pub struct SpectralDiagonal {
    eigenvalues: Vec<f64>,
    domain_case: DomainCase,
    eps0: f64,
}

impl SpectralDiagonal {
    /// Build from an ascending eigenvalue list. In the half-line case every
    /// eigenvalue must be >= some eps0 > 0; the largest valid eps0 (the
    /// smallest eigenvalue) is recorded.
    pub fn new(eigenvalues: Vec<f64>, domain_case: DomainCase) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::Dimension("spectrum must be nonempty".into()));
        }
        if eigenvalues.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Domain("eigenvalues must be sorted ascending".into()));
        }
        if !eigenvalues.iter().all(|t| t.is_finite()) {
            return Err(Error::Domain("eigenvalues must be finite".into()));
        }
        let eps0 = eigenvalues[0];
        if domain_case == DomainCase::HalfLine && eps0 <= 0.0 {
            return Err(Error::Domain(format!(
                "half-line case requires sigma(A0) in [eps0, oo) with eps0 > 0, got min {eps0}"
            )));
        }
        Ok(Self {
            eigenvalues,
            domain_case,
            eps0,
        })
    }

    pub fn dimension(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn domain_case(&self) -> DomainCase {
        self.domain_case
    }

    /// Recorded lower bound of the spectrum (meaningful in the half-line case).
    pub fn eps0(&self) -> f64 {
        self.eps0
    }

    /// Entrywise function of A0 as a real vector.
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> DVector<f64> {
        DVector::from_iterator(self.dimension(), self.eigenvalues.iter().map(|&t| f(t)))
    }

    /// Diagonal of (A0 - z I)^-1; errors when z is within the near-spectrum
    /// tolerance 1e-8 * spectral scale.
    pub fn resolvent_diag(&self, z: C64) -> Result<DVector<C64>> {
        let tol = 1e-8 * self.spectral_scale();
        let mut worst = f64::INFINITY;
        for &t in &self.eigenvalues {
            worst = worst.min((C64::new(t, 0.0) - z).norm());
        }
        if worst <= tol {
            return Err(Error::NearSingular {
                residual: worst,
                context: format!("z = {z} within {tol:.3e} of sigma(A0)"),
            });
        }
        Ok(DVector::from_iterator(
            self.dimension(),
            self.eigenvalues
                .iter()
                .map(|&t| (C64::new(t, 0.0) - z).inv()),
        ))
    }

    /// max(1, max |t_j|): the scale entering near-spectrum tolerances.
    pub fn spectral_scale(&self) -> f64 {
        self.eigenvalues.iter().fold(1.0f64, |m, t| m.max(t.abs()))
    }
}

/// Admissible weight family. `PowerAffine(alpha)` is psi(x) = (1 + |x|)^alpha
/// with 0 < alpha <= 1/2, for which the admissibility conditions (psi >= 1,
/// phi = psi^2 concave, the limit k0 = lim phi(t)/t) hold analytically.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightKind {
    PowerAffine { alpha: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightFamily {
    pub kind: WeightKind,
    pub domain_case: DomainCase,
}

impl WeightFamily {
    pub fn power_affine(alpha: f64, domain_case: DomainCase) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 0.5) {
            return Err(Error::Domain(format!(
                "power-affine weight requires 0 < alpha <= 1/2, got {alpha}"
            )));
        }
        Ok(Self {
            kind: WeightKind::PowerAffine { alpha },
            domain_case,
        })
    }

    pub fn alpha(&self) -> f64 {
        match self.kind {
            WeightKind::PowerAffine { alpha } => alpha,
        }
    }

    fn check_domain(&self, x: f64) -> Result<()> {
        if self.domain_case == DomainCase::HalfLine && x < 0.0 {
            return Err(Error::Domain(format!(
                "weight is defined on [0, oo) in the half-line case, got x = {x}"
            )));
        }
        Ok(())
    }

    /// psi(x); domain error for x < 0 in the half-line case.
    pub fn psi(&self, x: f64) -> Result<f64> {
        self.check_domain(x)?;
        Ok((1.0 + x.abs()).powf(self.alpha()))
    }

    /// phi(x) = psi(x)^2.
    pub fn phi(&self, x: f64) -> Result<f64> {
        self.check_domain(x)?;
        Ok((1.0 + x.abs()).powf(2.0 * self.alpha()))
    }

    /// Even continuation of phi, defined on all of R (used by the widened
    /// parabola and the separation inequalities).
    pub fn phi_star(&self, x: f64) -> f64 {
        (1.0 + x.abs()).powf(2.0 * self.alpha())
    }

    /// d/dx of the even continuation, one-sided 2 alpha sgn(x) at 0.
    pub fn phi_star_deriv(&self, x: f64) -> f64 {
        let a2 = 2.0 * self.alpha();
        a2 * (1.0 + x.abs()).powf(a2 - 1.0) * if x < 0.0 { -1.0 } else { 1.0 }
    }

    /// k0(psi) = lim_{t->oo} psi^2(t)/t: 1 exactly at alpha = 1/2, 0 below.
    pub fn k0(&self) -> f64 {
        if self.alpha() == 0.5 {
            1.0
        } else {
            0.0
        }
    }
}

/// Pointwise weight data: (psi(x), phi(x), k0).
pub fn weight_info(family: &WeightFamily, x: f64) -> Result<(f64, f64, f64)> {
    Ok((family.psi(x)?, family.phi(x)?, family.k0()))
}

/// Sampled verification of the weight laws used downstream: concavity of
/// phi, phi(s t) <= s phi(t) for s > 1, and phi(s + t) <= phi(s) + phi(t).
/// Returns the worst signed slack (>= -1e-12 means the laws hold).
pub fn check_weight_laws(family: &WeightFamily, points: usize) -> f64 {
    let grid: Vec<f64> = (0..points)
        .map(|i| 50.0 * i as f64 / points as f64)
        .collect();
    let phi = |x: f64| family.phi_star(x);
    let mut worst = f64::INFINITY;
    for (i, &s) in grid.iter().enumerate() {
        // pair s with a shifted sweep of t so the (s, t) cloud covers the square
        let t = grid[(i * 7 + 3) % grid.len()];
        for &theta in &[0.0, 0.25, 0.5, 0.75, 1.0] {
            let lhs = phi(theta * s + (1.0 - theta) * t);
            let rhs = theta * phi(s) + (1.0 - theta) * phi(t);
            worst = worst.min(lhs - rhs);
        }
        if s > 1.0 {
            worst = worst.min(s * phi(t) - phi(s * t));
        }
        worst = worst.min(phi(s) + phi(t) - phi(s + t));
    }
    worst
}

/// The essential-norm splitting F = F' + F'' with F'' of minimal rank such
/// that ||F'|| < r'.
#[derive(Clone, Debug)]
pub struct PerturbationSplit {
    pub f: DMatrix<C64>,
    pub ess_surrogate: f64,
    pub r_prime: f64,
    pub f_prime: DMatrix<C64>,
    pub f_dprime: DMatrix<C64>,
    pub rank_dprime: usize,
}

/// Split F by singular-value truncation: F'' keeps the m largest singular
/// triples with m minimal so that ||F - F''|| < r'.
pub fn essential_split(f: &DMatrix<C64>, r_prime: f64) -> Result<PerturbationSplit> {
    if r_prime <= 0.0 {
        return Err(Error::Infeasible(format!(
            "essential split needs r' > 0, got {r_prime}"
        )));
    }
    let n = f.nrows();
    if f.ncols() != n {
        return Err(Error::Dimension("perturbation must be square".into()));
    }
    // singular data through the hermitian eigendecomposition of F^H F: the
    // values at or above r' are well separated from zero, and truncation by
    // the right-singular projection F'' = F P needs no left vectors
    let gram = f.adjoint() * f;
    let eig = nalgebra::SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());

    // smallest m with sigma_{m+1} < r' (residual of the rank-m truncation);
    // singular values within one part in 1e12 of r' count as above it, so
    // re-splitting F' at the same threshold stays at rank zero even when a
    // singular value ties with r' to roundoff
    let cutoff = r_prime * (1.0 - 1e-12);
    let mut rank = 0;
    while rank < n && eig.eigenvalues[order[rank]].max(0.0).sqrt() >= cutoff {
        rank += 1;
    }
    let mut projection = DMatrix::<C64>::zeros(n, n);
    for &idx in order.iter().take(rank) {
        let v = eig.eigenvectors.column(idx);
        for r in 0..n {
            for c in 0..n {
                projection[(r, c)] += v[r] * v[c].conj();
            }
        }
    }
    let f_dprime = f * &projection;
    let f_prime = f - &f_dprime;
    Ok(PerturbationSplit {
        f: f.clone(),
        ess_surrogate: 0.0,
        r_prime,
        f_prime,
        f_dprime,
        rank_dprime: rank,
    })
}

/// How a resolvent is computed: a dense solve of (M - zI) X = I, or the
/// factorization (A - zI)^-1 = (A0 - zI)^-1 (I + L (A0 - zI)^-1)^-1 that
/// is valid on the closed exterior domain.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ResolventMode {
    Direct,
    Factored,
}

/// Dense resolvent (M - zI)^-1 with an a posteriori residual check.
pub fn resolvent_dense(m: &DMatrix<C64>, z: C64) -> Result<DMatrix<C64>> {
    let n = m.nrows();
    let mut shifted = m.clone();
    for i in 0..n {
        shifted[(i, i)] -= z;
    }
    let lu = shifted.clone().lu();
    let x = lu
        .solve(&DMatrix::<C64>::identity(n, n))
        .ok_or_else(|| Error::NearSingular {
            residual: f64::INFINITY,
            context: format!("singular M - zI at z = {z}"),
        })?;
    let residual = (&shifted * &x - DMatrix::<C64>::identity(n, n)).norm();
    let cond_proxy = 1.0 + shifted.norm() * x.norm();
    if residual > 1e-10 * cond_proxy {
        return Err(Error::NearSingular {
            residual,
            context: format!("resolvent at z = {z}"),
        });
    }
    Ok(x)
}

/// The assembled triple A = A0 + i psi(A0) F psi(A0), B = psi(A0), C = i B,
/// together with the model parameters kappa and ell.
#[derive(Clone, Debug)]
pub struct SystemTriple {
    pub a0: SpectralDiagonal,
    pub weight: WeightFamily,
    pub f: DMatrix<C64>,
    pub a: DMatrix<C64>,
    /// diag entries of B = psi(A0); real and >= 1, so B is invertible.
    pub b_diag: DVector<f64>,
    pub kappa: f64,
    pub ell: f64,
}

/// Assemble the system triple; fails unless ell > ||F|| (the separation
/// inequalities downstream need the strict gap).
///
/// At matrix scale every operator is bounded and acts on the whole space,
/// so the domain bookkeeping that the weighted spaces X_eta would otherwise
/// impose collapses to the `weighted_norm` checks.
pub fn build_system(
    a0: SpectralDiagonal,
    weight: WeightFamily,
    f: DMatrix<C64>,
    kappa: f64,
    ell: f64,
) -> Result<SystemTriple> {
    let n = a0.dimension();
    if f.nrows() != n || f.ncols() != n {
        return Err(Error::Dimension(format!(
            "F is {}x{}, spectrum has dimension {n}",
            f.nrows(),
            f.ncols()
        )));
    }
    if weight.domain_case != a0.domain_case() {
        return Err(Error::Dimension(
            "weight and spectrum disagree on the domain case".into(),
        ));
    }
    let norm_f = op_norm(&f);
    if ell <= norm_f {
        return Err(Error::ConstantViolation(format!(
            "ell = {ell} must exceed ||F|| = {norm_f}"
        )));
    }
    let mut b_diag = DVector::zeros(n);
    for (j, &t) in a0.eigenvalues().iter().enumerate() {
        b_diag[j] = weight.psi(t)?;
    }
    let mut a = DMatrix::<C64>::zeros(n, n);
    for r in 0..n {
        for c in 0..n {
            a[(r, c)] = C64::i() * f[(r, c)] * C64::new(b_diag[r] * b_diag[c], 0.0);
        }
        a[(r, r)] += C64::new(a0.eigenvalues()[r], 0.0);
    }
    Ok(SystemTriple {
        a0,
        weight,
        f,
        a,
        b_diag,
        kappa,
        ell,
    })
}

impl SystemTriple {
    pub fn dimension(&self) -> usize {
        self.a0.dimension()
    }

    /// B = psi(A0) as a dense complex matrix.
    pub fn b_matrix(&self) -> DMatrix<C64> {
        DMatrix::from_diagonal(&self.b_diag.map(|v| C64::new(v, 0.0)))
    }

    /// C = i psi(A0).
    pub fn c_matrix(&self) -> DMatrix<C64> {
        DMatrix::from_diagonal(&self.b_diag.map(|v| C64::new(0.0, v)))
    }

    /// phi(A0) diagonal entries (= psi^2).
    pub fn phi_diag(&self) -> DVector<f64> {
        self.b_diag.map(|v| v * v)
    }

    /// L = B F C = i psi(A0) F psi(A0), the perturbation A - A0.
    pub fn l_matrix(&self) -> DMatrix<C64> {
        let n = self.dimension();
        let mut l = DMatrix::<C64>::zeros(n, n);
        for r in 0..n {
            for c in 0..n {
                l[(r, c)] =
                    C64::i() * self.f[(r, c)] * C64::new(self.b_diag[r] * self.b_diag[c], 0.0);
            }
        }
        l
    }

    /// A_kappa = A0 + i kappa phi(A0), the normal comparison operator.
    pub fn a_kappa_diag(&self) -> DVector<C64> {
        let phi = self.phi_diag();
        DVector::from_iterator(
            self.dimension(),
            self.a0
                .eigenvalues()
                .iter()
                .zip(phi.iter())
                .map(|(&t, &p)| C64::new(t, self.kappa * p)),
        )
    }

    /// (A - zI)^-1 in the requested mode. Factored mode combines the diagonal
    /// resolvent of A0 with the inverse of I + L (A0 - zI)^-1 and agrees with
    /// the dense solve wherever that factor is invertible.
    pub fn resolvent(&self, z: C64, mode: ResolventMode) -> Result<DMatrix<C64>> {
        match mode {
            ResolventMode::Direct => resolvent_dense(&self.a, z),
            ResolventMode::Factored => {
                let n = self.dimension();
                let r0 = self.a0.resolvent_diag(z)?;
                let l = self.l_matrix();
                // I + L (A0 - zI)^-1
                let mut m = DMatrix::<C64>::identity(n, n);
                for r in 0..n {
                    for c in 0..n {
                        m[(r, c)] += l[(r, c)] * r0[c];
                    }
                }
                let inv = m
                    .clone()
                    .lu()
                    .solve(&DMatrix::<C64>::identity(n, n))
                    .ok_or(Error::NearSingular {
                        residual: f64::INFINITY,
                        context: format!("factored resolvent bracket at z = {z}"),
                    })?;
                let residual = (&m * &inv - DMatrix::<C64>::identity(n, n)).norm();
                if residual > 1e-10 * (1.0 + m.norm() * inv.norm()) {
                    return Err(Error::NearSingular {
                        residual,
                        context: format!("factored resolvent bracket at z = {z}"),
                    });
                }
                let mut out = inv;
                for r in 0..n {
                    for c in 0..n {
                        out[(r, c)] *= r0[r];
                    }
                }
                Ok(out)
            }
        }
    }

    /// One resolvent application (A - zI)^-1 x.
    pub fn resolvent_apply(&self, z: C64, x: &DVector<C64>) -> Result<DVector<C64>> {
        let n = self.dimension();
        let mut shifted = self.a.clone();
        for i in 0..n {
            shifted[(i, i)] -= z;
        }
        let lu = shifted.clone().lu();
        let sol = lu.solve(x).ok_or(Error::NearSingular {
            residual: f64::INFINITY,
            context: format!("resolvent apply at z = {z}"),
        })?;
        let residual = (&shifted * &sol - x).norm();
        if residual > 1e-9 * (1.0 + shifted.norm() * sol.norm()) {
            return Err(Error::NearSingular {
                residual,
                context: format!("resolvent apply at z = {z}"),
            });
        }
        Ok(sol)
    }

    /// Reconstruction defect ||A - (A0 + i psi F psi)|| relative to 1 + ||A||.
    pub fn reconstruction_defect(&self) -> f64 {
        let n = self.dimension();
        let mut rebuilt = self.l_matrix();
        for i in 0..n {
            rebuilt[(i, i)] += C64::new(self.a0.eigenvalues()[i], 0.0);
        }
        (&self.a - rebuilt).norm() / (1.0 + self.a.norm())
    }
}

/// The X_eta norm of x: ||eta(A0)^-1 x||, i.e. the norm of x viewed through
/// the weight eta. Errors when eta vanishes on the spectrum.
pub fn weighted_norm(
    x: &DVector<C64>,
    eta: impl Fn(f64) -> f64,
    a0: &SpectralDiagonal,
) -> Result<f64> {
    if x.len() != a0.dimension() {
        return Err(Error::Dimension(
            "vector length must match the spectrum".into(),
        ));
    }
    let mut acc = 0.0;
    for (j, &t) in a0.eigenvalues().iter().enumerate() {
        let e = eta(t);
        if e == 0.0 || !e.is_finite() {
            return Err(Error::Domain(format!("norm weight vanishes at t = {t}")));
        }
        acc += (x[j] / C64::new(e, 0.0)).norm_sqr();
    }
    Ok(acc.sqrt())
}
