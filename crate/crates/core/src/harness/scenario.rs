//! Scenario descriptions: everything needed to assemble a system, its
//! enclosure and contour, and to drive the checks deterministically from a
//! single seed.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{op_norm, DomainCase, C64};

/// Spectrum of the self-adjoint part: explicit eigenvalues or a seeded
/// uniform draw in [eps0, t_max].
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumSpec {
    Explicit(Vec<f64>),
    Random { n: usize, eps0: f64, t_max: f64 },
}

/// The perturbation: explicit complex entries or a seeded complex Gaussian
/// draw rescaled to an operator-norm target.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationSpec {
    Explicit {
        re: Vec<Vec<f64>>,
        im: Vec<Vec<f64>>,
    },
    Random {
        norm: f64,
    },
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct QuadratureSpec {
    /// target contour node count
    pub nodes: usize,
    /// branch truncation; derived from the tail target when absent
    pub t_max: Option<f64>,
    /// certified bound requested for the discarded tail integral
    pub tail_target: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            nodes: 2048,
            t_max: None,
            tail_target: 1e-7,
        }
    }
}

/// Trial counts for the randomized checks.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TrialsSpec {
    pub duality: usize,
    pub kernel: usize,
    pub k_bound: usize,
    pub plemelj: usize,
    pub intertwining: usize,
}

impl Default for TrialsSpec {
    fn default() -> Self {
        Self {
            duality: 50,
            kernel: 20,
            k_bound: 50,
            plemelj: 50,
            intertwining: 20,
        }
    }
}

fn default_kappa_factor() -> f64 {
    1.05
}

fn default_kappa_sign() -> i8 {
    1
}

fn default_eps_target() -> f64 {
    0.05
}

/// A complete, reproducible description of one laboratory run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    pub domain_case: DomainCase,
    /// weight exponent: psi(x) = (1 + |x|)^alpha, 0 < alpha <= 1/2
    pub alpha: f64,
    pub spectrum: SpectrumSpec,
    pub perturbation: PerturbationSpec,
    /// stand-in for the essential norm of F (zero at finite dimension)
    #[serde(default)]
    pub ess_surrogate: f64,
    /// enclosure opening; auto = max(1, 2 mu0) when absent
    #[serde(default)]
    pub mu: Option<f64>,
    /// separation constant; auto = max(1, 1.25 ||F||) when absent
    #[serde(default)]
    pub ell: Option<f64>,
    #[serde(default = "default_kappa_factor")]
    pub kappa_factor: f64,
    #[serde(default = "default_kappa_sign")]
    pub kappa_sign: i8,
    /// explicit kappa, bypassing the kappa0 rule (diagnostics only; the
    /// separation check will fail below kappa0)
    #[serde(default)]
    pub kappa_override: Option<f64>,
    #[serde(default = "default_eps_target")]
    pub eps_target: f64,
    #[serde(default)]
    pub quadrature: QuadratureSpec,
    /// checks to run; everything when absent
    #[serde(default)]
    pub checks: Option<Vec<String>>,
    /// per-check tolerance overrides by check name
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    #[serde(default)]
    pub trials: TrialsSpec,
}

impl Scenario {
    pub fn from_json(json: &str) -> Result<Self> {
        Ok(serde_json::from_str(json)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// The scalar fixture: A0 = [2], alpha = 1/2, F = [0.2].
    pub fn scalar_fixture() -> Self {
        Self {
            name: "scalar-fixture".into(),
            seed: 1,
            domain_case: DomainCase::HalfLine,
            alpha: 0.5,
            spectrum: SpectrumSpec::Explicit(vec![2.0]),
            perturbation: PerturbationSpec::Explicit {
                re: vec![vec![0.2]],
                im: vec![vec![0.0]],
            },
            ess_surrogate: 0.0,
            mu: Some(1.0),
            ell: Some(1.0),
            kappa_factor: default_kappa_factor(),
            kappa_sign: 1,
            kappa_override: None,
            eps_target: default_eps_target(),
            quadrature: QuadratureSpec::default(),
            checks: None,
            tolerances: BTreeMap::new(),
            trials: TrialsSpec::default(),
        }
    }

    /// The n = 3 fixture: A0 = diag(1,4,9), alpha = 1/2, seeded F with
    /// ||F|| = 0.3 (seed 7).
    pub fn fixture_n3() -> Self {
        Self {
            name: "fixture-n3".into(),
            seed: 7,
            domain_case: DomainCase::HalfLine,
            alpha: 0.5,
            spectrum: SpectrumSpec::Explicit(vec![1.0, 4.0, 9.0]),
            perturbation: PerturbationSpec::Random { norm: 0.3 },
            ess_surrogate: 0.0,
            mu: Some(1.0),
            ell: Some(1.0),
            kappa_factor: default_kappa_factor(),
            kappa_sign: 1,
            kappa_override: None,
            eps_target: default_eps_target(),
            quadrature: QuadratureSpec::default(),
            checks: None,
            tolerances: BTreeMap::new(),
            trials: TrialsSpec::default(),
        }
    }

    /// n = 3 fixture without perturbation (trivial baseline).
    pub fn fixture_n3_unperturbed() -> Self {
        let mut s = Self::fixture_n3();
        s.name = "fixture-n3-unperturbed".into();
        s.perturbation = PerturbationSpec::Explicit {
            re: vec![vec![0.0; 3]; 3],
            im: vec![vec![0.0; 3]; 3],
        };
        s
    }

    /// Seeded random scenario: n eigenvalues in [eps0, t_max], F with the
    /// given norm target.
    pub fn random(name: &str, seed: u64, n: usize, t_max: f64, f_norm: f64) -> Self {
        let mut s = Self::fixture_n3();
        s.name = name.into();
        s.seed = seed;
        s.spectrum = SpectrumSpec::Random {
            n,
            eps0: 0.5,
            t_max,
        };
        s.perturbation = PerturbationSpec::Random { norm: f_norm };
        s
    }

    /// Materialize the eigenvalue list.
    pub fn realize_spectrum(&self) -> Result<Vec<f64>> {
        match &self.spectrum {
            SpectrumSpec::Explicit(v) => Ok(v.clone()),
            SpectrumSpec::Random { n, eps0, t_max } => {
                if *n == 0 || *eps0 <= 0.0 || t_max <= eps0 {
                    return Err(Error::Domain(format!(
                        "random spectrum needs n > 0 and 0 < eps0 < t_max, got n = {n}, eps0 = {eps0}, t_max = {t_max}"
                    )));
                }
                let mut rng = scenario_rng(self.seed, TAG_SPECTRUM);
                let mut v: Vec<f64> = (0..*n)
                    .map(|_| eps0 + (t_max - eps0) * rng.random::<f64>())
                    .collect();
                v.sort_by(|a, b| a.partial_cmp(b).unwrap());
                Ok(v)
            }
        }
    }

    /// Materialize the perturbation matrix.
    pub fn realize_perturbation(&self, n: usize) -> Result<DMatrix<C64>> {
        match &self.perturbation {
            PerturbationSpec::Explicit { re, im } => {
                if re.len() != n || im.len() != n || re.iter().any(|r| r.len() != n) {
                    return Err(Error::Dimension(format!(
                        "explicit perturbation must be {n} x {n}"
                    )));
                }
                let mut f = DMatrix::<C64>::zeros(n, n);
                for i in 0..n {
                    for j in 0..n {
                        f[(i, j)] = C64::new(re[i][j], im[i][j]);
                    }
                }
                Ok(f)
            }
            PerturbationSpec::Random { norm } => {
                let mut rng = scenario_rng(self.seed, TAG_PERTURBATION);
                let mut f = complex_gaussian_matrix(&mut rng, n);
                let on = op_norm(&f);
                if on > 0.0 {
                    f *= C64::new(norm / on, 0.0);
                }
                Ok(f)
            }
        }
    }
}

pub const TAG_SPECTRUM: u64 = 1;
pub const TAG_PERTURBATION: u64 = 2;
pub const TAG_DUALITY: u64 = 3;
pub const TAG_KERNEL: u64 = 4;
pub const TAG_KBOUND: u64 = 5;
pub const TAG_PLEMELJ: u64 = 6;
pub const TAG_INTERTWINE: u64 = 7;
pub const TAG_HFACTOR: u64 = 8;

/// Deterministic per-purpose stream: the seed is combined with a tag so the
/// spectrum, the perturbation and each check draw independent streams.
pub fn scenario_rng(seed: u64, tag: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ tag.wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

/// Standard normal via Box-Muller on the ChaCha stream.
pub fn std_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

pub fn complex_gaussian(rng: &mut ChaCha8Rng) -> C64 {
    C64::new(std_normal(rng), std_normal(rng))
}

pub fn complex_gaussian_vec(rng: &mut ChaCha8Rng, n: usize) -> DVector<C64> {
    DVector::from_iterator(n, (0..n).map(|_| complex_gaussian(rng)))
}

pub fn complex_gaussian_matrix(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<C64> {
    DMatrix::from_iterator(n, n, (0..n * n).map(|_| complex_gaussian(rng)))
}
