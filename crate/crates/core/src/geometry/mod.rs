//! The parabolic enclosure Omega_{mu,R}, its membership test, and the
//! deterministic searches producing every constant in the admissibility
//! chain.
//!
//! All searches are grid-or-doubling procedures followed by a posteriori
//! verification, so each produced constant comes with a reproducible
//! certificate rather than a compactness argument.

mod contour;

pub use contour::{
    build_contour, integral_bound, orientation_certificate, winding_number, Contour,
    IntegralBoundReport,
};

use nalgebra::DMatrix;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{op_norm, DomainCase, SystemTriple, WeightFamily, C64};

/// Which side of the boundary a point is on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Interior,
    Exterior,
}

/// The spectral enclosure Omega_{mu,R} = {x in int D(phi), |y| < mu phi(x)}
/// union B_R(0). Always symmetric with respect to the real axis.
#[derive(Clone, Copy, Debug)]
pub struct ParabolicDomain {
    pub mu: f64,
    pub r: f64,
    pub weight: WeightFamily,
}

impl ParabolicDomain {
    pub fn new(mu: f64, r: f64, weight: WeightFamily) -> Result<Self> {
        if !(mu > 0.0) || !(r > 0.0) {
            return Err(Error::Domain(format!(
                "need mu > 0 and R > 0, got mu = {mu}, R = {r}"
            )));
        }
        Ok(Self { mu, r, weight })
    }

    pub fn domain_case(&self) -> DomainCase {
        self.weight.domain_case
    }

    fn x_in_parabola_range(&self, x: f64) -> bool {
        match self.domain_case() {
            DomainCase::EvenOnR => true,
            DomainCase::HalfLine => x > 0.0,
        }
    }

    /// Signed margin of the parabolic component: positive inside, zero on the
    /// branch curves. The vertical gap is normalized by the boundary slope so
    /// the value approximates euclidean distance.
    fn parabola_margin(&self, z: C64) -> f64 {
        let (x, y) = (z.re, z.im.abs());
        if self.x_in_parabola_range(x) {
            let gap = self.mu * self.weight.phi_star(x) - y;
            gap / (1.0 + (self.mu * self.weight.phi_star_deriv(x)).abs().powi(2)).sqrt()
        } else {
            // half-line case, x <= 0: distance estimate toward the region edge
            let overhang = (y - self.mu * self.weight.phi_star(0.0)).max(0.0);
            -(x * x + overhang * overhang).sqrt()
        }
    }

    /// Membership side per the defining set, plus a signed distance estimate
    /// (positive inside, zero only on the boundary, continuous across it).
    pub fn membership(&self, z: C64) -> (Side, f64) {
        let disc_margin = self.r - z.norm();
        let margin = self.parabola_margin(z).max(disc_margin);
        let inside_parabola =
            self.x_in_parabola_range(z.re) && z.im.abs() < self.mu * self.weight.phi_star(z.re);
        let inside = inside_parabola || z.norm() < self.r;
        (
            if inside {
                Side::Interior
            } else {
                Side::Exterior
            },
            margin,
        )
    }

    /// Shrunk copy Omega_{mu - sigma, R - sigma} used to certify the region
    /// where delta^-1 = I + Phi is valid.
    pub fn shrink(&self, sigma: f64) -> Result<ParabolicDomain> {
        ParabolicDomain::new(self.mu - sigma, self.r - sigma, self.weight)
    }

    /// Deterministic interior probe points, spread over the disc and the
    /// parabolic throat, kept away from the boundary.
    pub fn interior_probes(&self, count: usize) -> Vec<C64> {
        let mut probes = Vec::with_capacity(count);
        let mut k = 0usize;
        let push = |p: C64, probes: &mut Vec<C64>| {
            if probes.len() < count {
                let (side, margin) = self.membership(p);
                if side == Side::Interior && margin > 0.15 * self.r.min(self.mu) {
                    probes.push(p);
                }
            }
        };
        while probes.len() < count && k < 64 * count {
            // golden-angle spiral inside the disc plus points along the axis
            let frac = (k as f64 + 0.5) / count as f64;
            let rad = 0.6 * self.r * frac.sqrt();
            let ang = 2.399963229728653 * k as f64;
            push(C64::from_polar(rad, ang), &mut probes);
            let x = self.r * (0.5 + 1.5 * frac);
            if self.x_in_parabola_range(x) {
                let y = 0.4 * self.mu * self.weight.phi_star(x) * (2.0 * frac - 1.0);
                push(C64::new(x, y), &mut probes);
            }
            k += 1;
        }
        probes.truncate(count);
        probes
    }

    /// Deterministic exterior probe points mirroring the interior ones:
    /// above the branches and outside the disc.
    pub fn exterior_probes(&self, count: usize) -> Vec<C64> {
        let mut probes = Vec::with_capacity(count);
        let mut k = 0usize;
        while probes.len() < count && k < 64 * count {
            let frac = (k as f64 + 0.5) / count as f64;
            let x = self.r * (-1.0 + 3.0 * frac);
            let sign = if k.is_multiple_of(2) { 1.0 } else { -1.0 };
            let y = sign * (1.6 + frac) * self.mu * self.weight.phi_star(x).max(1.0);
            let p = C64::new(x, y);
            let (side, margin) = self.membership(p);
            if side == Side::Exterior && margin < -0.3 * self.r.min(self.mu) {
                probes.push(p);
            }
            k += 1;
        }
        // far real point on the left (half-line) or far above (even case)
        if probes.len() < count {
            probes.push(C64::new(-2.5 * self.r, 0.0));
        }
        probes.truncate(count);
        probes
    }
}

/// Every constant of the admissibility chain, with the inequalities that
/// certify it re-checkable from the stored values.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ConstantsBundle {
    pub ess: f64,
    pub k0: f64,
    pub mu0: f64,
    pub mu: f64,
    pub r_prime: f64,
    pub k: f64,
    pub r0: f64,
    pub r_outer: f64,
    pub eps: f64,
    pub mu1: f64,
    pub ell: f64,
    pub kappa0: f64,
    pub kappa: f64,
    pub sigma_shrink: f64,
    pub t0: f64,
}

impl ConstantsBundle {
    /// Assert the full inequality chain; names the first violated inequality.
    pub fn validate(&self) -> Result<()> {
        let checks: [(bool, &str); 8] = [
            (self.mu > self.mu0, "mu > mu0"),
            (self.r_prime > self.ess, "r' > ess"),
            (
                self.k > self.k0 || (self.k0 == 0.0 && self.k > 0.0),
                "k > k0",
            ),
            (self.r_prime * self.k < 1.0, "r' k < 1"),
            (
                self.r_prime / (1.0 - self.r_prime * self.r_prime * self.k * self.k).sqrt()
                    < self.mu,
                "r'/sqrt(1 - r'^2 k^2) < mu",
            ),
            (self.r_outer > self.r0, "R > R0"),
            (self.mu1 > self.mu, "mu1 > mu"),
            (self.eps > 0.0 && self.eps < 1.0, "eps in (0,1)"),
        ];
        for (ok, name) in checks {
            if !ok {
                return Err(Error::ConstantViolation(format!(
                    "constants chain: {name} fails"
                )));
            }
        }
        Ok(())
    }
}

/// mu0 = ess / sqrt(1 - ess^2 k0^2); zero essential norm gives zero.
pub fn mu0_of(ess: f64, k0: f64) -> Result<f64> {
    if ess < 0.0 || k0 < 0.0 {
        return Err(Error::Domain("ess and k0 must be nonnegative".into()));
    }
    if ess * k0 >= 1.0 {
        return Err(Error::ConstantViolation(format!(
            "condition (5) fails: ess * k0 = {} >= 1",
            ess * k0
        )));
    }
    Ok(ess / (1.0 - ess * ess * k0 * k0).sqrt())
}

/// Pick r' > ess and k > k0 with r'k < 1 and r'/sqrt(1 - r'^2 k^2) < mu.
/// Deterministic midpoint rule: start at the midpoints of the feasible gaps
/// and shrink both gaps geometrically toward (ess, k0) until both
/// inequalities hold with relative slack >= 1e-3.
pub fn pick_constants(mu: f64, ess: f64, k0: f64) -> Result<(f64, f64)> {
    let mu0 = mu0_of(ess, k0)?;
    if mu <= mu0 {
        return Err(Error::Infeasible(format!(
            "need mu > mu0: mu = {mu}, mu0 = {mu0}"
        )));
    }
    let r_cap = {
        let mut cap = mu.min(ess + 1.0);
        if k0 > 0.0 {
            cap = cap.min(1.0 / k0);
        }
        cap
    };
    let mut r = 0.5 * (ess + r_cap);
    let mut k = 0.5 * (k0 + 1.0 / r);
    for _ in 0..200 {
        let prod_ok = r * k < 1.0 - 1e-3;
        let cone = r / (1.0 - (r * k).powi(2)).sqrt();
        let cone_ok = cone < mu * (1.0 - 1e-3);
        if prod_ok && cone_ok && r > ess && k > k0 {
            return Ok((r, k));
        }
        r = 0.5 * (ess + r);
        k = 0.5 * (k0 + k);
        if k <= k0 {
            k = k0 + 1e-9;
        }
    }
    Err(Error::Infeasible(format!(
        "pick_constants did not converge for mu = {mu}, ess = {ess}, k0 = {k0}"
    )))
}

/// Smallest abscissa t* past which the cone-distance inequality
/// t mu phi(t) / sqrt(t^2 + mu^2 phi^2(t)) > r' phi(t) holds. The left side
/// over phi(t) is increasing in t, so a doubling bracket plus bisection finds
/// the single crossing.
pub fn disc_threshold(mu: f64, r_prime: f64, weight: &WeightFamily) -> Result<f64> {
    let g = |t: f64| {
        let phi = weight.phi_star(t);
        t * mu / (t * t + mu * mu * phi * phi).sqrt() - r_prime
    };
    if g(0.0) >= 0.0 {
        return Ok(0.0);
    }
    let mut hi = 1.0;
    let mut tries = 0;
    while g(hi) <= 0.0 {
        hi *= 2.0;
        tries += 1;
        if tries > 200 {
            return Err(Error::Infeasible(format!(
                "cone-distance inequality never satisfied (mu = {mu}, r' = {r_prime}); \
                 check r'/sqrt(1 - r'^2 k^2) < mu"
            )));
        }
    }
    // g(0) < 0 <= g(hi): the single crossing is somewhere in (0, hi]
    let mut lo = 0.0;
    while hi - lo > 1e-10 * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// R0 such that every disc B(t, r' phi(t)), t in D(phi), is contained in
/// Omega_{mu,R0}: the threshold t* is solved in closed form up to bisection,
/// R0 = 1.05 * sup_{|t| <= t*} (|t| + r' phi(t)), and the inclusion is then
/// verified on a 1e3 x 1e2 grid of disc centers and boundary angles.
pub fn r0_search(mu: f64, r_prime: f64, weight: &WeightFamily) -> Result<f64> {
    let t_star = disc_threshold(mu, r_prime, weight)?;
    // |t| + r' phi(t) is increasing on [0, t*], so the sup sits at t*
    let r0 = 1.05 * (t_star + r_prime * weight.phi_star(t_star)).max(1e-3);
    let domain = ParabolicDomain::new(mu, r0, *weight)?;
    verify_disc_inclusion(&domain, r_prime, 1000, 100)?;
    Ok(r0)
}

/// A posteriori check of the disc inclusion over `nt` centers and `na`
/// angles; errors with the violating (t, angle) pair.
pub fn verify_disc_inclusion(
    domain: &ParabolicDomain,
    r_prime: f64,
    nt: usize,
    na: usize,
) -> Result<()> {
    let weight = &domain.weight;
    let t_hi = 1e3 * domain.r.max(1.0);
    for i in 0..nt {
        // geometric ladder over [1e-3, t_hi] covering near and far centers
        let frac = i as f64 / (nt - 1).max(1) as f64;
        let mut t = 1e-3 * (t_hi / 1e-3f64).powf(frac);
        if weight.domain_case == DomainCase::EvenOnR && i % 2 == 1 {
            t = -t;
        }
        let rad = r_prime * weight.phi_star(t);
        for j in 0..na {
            let ang = 2.0 * std::f64::consts::PI * j as f64 / na as f64;
            let z = C64::new(t, 0.0) + C64::from_polar(rad, ang);
            // strict interior with a roundoff allowance on the margin
            let (side, margin) = domain.membership(z);
            if side != Side::Interior && margin < -1e-12 * (1.0 + z.norm()) {
                return Err(Error::Geometry(format!(
                    "disc inclusion fails at t = {t}, angle = {ang}: z = {z}, margin = {margin}"
                )));
            }
        }
    }
    Ok(())
}

/// kappa0 = ell + mu1 (2 + a + phi(a)) with a = 1 + ell phi(1).
pub fn kappa0_of(ell: f64, mu1: f64, weight: &WeightFamily) -> f64 {
    let a = 1.0 + ell * weight.phi_star(1.0);
    ell + mu1 * (2.0 + a + weight.phi_star(a))
}

/// Smallest mu1 on the grid {mu (1 + j/10), j = 1..100} such that the widened
/// parabola {|y| < mu1 phi_*(x)} contains the closure of Omega_{mu,R},
/// verified on ~1e4 samples including boundary points.
pub fn mu1_search(mu: f64, r: f64, weight: &WeightFamily) -> Result<f64> {
    let samples = mu1_samples(mu, r, weight);
    'grid: for j in 1..=100 {
        let mu1 = mu * (1.0 + j as f64 / 10.0);
        for &z in &samples {
            if z.im.abs() >= mu1 * weight.phi_star(z.re) {
                continue 'grid;
            }
        }
        return Ok(mu1);
    }
    Err(Error::Infeasible(format!(
        "mu1 grid exhausted at j = 100 for mu = {mu}, R = {r}"
    )))
}

fn mu1_samples(mu: f64, r: f64, weight: &WeightFamily) -> Vec<C64> {
    let mut samples = Vec::with_capacity(10_500);
    let pi = std::f64::consts::PI;
    // boundary: the full circle |z| = R
    for i in 0..2500 {
        let ang = 2.0 * pi * i as f64 / 2500.0;
        samples.push(C64::from_polar(r, ang));
    }
    // boundary: parabola branches out to where they dominate the disc
    let t_hi = 4.0 * r.max(1.0);
    for i in 0..2500 {
        let t = t_hi * (i as f64 + 0.5) / 2500.0;
        let ts = match weight.domain_case {
            DomainCase::EvenOnR => {
                if i % 2 == 0 {
                    t
                } else {
                    -t
                }
            }
            DomainCase::HalfLine => t,
        };
        let y = mu * weight.phi_star(ts);
        samples.push(C64::new(ts, y));
        samples.push(C64::new(ts, -y));
    }
    // interior fill of the disc
    for i in 0..50 {
        for j in 0..50 {
            let x = r * (2.0 * (i as f64 + 0.5) / 50.0 - 1.0);
            let y = r * (2.0 * (j as f64 + 0.5) / 50.0 - 1.0);
            if x * x + y * y < r * r {
                samples.push(C64::new(x, y));
            }
        }
    }
    samples
}

/// Report from the separation check: the worst slack of the two displayed
/// inequalities |t + i kappa phi(t) - z| >= ell phi(t).
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SeparationReport {
    pub min_slack_interior: f64,
    pub min_slack_boundary_form: f64,
}

/// Verify the kappa separation inequalities over a (t, z) grid with z
/// sampled in the widened parabola, and the boundary form over (t, x) pairs.
/// Requires kappa above kappa0; any violation errors with a witness.
pub fn separation_check(
    kappa: f64,
    mu1: f64,
    ell: f64,
    weight: &WeightFamily,
    grid: usize,
) -> Result<SeparationReport> {
    let kappa0 = kappa0_of(ell, mu1, weight);
    if kappa.abs() <= kappa0 {
        return Err(Error::ConstantViolation(format!(
            "separation requires |kappa| > kappa0 = {kappa0}, got {kappa}"
        )));
    }
    let ks = kappa.abs();
    let t_of = |i: usize| -> f64 {
        // geometric ladder from 0 to 1e4
        let frac = i as f64 / (grid - 1).max(1) as f64;
        if frac == 0.0 {
            0.0
        } else {
            1e-2 * (1e6f64).powf(frac)
        }
    };
    let mut min_interior = f64::INFINITY;
    let mut min_boundary = f64::INFINITY;
    for i in 0..grid {
        let mut ts = vec![t_of(i)];
        if weight.domain_case == DomainCase::EvenOnR {
            ts.push(-t_of(i));
        }
        for t in ts {
            if weight.domain_case == DomainCase::HalfLine && t < 0.0 {
                continue;
            }
            let phi_t = weight.phi_star(t);
            let peak = C64::new(t, ks * phi_t);
            // z samples inside the widened parabola
            for xi in 0..grid {
                let x = {
                    let frac = xi as f64 / (grid - 1).max(1) as f64;
                    let mag = if frac == 0.0 {
                        0.0
                    } else {
                        1e-2 * (1e6f64).powf(frac)
                    };
                    if xi % 2 == 0 {
                        mag
                    } else {
                        -mag
                    }
                };
                let phi_x = weight.phi_star(x);
                for &yf in &[0.0, 0.5, 0.95] {
                    let z = C64::new(x, yf * mu1 * phi_x);
                    let slack = (peak - z).norm() - ell * phi_t;
                    if slack < 0.0 {
                        return Err(Error::ConstantViolation(format!(
                            "|t + i kappa phi(t) - z| >= ell phi(t) fails at t = {t}, z = {z}"
                        )));
                    }
                    min_interior = min_interior.min(slack);
                }
                // boundary form: z = x + i mu1 phi_*(x), both signs
                let peak_star = C64::new(t, ks * weight.phi_star(t));
                for &sgn in &[1.0, -1.0] {
                    let zb = C64::new(x, sgn * mu1 * phi_x);
                    let slack = (peak_star - zb).norm() - ell * weight.phi_star(t);
                    if slack < 0.0 {
                        return Err(Error::ConstantViolation(format!(
                            "boundary separation fails at t = {t}, x = {x}"
                        )));
                    }
                    min_boundary = min_boundary.min(slack);
                }
            }
        }
    }
    Ok(SeparationReport {
        min_slack_interior: min_interior,
        min_slack_boundary_form: min_boundary,
    })
}

/// Outcome of the R doubling search: the radius, the certified eps, and the
/// measured sup of the two weighted resolvent norms over the probe set.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct RSearchResult {
    pub r_outer: f64,
    pub eps: f64,
    pub sup_fcb: f64,
    pub sup_cbf: f64,
}

/// sup over a probe set z of ||F C (A0 - z)^-1 B|| and ||C (A0 - z)^-1 B F||.
/// Since C (A0 - z)^-1 B = i diag(phi_j / (t_j - z)), both are dense norms of
/// a diagonally scaled F.
pub fn weighted_resolvent_sups(system: &SystemTriple, probes: &[C64]) -> Result<(f64, f64)> {
    let n = system.dimension();
    let phi = system.phi_diag();
    let ts = system.a0.eigenvalues();
    let mut sup_fcb: f64 = 0.0;
    let mut sup_cbf: f64 = 0.0;
    for &z in probes {
        let mut diag = Vec::with_capacity(n);
        for j in 0..n {
            diag.push(C64::i() * C64::new(phi[j], 0.0) / (C64::new(ts[j], 0.0) - z));
        }
        let mut fcb = DMatrix::<C64>::zeros(n, n);
        let mut cbf = DMatrix::<C64>::zeros(n, n);
        for r in 0..n {
            for c in 0..n {
                fcb[(r, c)] = system.f[(r, c)] * diag[c];
                cbf[(r, c)] = diag[r] * system.f[(r, c)];
            }
        }
        sup_fcb = sup_fcb.max(op_norm(&fcb));
        sup_cbf = sup_cbf.max(op_norm(&cbf));
    }
    Ok((sup_fcb, sup_cbf))
}

/// Exterior probe set for the norm bounds: the boundary of Omega_{mu,R}
/// sampled at modest resolution plus far points along the branches out to
/// 10 * t_max.
pub fn norm_probe_set(domain: &ParabolicDomain, t_max: f64) -> Result<Vec<C64>> {
    let contour = build_contour(domain, t_max, 256)?;
    let mut probes: Vec<C64> = contour.nodes().to_vec();
    let weight = &domain.weight;
    let t_lo = t_max.max(domain.r);
    for i in 0..64 {
        let t = t_lo * (10.0f64).powf(i as f64 / 63.0);
        let y = domain.mu * weight.phi_star(t);
        probes.push(C64::new(t, y));
        probes.push(C64::new(t, -y));
        if weight.domain_case == DomainCase::EvenOnR {
            probes.push(C64::new(-t, y));
            probes.push(C64::new(-t, -y));
        }
    }
    Ok(probes)
}

/// Double R from just above R0 until the weighted resolvent sups over the
/// exterior probe set drop to 1 - eps_target. The returned eps is the
/// certified one (capped at eps_target).
pub fn r_search(
    system: &SystemTriple,
    r0: f64,
    mu: f64,
    eps_target: f64,
    t_max: f64,
) -> Result<RSearchResult> {
    let mut r = 1.05 * r0;
    let mut last = (f64::INFINITY, f64::INFINITY);
    for _ in 0..=10 {
        let domain = ParabolicDomain::new(mu, r, system.weight)?;
        let probes = norm_probe_set(&domain, t_max.max(4.0 * r))?;
        let sups = weighted_resolvent_sups(system, &probes)?;
        last = sups;
        if sups.0 <= 1.0 - eps_target && sups.1 <= 1.0 - eps_target {
            let eps = (1.0 - sups.0.max(sups.1)).min(eps_target);
            return Ok(RSearchResult {
                r_outer: r,
                eps,
                sup_fcb: sups.0,
                sup_cbf: sups.1,
            });
        }
        r *= 2.0;
    }
    Err(Error::Infeasible(format!(
        "R doubling exceeded 2^10 R0; achieved sups {:.3e}, {:.3e}",
        last.0, last.1
    )))
}

/// Abscissa t0 past which phi(t)/t < k (exists since phi(t)/t decreases to k0 < k).
pub fn t0_of(k: f64, weight: &WeightFamily) -> f64 {
    let g = |t: f64| weight.phi_star(t) / t - k;
    if g(1e-6) < 0.0 {
        return 0.0;
    }
    let mut hi = 1.0;
    let mut tries = 0;
    while g(hi) >= 0.0 && tries < 400 {
        hi *= 2.0;
        tries += 1;
    }
    let mut lo = hi / 2.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}
