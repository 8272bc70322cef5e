//! The boundary contour Gamma = boundary of Omega_{mu,R}, discretized as
//! quadrature panels on a graded parametrization.
//!
//! Branches t -> t +- i mu phi(t) are graded logarithmically (u = ln(1+|t|)),
//! which realizes the 1/(1+|z|) node density; circular arcs are parametrized
//! by angle. Each smooth piece is split into panels carrying a
//! Clenshaw-Curtis rule, so integrals of analytic integrands converge
//! spectrally in the per-panel node count while halving the node set still
//! lands on the embedded coarser rule (needed for error estimates on sampled
//! functions).
//!
//! The lower half of the traversal is the exact mirror of the upper half
//! (z -> conj z, weight -> -conj weight), so conjugation acts on the node
//! set as an index permutation with no interpolation.

use crate::error::{Error, Result};
use crate::geometry::ParabolicDomain;
use crate::operator::{DomainCase, WeightFamily, C64};

const PI: f64 = std::f64::consts::PI;

/// One quadrature panel on a smooth piece of the contour.
#[derive(Clone, Debug)]
struct Panel {
    start: usize,
    /// m + 1 nodes with m even (Clenshaw-Curtis order).
    count: usize,
    kind: PanelKind,
    p_from: f64,
    p_to: f64,
}

#[derive(Clone, Copy, Debug)]
enum PanelKind {
    /// Parabola branch; `lower` picks y = -mu phi. Parametrized by
    /// u = sgn(t) ln(1 + |t|).
    Branch { lower: bool },
    /// Arc of |z| = R parametrized by the angle.
    Arc,
}

/// A connected component of the truncated contour, as a node index range.
#[derive(Clone, Copy, Debug)]
pub struct Component {
    pub start: usize,
    pub end: usize,
    pub closed: bool,
}

/// A short circular arc closing the truncated contour at infinity; used only
/// when a Cauchy integral needs a genuinely closed curve.
#[derive(Clone, Debug)]
pub struct ClosureArc {
    pub from: C64,
    pub to: C64,
    pub nodes: Vec<C64>,
    pub dz: Vec<C64>,
}

/// Quadrature nodes on Gamma with complex weights, arc-length weights,
/// orientation (interior on the left), the conjugation permutation, and the
/// certified bound on the discarded tail integral of |dz|/|z|^2.
#[derive(Clone, Debug)]
pub struct Contour {
    mu: f64,
    r: f64,
    weight: WeightFamily,
    nodes: Vec<C64>,
    dz: Vec<C64>,
    arclen: Vec<f64>,
    conj_perm: Vec<usize>,
    components: Vec<Component>,
    panels: Vec<Panel>,
    closures: Vec<ClosureArc>,
    pub t_max: f64,
    pub tail_bound: f64,
    pub n_requested: usize,
}

impl Contour {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[C64] {
        &self.nodes
    }

    pub fn dz(&self) -> &[C64] {
        &self.dz
    }

    pub fn arclen(&self) -> &[f64] {
        &self.arclen
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn closures(&self) -> &[ClosureArc] {
        &self.closures
    }

    /// Index of the node at conj(z_j); exact by construction.
    pub fn conj_index(&self, j: usize) -> usize {
        self.conj_perm[j]
    }

    /// Smallest local node spacing near node j (arc-length weight).
    pub fn local_spacing(&self, j: usize) -> f64 {
        self.arclen[j]
    }

    /// Contour integral of a sampled integrand: sum f_j dz_j.
    pub fn integrate(&self, f: impl Fn(usize, C64) -> C64) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for (j, (&z, &w)) in self.nodes.iter().zip(self.dz.iter()).enumerate() {
            acc += f(j, z) * w;
        }
        acc
    }

    /// The nested coarse contour (every panel at half order) together with
    /// the surviving node indices of `self`, so sampled grid functions can be
    /// restricted without re-evaluation.
    pub fn halved(&self) -> (Contour, Vec<usize>) {
        let mut nodes = Vec::new();
        let mut dz = Vec::new();
        let mut arclen = Vec::new();
        let mut kept = Vec::new();
        let mut panels = Vec::new();
        let mut components = Vec::new();

        if self.components.len() == 1 && self.components[0].closed {
            // periodic trapezoid on the circle: keep every other node
            let n = self.len() / 2;
            for j in 0..n {
                kept.push(2 * j);
                nodes.push(self.nodes[2 * j]);
            }
            let dtheta = 2.0 * PI / n as f64;
            for &z in &nodes {
                dz.push(C64::i() * z * dtheta);
                arclen.push(self.r * dtheta);
            }
            components.push(Component {
                start: 0,
                end: n,
                closed: true,
            });
            let conj_perm = (0..n).map(|k| (n - k) % n).collect();
            let halved = Contour {
                mu: self.mu,
                r: self.r,
                weight: self.weight,
                nodes,
                dz,
                arclen,
                conj_perm,
                components,
                panels,
                closures: self.closures.clone(),
                t_max: self.t_max,
                tail_bound: self.tail_bound,
                n_requested: self.n_requested / 2,
            };
            return (halved, kept);
        }

        // regenerate the first half from its panels at half order, then
        // mirror, exactly as in the original construction, so nodes of the
        // halved contour coincide bitwise with a subset of the originals
        let total_orig = self.len();
        let m_half_orig = total_orig / 2;
        for panel in self.panels.iter().filter(|p| p.start < m_half_orig) {
            let m = panel.count - 1;
            let m2 = m / 2;
            let start = nodes.len();
            let (zs, ws, als) = panel_nodes(
                self.mu,
                self.r,
                &self.weight,
                panel.kind,
                panel.p_from,
                panel.p_to,
                m2,
            );
            for i in 0..=m2 {
                kept.push(panel.start + 2 * i);
                nodes.push(zs[i]);
                dz.push(ws[i]);
                arclen.push(als[i]);
            }
            panels.push(Panel {
                start,
                count: m2 + 1,
                kind: panel.kind,
                p_from: panel.p_from,
                p_to: panel.p_to,
            });
        }
        let m_half = nodes.len();
        for i in (0..m_half).rev() {
            nodes.push(nodes[i].conj());
            dz.push(-dz[i].conj());
            arclen.push(arclen[i]);
            kept.push(total_orig - 1 - kept[i]);
        }
        let total = nodes.len();
        match self.components.len() {
            1 => components.push(Component {
                start: 0,
                end: total,
                closed: false,
            }),
            _ => {
                components.push(Component {
                    start: 0,
                    end: m_half,
                    closed: false,
                });
                components.push(Component {
                    start: m_half,
                    end: total,
                    closed: false,
                });
            }
        }
        let conj_perm = (0..total).map(|i| total - 1 - i).collect();
        let halved = Contour {
            mu: self.mu,
            r: self.r,
            weight: self.weight,
            nodes,
            dz,
            arclen,
            conj_perm,
            components,
            panels,
            closures: self.closures.clone(),
            t_max: self.t_max,
            tail_bound: self.tail_bound,
            n_requested: self.n_requested / 2,
        };
        (halved, kept)
    }
}

/// Clenshaw-Curtis weights on [-1, 1] for m + 1 nodes cos(j pi / m), m even.
fn cc_weights(m: usize) -> Vec<f64> {
    assert!(m >= 2 && m.is_multiple_of(2));
    let mut w = vec![0.0; m + 1];
    for (j, wj) in w.iter_mut().enumerate() {
        let theta = j as f64 * PI / m as f64;
        let mut s = 0.0;
        let mut k = 0usize;
        while k <= m {
            let factor = if k == 0 || k == m { 1.0 } else { 2.0 };
            s += factor * (k as f64 * theta).cos() / (1.0 - (k * k) as f64);
            k += 2;
        }
        *wj = 2.0 * s / m as f64;
        if j == 0 || j == m {
            *wj *= 0.5;
        }
    }
    w
}

fn branch_point(mu: f64, weight: &WeightFamily, lower: bool, u: f64) -> (C64, C64) {
    let t = u.signum() * (u.abs().exp() - 1.0);
    let dt_du = u.abs().exp();
    let sign = if lower { -1.0 } else { 1.0 };
    let z = C64::new(t, sign * mu * weight.phi_star(t));
    let zp = C64::new(1.0, sign * mu * weight.phi_star_deriv(t)) * dt_du;
    (z, zp)
}

/// Nodes, complex weights and arc-length weights of one panel at order m.
fn panel_nodes(
    mu: f64,
    r: f64,
    weight: &WeightFamily,
    kind: PanelKind,
    p_from: f64,
    p_to: f64,
    m: usize,
) -> (Vec<C64>, Vec<C64>, Vec<f64>) {
    let cc = cc_weights(m);
    let mid = 0.5 * (p_from + p_to);
    let half = 0.5 * (p_to - p_from);
    let mut zs = Vec::with_capacity(m + 1);
    let mut ws = Vec::with_capacity(m + 1);
    let mut als = Vec::with_capacity(m + 1);
    for idx in 0..=m {
        // idx = 0 lands on p_from, idx = m on p_to
        let p = mid - half * (idx as f64 * PI / m as f64).cos();
        let (z, zp) = match kind {
            PanelKind::Branch { lower } => branch_point(mu, weight, lower, p),
            PanelKind::Arc => {
                let z = C64::from_polar(r, p);
                (z, C64::i() * z)
            }
        };
        zs.push(z);
        ws.push(zp * C64::new(cc[idx] * half, 0.0));
        als.push(cc[idx] * half.abs() * zp.norm());
    }
    (zs, ws, als)
}

/// How the circle |z| = R and the parabola branches meet.
enum Junction {
    /// They cross at |t_j| = value (bisection to 1e-10 relative).
    At(f64),
    /// The branch is still inside the circle at t_hi: circle-only contour.
    CircleSwallowsBranch,
    /// The circle sits inside the parabola region: branch-only contour
    /// (legal only in the even case, where the region spans the axis).
    BranchCoversCircle,
}

fn junction(mu: f64, r: f64, weight: &WeightFamily, t_hi: f64) -> Result<Junction> {
    let g = |t: f64| {
        let phi = mu * weight.phi_star(t);
        t * t + phi * phi - r * r
    };
    if g(0.0) >= 0.0 {
        return match weight.domain_case {
            DomainCase::EvenOnR => Ok(Junction::BranchCoversCircle),
            DomainCase::HalfLine => Err(Error::Geometry(format!(
                "half-line contour needs R > mu phi(0) = {}; got R = {r}",
                mu * weight.phi_star(0.0)
            ))),
        };
    }
    if g(t_hi) <= 0.0 {
        return Ok(Junction::CircleSwallowsBranch);
    }
    let (mut lo, mut hi) = (0.0, t_hi);
    while hi - lo > 1e-10 * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Junction::At(0.5 * (lo + hi)))
}

struct PieceSpec {
    kind: PanelKind,
    p_from: f64,
    p_to: f64,
    /// relative share of the node budget (parameter range times a density
    /// multiplier: the waist region near the junction gets triple density,
    /// which is where curvature and every pole of interest live)
    mass: f64,
    /// nominal panel length in parameter units
    panel_len: f64,
}

/// Density boost of the near region |u| <= u_near relative to the far tail.
const WAIST_BOOST: f64 = 3.0;
/// Extent of the boosted region past the junction, in grading units.
const WAIST_SPAN: f64 = 4.0;

/// Split a descending branch run [u_hi -> u_lo] (u_hi > u_lo >= 0 in |u|)
/// into a far piece and a boosted near piece.
fn push_branch_pieces(pieces: &mut Vec<PieceSpec>, u_from: f64, u_to: f64) {
    let split = if u_from.abs() > u_to.abs() {
        // descending in |u|: far part first
        let s = u_to + (u_from - u_to).signum() * WAIST_SPAN;
        if (u_from - s).signum() == (s - u_to).signum() && (u_from - s).abs() > 0.2 {
            Some(s)
        } else {
            None
        }
    } else {
        // ascending in |u|: near part first
        let s = u_from + (u_to - u_from).signum() * WAIST_SPAN;
        if (u_to - s).signum() == (s - u_from).signum() && (u_to - s).abs() > 0.2 {
            Some(s)
        } else {
            None
        }
    };
    let mk = |a: f64, b: f64, boost: f64| PieceSpec {
        kind: PanelKind::Branch { lower: false },
        p_from: a,
        p_to: b,
        mass: (b - a).abs() * boost,
        panel_len: if boost > 1.0 { 1.0 } else { 2.5 },
    };
    match split {
        Some(s) if u_from.abs() > u_to.abs() => {
            pieces.push(mk(u_from, s, 1.0));
            pieces.push(mk(s, u_to, WAIST_BOOST));
        }
        Some(s) => {
            pieces.push(mk(u_from, s, WAIST_BOOST));
            pieces.push(mk(s, u_to, 1.0));
        }
        None => pieces.push(mk(u_from, u_to, WAIST_BOOST)),
    }
}

fn build_first_half(
    domain: &ParabolicDomain,
    t_max: f64,
    budget: usize,
) -> Result<(Vec<Panel>, Vec<C64>, Vec<C64>, Vec<f64>)> {
    let weight = &domain.weight;
    let (mu, r) = (domain.mu, domain.r);
    let u_t = (1.0 + t_max).ln();

    let mut pieces: Vec<PieceSpec> = Vec::new();
    match (weight.domain_case, junction(mu, r, weight, t_max)?) {
        (_, Junction::CircleSwallowsBranch) => {
            unreachable!("circle-only case handled by the caller")
        }
        (DomainCase::HalfLine, Junction::BranchCoversCircle) => {
            unreachable!("rejected by junction() for the half-line case")
        }
        (DomainCase::HalfLine, Junction::At(tj)) => {
            let u_j = (1.0 + tj).ln();
            let theta_u = C64::new(tj, mu * weight.phi_star(tj)).arg();
            push_branch_pieces(&mut pieces, u_t, u_j);
            pieces.push(PieceSpec {
                kind: PanelKind::Arc,
                p_from: theta_u,
                p_to: PI,
                mass: WAIST_BOOST * (PI - theta_u) * r / (1.0 + r),
                panel_len: 1.2,
            });
        }
        (DomainCase::EvenOnR, Junction::At(tj)) => {
            let u_j = (1.0 + tj).ln();
            let theta_u = C64::new(tj, mu * weight.phi_star(tj)).arg();
            push_branch_pieces(&mut pieces, u_t, u_j);
            pieces.push(PieceSpec {
                kind: PanelKind::Arc,
                p_from: theta_u,
                p_to: PI - theta_u,
                mass: WAIST_BOOST * (PI - 2.0 * theta_u) * r / (1.0 + r),
                panel_len: 1.2,
            });
            push_branch_pieces(&mut pieces, -u_j, -u_t);
        }
        (DomainCase::EvenOnR, Junction::BranchCoversCircle) => {
            // pure parabola: one smooth run from +t_max to -t_max with a
            // parametrization kink at u = 0
            push_branch_pieces(&mut pieces, u_t, 0.0);
            push_branch_pieces(&mut pieces, 0.0, -u_t);
        }
    }

    let total_mass: f64 = pieces.iter().map(|p| p.mass).sum();
    let mut panels = Vec::new();
    let mut nodes = Vec::new();
    let mut dz = Vec::new();
    let mut arclen = Vec::new();

    for piece in &pieces {
        let share = ((budget as f64) * piece.mass / total_mass).max(5.0);
        let range = (piece.p_to - piece.p_from).abs();
        let mut n_panels = (range / piece.panel_len).ceil() as usize;
        n_panels = n_panels.clamp(1, (share / 5.0).floor().max(1.0) as usize);
        // panel order: multiple of 4 so one nested halving stays even
        let mut m = ((share / n_panels as f64).round() as usize).saturating_sub(1);
        m = m.div_ceil(4).max(1) * 4;
        for k in 0..n_panels {
            let a = piece.p_from + (piece.p_to - piece.p_from) * k as f64 / n_panels as f64;
            let b = piece.p_from + (piece.p_to - piece.p_from) * (k + 1) as f64 / n_panels as f64;
            let start = nodes.len();
            let (zs, ws, als) = panel_nodes(mu, r, weight, piece.kind, a, b, m);
            nodes.extend(zs);
            dz.extend(ws);
            arclen.extend(als);
            panels.push(Panel {
                start,
                count: m + 1,
                kind: piece.kind,
                p_from: a,
                p_to: b,
            });
        }
    }
    Ok((panels, nodes, dz, arclen))
}

/// Build the boundary contour of `domain`, truncated at parameter t_max on
/// the parabola branches, targeting n nodes. Nodes are clustered with
/// density 1/(1 + |z|) along the branches; junctions between circle and
/// parabola are solved to 1e-10. When the junction lies beyond t_max the
/// contour degenerates to the pure circle.
pub fn build_contour(domain: &ParabolicDomain, t_max: f64, n: usize) -> Result<Contour> {
    if n < 16 {
        return Err(Error::Quadrature(format!(
            "need at least 16 nodes, got {n}"
        )));
    }
    let weight = domain.weight;
    let (mu, r) = (domain.mu, domain.r);
    if t_max <= 0.0 {
        return Err(Error::Quadrature("t_max must be positive".into()));
    }

    // circle-only degeneration: branches still inside |z| = R at t_max
    if matches!(
        junction(mu, r, &weight, t_max)?,
        Junction::CircleSwallowsBranch
    ) {
        let count = n.max(16) & !1usize;
        let dtheta = 2.0 * PI / count as f64;
        let mut nodes = Vec::with_capacity(count);
        let mut dz = Vec::with_capacity(count);
        let mut arclen = Vec::with_capacity(count);
        for k in 0..count {
            let z = C64::from_polar(r, k as f64 * dtheta);
            nodes.push(z);
            dz.push(C64::i() * z * dtheta);
            arclen.push(r * dtheta);
        }
        let conj_perm = (0..count).map(|k| (count - k) % count).collect();
        return Ok(Contour {
            mu,
            r,
            weight,
            nodes,
            dz,
            arclen,
            conj_perm,
            components: vec![Component {
                start: 0,
                end: count,
                closed: true,
            }],
            panels: Vec::new(),
            closures: Vec::new(),
            t_max,
            tail_bound: 0.0,
            n_requested: n,
        });
    }

    let (mut panels, mut nodes, mut dz, mut arclen) = build_first_half(domain, t_max, n / 2)?;

    // mirror the first half: z -> conj z, weight -> -conj weight, reversed order
    let m_half = nodes.len();
    for i in (0..m_half).rev() {
        nodes.push(nodes[i].conj());
        dz.push(-dz[i].conj());
        arclen.push(arclen[i]);
    }
    // mirrored panels in reverse order, with mirrored parameters
    let first_panels = panels.len();
    for pi in (0..first_panels).rev() {
        let p = &panels[pi];
        let (pf, pt) = match p.kind {
            PanelKind::Branch { .. } => (p.p_to, p.p_from),
            PanelKind::Arc => (2.0 * PI - p.p_to, 2.0 * PI - p.p_from),
        };
        let kind = match p.kind {
            PanelKind::Branch { lower } => PanelKind::Branch { lower: !lower },
            PanelKind::Arc => PanelKind::Arc,
        };
        let start = 2 * m_half - (p.start + p.count);
        panels.push(Panel {
            start,
            count: p.count,
            kind,
            p_from: pf,
            p_to: pt,
        });
    }

    let total = nodes.len();
    let conj_perm: Vec<usize> = (0..total).map(|i| total - 1 - i).collect();
    debug_assert!(conj_perm
        .iter()
        .enumerate()
        .all(|(i, &j)| (nodes[j] - nodes[i].conj()).norm() < 1e-9 * (1.0 + nodes[i].norm())));

    // components: half-line boundary is one curve; the even case splits into
    // the upper chain (right branch + top arc + left branch) and its mirror
    let components = match weight.domain_case {
        DomainCase::HalfLine => vec![Component {
            start: 0,
            end: total,
            closed: false,
        }],
        DomainCase::EvenOnR => vec![
            Component {
                start: 0,
                end: m_half,
                closed: false,
            },
            Component {
                start: m_half,
                end: total,
                closed: false,
            },
        ],
    };

    // closure arcs between consecutive open component ends (cyclically)
    let mut closures = Vec::new();
    for (ci, comp) in components.iter().enumerate() {
        if comp.closed {
            continue;
        }
        let next = components[(ci + 1) % components.len()];
        let from = nodes[comp.end - 1];
        let to = nodes[next.start];
        closures.push(make_closure_arc(from, to)?);
    }

    // certified tail: per open end, int_{t_max}^inf sqrt(1 + (mu phi')^2)/t^2 dt
    let ends = match weight.domain_case {
        DomainCase::HalfLine => 2.0,
        DomainCase::EvenOnR => 4.0,
    };
    let slope = mu * weight.phi_star_deriv(t_max).abs();
    let tail_bound = ends * (1.0 + slope * slope).sqrt() / t_max;

    Ok(Contour {
        mu,
        r,
        weight,
        nodes,
        dz,
        arclen,
        conj_perm,
        components,
        panels,
        closures,
        t_max,
        tail_bound,
        n_requested: n,
    })
}

fn make_closure_arc(from: C64, to: C64) -> Result<ClosureArc> {
    let rad = from.norm();
    if (to.norm() - rad).abs() > 1e-6 * rad {
        return Err(Error::Geometry(
            "closure endpoints have unequal moduli; contour is not symmetric".into(),
        ));
    }
    let theta_from = from.arg();
    let dtheta = (to / from).arg();
    let m = 32usize;
    let cc = cc_weights(m);
    let mut nodes = Vec::with_capacity(m + 1);
    let mut dz = Vec::with_capacity(m + 1);
    for idx in 0..=m {
        let s = -(idx as f64 * PI / m as f64).cos();
        let theta = theta_from + 0.5 * dtheta * (1.0 + s);
        let z = C64::from_polar(rad, theta);
        nodes.push(z);
        dz.push(C64::i() * z * C64::new(cc[idx] * 0.5 * dtheta, 0.0));
    }
    Ok(ClosureArc {
        from,
        to,
        nodes,
        dz,
    })
}

/// Winding number of the contour (closed through its truncation arcs) about
/// w: node quadrature of dz/(z - w) plus the exact log term of each closure.
pub fn winding_number(contour: &Contour, w: C64) -> C64 {
    let mut acc = contour.integrate(|_, z| (z - w).inv());
    for cl in contour.closures() {
        acc += ((cl.to - w) / (cl.from - w)).ln();
    }
    acc / (C64::i() * 2.0 * PI)
}

/// Per-abscissa values of psi(x)^2 int_Gamma |dz| / |x - z|^2 plus the
/// certified tail, their max K_hat, and the refinement drift.
#[derive(Clone, Debug)]
pub struct IntegralBoundReport {
    pub k_hat: f64,
    pub per_x: Vec<(f64, f64)>,
    pub refinement_drift: f64,
}

/// Quadrature of the weighted boundary integral from the admissibility
/// estimate, per grid abscissa. The value must be stable under contour
/// refinement: the report errors if doubling the node count moves K_hat by
/// more than 1%.
pub fn integral_bound(
    weight: &WeightFamily,
    domain: &ParabolicDomain,
    contour: &Contour,
    x_grid: &[f64],
) -> Result<IntegralBoundReport> {
    let eval = |cont: &Contour, x: f64| -> Result<f64> {
        let psi2 = weight.phi(x)?;
        let mut acc = 0.0;
        for (j, &z) in cont.nodes().iter().enumerate() {
            acc += cont.arclen()[j] / (C64::new(x, 0.0) - z).norm_sqr();
        }
        Ok(psi2 * (acc + cont.tail_bound))
    };
    let fine = build_contour(domain, contour.t_max, 2 * contour.n_requested)?;
    let mut per_x = Vec::with_capacity(x_grid.len());
    let mut k_hat: f64 = 0.0;
    let mut k_fine: f64 = 0.0;
    let mut drift: f64 = 0.0;
    for &x in x_grid {
        let v = eval(contour, x)?;
        let vf = eval(&fine, x)?;
        drift = drift.max((v - vf).abs() / vf.max(1e-300));
        per_x.push((x, v));
        k_hat = k_hat.max(v);
        k_fine = k_fine.max(vf);
    }
    if drift > 0.01 {
        return Err(Error::Quadrature(format!(
            "integral bound drifts {:.3}% under refinement; increase the node count",
            100.0 * drift
        )));
    }
    Ok(IntegralBoundReport {
        k_hat,
        per_x,
        refinement_drift: drift,
    })
}

/// Check that every node is on the boundary (membership margin below tol)
/// and that the winding about an interior probe is +1. Used by tests and the
/// harness as the orientation certificate.
pub fn orientation_certificate(
    domain: &ParabolicDomain,
    contour: &Contour,
    tol: f64,
) -> Result<()> {
    for (j, &z) in contour.nodes().iter().enumerate() {
        let (_, margin) = domain.membership(z);
        if margin.abs() > tol * (1.0 + z.norm()) {
            return Err(Error::Geometry(format!(
                "node {j} at {z} is off the boundary: margin = {margin:.3e}"
            )));
        }
    }
    let probe = C64::new(0.0, 0.0);
    let w = winding_number(contour, probe);
    if (w - C64::new(1.0, 0.0)).norm() > 1e-6 {
        return Err(Error::Geometry(format!(
            "winding about 0 is {w}, expected 1"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ParabolicDomain;
    use approx::assert_relative_eq;

    fn half_weight() -> WeightFamily {
        WeightFamily::power_affine(0.5, DomainCase::HalfLine).unwrap()
    }

    fn even_weight() -> WeightFamily {
        WeightFamily::power_affine(0.5, DomainCase::EvenOnR).unwrap()
    }

    fn fixture_domain() -> ParabolicDomain {
        ParabolicDomain::new(1.0, 2.68, half_weight()).unwrap()
    }

    #[test]
    fn cc_weights_integrate_polynomials() {
        let w = cc_weights(8);
        for p in 0..=8usize {
            let mut acc = 0.0;
            for (j, wj) in w.iter().enumerate() {
                let x = (j as f64 * PI / 8.0).cos();
                acc += wj * x.powi(p as i32);
            }
            let exact = if p % 2 == 1 {
                0.0
            } else {
                2.0 / (p as f64 + 1.0)
            };
            assert!((acc - exact).abs() < 1e-13, "p = {p}: {acc} vs {exact}");
        }
    }

    #[test]
    fn junction_on_circle() {
        let d = fixture_domain();
        let tj = match junction(d.mu, d.r, &d.weight, 1e6).unwrap() {
            Junction::At(t) => t,
            _ => panic!("expected a circle/parabola crossing"),
        };
        let z = C64::new(tj, d.mu * d.weight.phi_star(tj));
        assert_relative_eq!(z.norm(), d.r, epsilon = 1e-9);
        // 2t^2 + 2t + 1 = R^2 root
        let want = (-2.0 + (4.0 + 8.0 * (d.r * d.r - 1.0)).sqrt()) / 4.0;
        assert_relative_eq!(tj, want, epsilon = 1e-8);
    }

    #[test]
    fn nodes_lie_on_boundary_and_wind_once() {
        let d = fixture_domain();
        let c = build_contour(&d, 1e7, 512).unwrap();
        orientation_certificate(&d, &c, 1e-9).unwrap();
        // exterior probe winds zero
        let w = winding_number(&c, C64::new(3.0, 6.0));
        assert!(w.norm() < 1e-6, "exterior winding {w}");
        // interior off-center probe winds one
        let w = winding_number(&c, C64::new(1.2, 0.7));
        assert!(
            (w - C64::new(1.0, 0.0)).norm() < 1e-6,
            "interior winding {w}"
        );
    }

    #[test]
    fn conjugation_is_exact_permutation() {
        let d = fixture_domain();
        let c = build_contour(&d, 1e6, 300).unwrap();
        for j in 0..c.len() {
            let k = c.conj_index(j);
            assert_eq!(c.nodes()[k], c.nodes()[j].conj());
            assert_eq!(c.conj_index(k), j);
        }
    }

    #[test]
    fn circle_only_degeneration() {
        // junction beyond t_max: contour collapses to the circle
        let d = ParabolicDomain::new(1.0, 60.0, half_weight()).unwrap();
        let c = build_contour(&d, 2.0, 256).unwrap();
        assert!(c.components()[0].closed);
        assert!(c.closures().is_empty());
        for &z in c.nodes() {
            assert_relative_eq!(z.norm(), 60.0, epsilon = 1e-12);
        }
        let w = winding_number(&c, C64::new(0.0, 0.0));
        assert!((w - C64::new(1.0, 0.0)).norm() < 1e-8);
    }

    #[test]
    fn even_case_two_components() {
        let d = ParabolicDomain::new(1.0, 2.5, even_weight()).unwrap();
        let c = build_contour(&d, 1e6, 600).unwrap();
        assert_eq!(c.components().len(), 2);
        assert_eq!(c.closures().len(), 2);
        let w = winding_number(&c, C64::new(0.0, 0.0));
        assert!((w - C64::new(1.0, 0.0)).norm() < 1e-6, "winding {w}");
        let w = winding_number(&c, C64::new(-2.0, 4.5));
        assert!(w.norm() < 1e-6);
        // conjugation exactness in the two-component layout
        for j in 0..c.len() {
            assert_eq!(c.nodes()[c.conj_index(j)], c.nodes()[j].conj());
        }
    }

    #[test]
    fn refinement_halves_winding_error() {
        let d = fixture_domain();
        let probe = C64::new(1.2, 0.7);
        let mut errs = Vec::new();
        for n in [256usize, 512] {
            let c = build_contour(&d, 1e7, n).unwrap();
            errs.push((winding_number(&c, probe) - C64::new(1.0, 0.0)).norm());
        }
        assert!(errs[1] <= 0.5 * errs[0].max(1e-13), "errors {errs:?}");
    }

    #[test]
    fn tail_bound_is_certified_and_monotone() {
        let d = fixture_domain();
        let c1 = build_contour(&d, 1e6, 256).unwrap();
        let c2 = build_contour(&d, 2e6, 256).unwrap();
        // explicit formula bound
        let slope = d.mu * d.weight.phi_star_deriv(1e6).abs();
        assert!(c1.tail_bound <= 2.0 / 1e6 * (1.0 + slope) + 1e-12);
        // doubling t_max at least halves the certified tail
        assert!(c2.tail_bound <= 0.5 * c1.tail_bound * (1.0 + 1e-12));
        // and the certificate dominates the true discarded integral (numerically)
        let mut discarded = 0.0;
        let steps = 200_000;
        let t0 = 1e6f64;
        let t1 = 1e9;
        let mut t = t0;
        let ratio = (t1 / t0).powf(1.0 / steps as f64);
        while t < t1 {
            let tn = t * ratio;
            let tm = 0.5 * (t + tn);
            let phi_d = d.weight.phi_star_deriv(tm);
            let dz = (1.0 + (d.mu * phi_d).powi(2)).sqrt() * (tn - t);
            let z2 = tm * tm + (d.mu * d.weight.phi_star(tm)).powi(2);
            discarded += 2.0 * dz / z2;
            t = tn;
        }
        assert!(
            discarded <= c1.tail_bound,
            "{discarded} vs {c1:?}",
            c1 = c1.tail_bound
        );
    }

    #[test]
    fn halved_contour_is_nested() {
        let d = fixture_domain();
        let c = build_contour(&d, 1e6, 400).unwrap();
        let (h, kept) = c.halved();
        assert_eq!(h.len(), kept.len());
        for (hj, &oj) in kept.iter().enumerate() {
            assert_eq!(h.nodes()[hj], c.nodes()[oj]);
        }
        // halved quadrature still winds correctly to coarse tolerance
        let w = winding_number(&h, C64::new(0.5, 0.2));
        assert!((w - C64::new(1.0, 0.0)).norm() < 1e-4);
        for j in 0..h.len() {
            assert_eq!(h.nodes()[h.conj_index(j)], h.nodes()[j].conj());
        }
    }

    #[test]
    fn integral_bound_stable_and_finite() {
        let d = fixture_domain();
        let c = build_contour(&d, 1e6, 512).unwrap();
        let w = half_weight();
        let rep = integral_bound(&w, &d, &c, &[1.0, 4.0, 9.0]).unwrap();
        assert!(rep.k_hat.is_finite() && rep.k_hat > 0.0);
        assert!(rep.refinement_drift <= 0.01);
        // crude bound sanity for the farthest abscissa: distance from x to
        // Gamma is at least the parabola height (up to the slope factor)
        for &(x, v) in &rep.per_x {
            assert!(v > 0.0, "x = {x}");
        }
    }
}
