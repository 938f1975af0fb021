//! Proto-carrots in the disk model and carrots in the dynamical plane.
//!
//! Polar coordinates are `(ρ, θ)` with `θ` in turns and `ρ = e^{-G}`, `G`
//! the Green potential. The proto-carrot `C(ρ0, θ0)` is
//! `ρ0 ≤ ρ ≤ e^{-|θ - θ0|}`, i.e. `|θ - θ0| ≤ G ≤ G0`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::angle::{turn_diff, Angle};
use crate::bottcher::{psi, Turn};
use crate::cuts::{Cut, CutFamily};
use crate::error::{Error, Result};
use crate::geometry::{Polygon, PolygonIndex};
use crate::poly::Polynomial;

/// Sides are traced down to this potential and then closed at the root.
pub const SIDE_END_POTENTIAL: f64 = 1e-12;
/// A side must end this close to the root.
pub const SIDE_LANDING_TOL: f64 = 1e-6;
const SIDE_SUBSTEPS: usize = 16;
const CARROT_RASTER: usize = 512;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ProtoCarrot {
    pub rho0: f64,
    /// Apex angle in turns.
    pub theta0: f64,
}

impl ProtoCarrot {
    pub fn new(rho0: f64, theta0: f64) -> Result<Self> {
        if !(rho0 > 0.0 && rho0 < 1.0) {
            return Err(Error::InvalidArgument(format!("rho0 must lie in (0, 1), got {rho0}")));
        }
        Ok(ProtoCarrot { rho0, theta0 })
    }

    /// Half-width of the angle range, `-ln ρ0`.
    pub fn half_width(&self) -> f64 {
        -self.rho0.ln()
    }

    /// `n` boundary points `(ρ, θ)`: the two spiral arcs and the circle
    /// arc, by arc parameter.
    pub fn boundary(&self, n: usize) -> Vec<(f64, f64)> {
        let t = self.half_width();
        let n = n.max(3);
        let per = n / 3;
        let mut out = Vec::with_capacity(n);
        let on_spiral = |theta: f64| ((-turn_diff(theta, self.theta0).abs()).exp(), theta);
        for j in 0..per {
            let s = t * j as f64 / per as f64;
            out.push(on_spiral(self.theta0 - s));
            out.push(on_spiral(self.theta0 + s));
        }
        for j in 0..(n - 2 * per) {
            let s = -t + 2.0 * t * j as f64 / (n - 2 * per - 1).max(1) as f64;
            out.push((self.rho0, self.theta0 + s));
        }
        out
    }
}

/// `ρ0 ≤ ρ ≤ e^{-|θ - θ0|}` with `θ - θ0` reduced to `(-1/2, 1/2]`.
pub fn proto_contains(pc: &ProtoCarrot, rho: f64, theta: f64) -> bool {
    let dt = turn_diff(theta, pc.theta0).abs();
    pc.rho0 <= rho && rho <= (-dt).exp()
}

/// Radial distance from `(ρ, θ)` to the boundary of `pc`, over the boundary
/// pieces above or below the point.
fn boundary_residual(pc: &ProtoCarrot, rho: f64, theta: f64) -> f64 {
    let dt = turn_diff(theta, pc.theta0).abs();
    let mut best = f64::INFINITY;
    if dt <= pc.half_width() + 1e-15 {
        best = best.min((rho - (-dt).exp()).abs());
        best = best.min((rho - pc.rho0).abs());
    }
    best
}

/// Maps boundary samples of `pc` by `(ρ, θ) ↦ (ρ^d, dθ)` and returns the
/// largest distance to the boundary of `C(ρ0^d, dθ0)`.
pub fn proto_image_check(pc: &ProtoCarrot, d: u32, samples: usize) -> f64 {
    let image = ProtoCarrot {
        rho0: pc.rho0.powi(d as i32),
        theta0: pc.theta0 * d as f64,
    };
    pc.boundary(samples)
        .into_iter()
        .map(|(rho, theta)| boundary_residual(&image, rho.powi(d as i32), theta * d as f64))
        .fold(0.0, f64::max)
}

/// A carrot: two sides landing at the root of a cut and an equipotential
/// arc, with the region they bound.
#[derive(Clone, Debug)]
pub struct Carrot {
    pub theta_r: Angle,
    pub theta_l: Angle,
    pub root: Complex64,
    pub periodic: bool,
    /// Outer potential `G = -ln ρ`.
    pub potential: f64,
    /// Points of `R_Γ(ρ)` from the equipotential down to the root.
    pub side_r: Vec<Complex64>,
    /// Points of `L_Γ(ρ)` from the equipotential down to the root.
    pub side_l: Vec<Complex64>,
    /// `E_Γ(ρ)` from the top of `side_r` counterclockwise to the top of
    /// `side_l`.
    pub equip_arc: Vec<Complex64>,
    /// Angles (turns) of the `equip_arc` points.
    pub arc_angles: Vec<f64>,
    pub boundary: Polygon,
    index: PolygonIndex,
}

impl Carrot {
    pub fn contains(&self, z: Complex64) -> bool {
        self.index.contains(z)
    }

    /// Angle range of the carrot in turns: start and counterclockwise
    /// length.
    pub fn angle_range(&self) -> (f64, f64) {
        let len = crate::angle::arc_length(self.theta_r.to_f64(), self.theta_l.to_f64())
            + 2.0 * self.potential;
        (self.theta_r.to_f64() - self.potential, len)
    }

    /// `side_r` reversed, then `side_l` without the shared root: the arc
    /// `R ∪ L` from the top of `R` through the root to the top of `L`.
    pub fn side_arc(&self) -> Vec<Complex64> {
        let mut arc: Vec<Complex64> = self.side_r.to_vec();
        arc.extend(self.side_l.iter().rev().skip(1));
        arc
    }
}

/// A side of a carrot: the field-line spiral `θ = θ_Γ ± t`, `G = t` for `t`
/// from `g_top` down to [`SIDE_END_POTENTIAL`], then the root.
///
/// Each point is `ψ(t, θ_Γ ± t)`, descended along its own field line of
/// constant angle. A single continuation in `t` would have to resolve the
/// angle at level `k`, where it turns `d^k·t` times per unit of `ln t`.
pub fn trace_side(
    p: &Polynomial,
    theta: Angle,
    sign: f64,
    g_top: f64,
    root: Complex64,
) -> Result<Vec<Complex64>> {
    let h = (p.degree() as f64).ln() / SIDE_SUBSTEPS as f64;
    let u0 = g_top.ln();
    let n = ((g_top / SIDE_END_POTENTIAL).ln() / h).ceil() as usize;
    let mut pts: Vec<Complex64> = (0..=n)
        .into_par_iter()
        .map(|j| {
            let u = u0 - j as f64 * h;
            psi(p, u, Turn::Offset(theta, sign * u.exp()))
        })
        .collect::<Result<_>>()?;
    let gap = (pts[pts.len() - 1] - root).norm();
    if gap > SIDE_LANDING_TOL {
        return Err(Error::WrongPullback {
            cut: format!("{theta}"),
            gap,
        });
    }
    pts.push(root);
    Ok(pts)
}

/// The carrot of `cut` at outer potential `g` (`ρ = e^{-g}`).
///
/// For a periodic degenerate cut the sides are the images of the
/// proto-carrot spirals. For a preperiodic cut they are the field-line
/// spirals `θ_r - t` and `θ_l + t`, which `P` maps onto the image carrot's
/// sides at `d·t`; the branch is the one that lands at the cut's root,
/// checked before the carrot is returned.
pub fn build_carrot(p: &Polynomial, family: &CutFamily, index: usize, g: f64) -> Result<Carrot> {
    let cut: &Cut = &family.cuts[index];
    if !(g > 0.0 && g < 0.25) {
        return Err(Error::InvalidArgument(format!(
            "carrot potential must lie in (0, 1/4), got {g}"
        )));
    }
    let (side_r, side_l) = rayon::join(
        || trace_side(p, cut.theta_r, -1.0, g, cut.root),
        || trace_side(p, cut.theta_l, 1.0, g, cut.root),
    );
    let (side_r, side_l) = (side_r?, side_l?);
    let len = if cut.degenerate { 0.0 } else { cut.arc_length() } + 2.0 * g;
    let n_arc = ((len * 2048.0).ceil() as usize).max(64);
    let lg = g.ln();
    let arc_angles: Vec<f64> = (0..=n_arc)
        .map(|j| cut.theta_r.to_f64() - g + len * j as f64 / n_arc as f64)
        .collect();
    let mut equip_arc: Vec<Complex64> = (1..n_arc)
        .into_par_iter()
        .map(|j| psi(p, lg, Turn::Offset(cut.theta_r, -g + len * j as f64 / n_arc as f64)))
        .collect::<Result<_>>()?;
    equip_arc.insert(0, side_r[0]);
    equip_arc.push(side_l[0]);

    let mut pts: Vec<Complex64> = Vec::new();
    pts.extend(side_r.iter().rev());
    pts.extend(equip_arc[1..equip_arc.len() - 1].iter());
    pts.extend(side_l.iter().take(side_l.len() - 1));
    let boundary = Polygon::new(pts);
    let idx = PolygonIndex::new(&boundary, CARROT_RASTER);
    Ok(Carrot {
        theta_r: cut.theta_r,
        theta_l: cut.theta_l,
        root: cut.root,
        periodic: family.flags[index].periodic,
        potential: g,
        side_r,
        side_l,
        equip_arc,
        arc_angles,
        boundary,
        index: idx,
    })
}

/// CSV polylines `carrot,arc,index,re,im`, arcs named `R`, `L` and `E`.
pub fn write_carrots_csv<W: std::io::Write>(w: &mut W, carrots: &[Carrot]) -> std::io::Result<()> {
    writeln!(w, "carrot,arc,index,re,im")?;
    for (c, carrot) in carrots.iter().enumerate() {
        for (name, arc) in [("R", &carrot.side_r), ("L", &carrot.side_l), ("E", &carrot.equip_arc)] {
            for (i, z) in arc.iter().enumerate() {
                writeln!(w, "{c},{name},{i},{:.17e},{:.17e}", z.re, z.im)?;
            }
        }
    }
    Ok(())
}

/// Carrots of every cut of the family, checked for pairwise disjointness.
pub fn build_carrots(p: &Polynomial, family: &CutFamily, g: f64) -> Result<Vec<Carrot>> {
    let carrots = (0..family.len())
        .map(|i| build_carrot(p, family, i, g))
        .collect::<Result<Vec<_>>>()?;
    check_disjoint(&carrots)?;
    Ok(carrots)
}

/// `CarrotOverlap` if some boundary point of one carrot lies inside
/// another.
pub fn check_disjoint(carrots: &[Carrot]) -> Result<()> {
    for (i, a) in carrots.iter().enumerate() {
        for (j, b) in carrots.iter().enumerate() {
            if i != j && a.boundary.points().par_iter().any(|&z| b.contains(z)) {
                return Err(Error::CarrotOverlap {
                    a: i.min(j),
                    b: i.max(j),
                });
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn proto_membership() {
        let pc = ProtoCarrot::new(0.9, 0.0).unwrap();
        assert!(proto_contains(&pc, 0.95, 0.0));
        assert!(!proto_contains(&pc, 0.95, 0.2));
        assert!(!proto_contains(&pc, 0.89, 0.0));
        assert!(ProtoCarrot::new(1.0, 0.0).is_err());
    }

    #[test]
    fn proto_equivariance() {
        let pc = ProtoCarrot::new(0.95, 0.0).unwrap();
        assert_eq!(proto_image_check(&pc, 1, 999), 0.0);
        assert!(proto_image_check(&pc, 3, 1000) < 1e-12);
        let pc = ProtoCarrot::new(0.95, 1.0 / 3.0).unwrap();
        assert!(proto_image_check(&pc, 3, 1000) < 1e-12);
    }
}
