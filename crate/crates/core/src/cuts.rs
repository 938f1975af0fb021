//! Cuts (pairs of co-landing rays), their wedges, and finite cut families:
//! invariance, admissibility, legality and root classification.

use std::collections::HashMap;
use std::f64::consts::{PI, TAU};
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::angle::{arc_contains, arc_length, tuple_orbit, Angle};
use crate::bottcher::{external_angle, psi, RayOptions, RayPolyline, RayTracer, Turn};
use crate::cycles::{classify_multiplier, root_of_unity_order, terminal_cycle, CycleKind};
use crate::error::{Error, Result};
use crate::geometry::{Polygon, PolygonIndex};
use crate::poly::{green_potential, Polynomial};

/// Default truncation potential of wedge polygons.
pub const DEFAULT_G0: f64 = 0.125;
/// Landing points further apart than this do not form a cut.
pub const COLANDING_TOL: f64 = 1e-5;
/// A root this close to a critical point is that critical point.
pub const CRITICAL_TOL: f64 = 1e-6;

const WEDGE_RASTER: usize = 512;
const PARABOLIC_PROBE: [f64; 2] = [1e-4, 5e-5];

/// Two external rays landing at a common root.
#[derive(Clone, Debug)]
pub struct Cut {
    pub theta_r: Angle,
    pub theta_l: Angle,
    pub root: Complex64,
    pub degenerate: bool,
    pub ray_r: RayPolyline,
    pub ray_l: RayPolyline,
}

impl Cut {
    pub fn label(&self) -> String {
        format!("({},{})", self.theta_r, self.theta_l)
    }

    /// `|I_Γ|`: counterclockwise angle length from `θ_r` to `θ_l`.
    pub fn arc_length(&self) -> f64 {
        if self.degenerate {
            0.0
        } else {
            arc_length(self.theta_r.to_f64(), self.theta_l.to_f64())
        }
    }

    /// Angles of the image cut.
    pub fn image_angles(&self, d: u64) -> (Angle, Angle) {
        (self.theta_r.mul(d), self.theta_l.mul(d))
    }
}

/// Traces both rays and checks that they co-land.
pub fn build_cut(p: &Polynomial, theta_r: Angle, theta_l: Angle) -> Result<Cut> {
    let mut tracer = RayTracer::new(p, RayOptions::default());
    build_cut_with(&mut tracer, theta_r, theta_l)
}

/// [`build_cut`] sharing a ray cache.
pub fn build_cut_with(
    tracer: &mut RayTracer<'_>,
    theta_r: Angle,
    theta_l: Angle,
) -> Result<Cut> {
    let ray_r = tracer.trace(theta_r)?;
    let ray_l = if theta_l == theta_r {
        ray_r.clone()
    } else {
        tracer.trace(theta_l)?
    };
    let lr = landing_of(&ray_r)?;
    let ll = landing_of(&ray_l)?;
    let gap = (lr - ll).norm();
    if gap > COLANDING_TOL {
        return Err(Error::NoColanding {
            theta_r: theta_r.to_string(),
            theta_l: theta_l.to_string(),
            gap,
        });
    }
    Ok(Cut {
        theta_r,
        theta_l,
        root: lr,
        degenerate: theta_r == theta_l,
        ray_r,
        ray_l,
    })
}

fn landing_of(ray: &RayPolyline) -> Result<Complex64> {
    match ray.landing {
        Some(l) if l.converged => Ok(l.point),
        _ => Err(Error::NotConverged {
            angle: ray.angle.to_string(),
            reason: "no landing point".into(),
        }),
    }
}

/// The wedge of a nondegenerate cut, truncated at potential `g0`.
///
/// Its angle interval is the open counterclockwise arc from `θ_r` to `θ_l`.
/// The boundary runs from the root up `R(θ_r)` to the equipotential
/// `E(g0)`, counterclockwise along it to `R(θ_l)` and back down to the root.
#[derive(Clone, Debug)]
pub struct Wedge {
    pub theta_r: Angle,
    pub theta_l: Angle,
    pub root: Complex64,
    pub g0: f64,
    pub boundary: Polygon,
    index: PolygonIndex,
}

impl Wedge {
    /// `None` for a degenerate cut, whose wedge is empty.
    pub fn new(p: &Polynomial, cut: &Cut, g0: f64) -> Result<Option<Wedge>> {
        if cut.degenerate {
            return Ok(None);
        }
        if !(g0 > 0.0) {
            return Err(Error::InvalidArgument(format!("truncation potential {g0} must be positive")));
        }
        let lg = g0.ln();
        let top_r = psi(p, lg, Turn::Exact(cut.theta_r))?;
        let top_l = psi(p, lg, Turn::Exact(cut.theta_l))?;
        let len = cut.arc_length();
        let n_arc = ((len * 2048.0).ceil() as usize).max(64);
        let arc: Vec<Complex64> = (1..n_arc)
            .into_par_iter()
            .map(|j| psi(p, lg, Turn::Offset(cut.theta_r, len * j as f64 / n_arc as f64)))
            .collect::<Result<_>>()?;

        let mut pts = Vec::new();
        pts.push(cut.root);
        let up: Vec<Complex64> = cut.ray_r.below(g0).map(|(_, z)| z).collect();
        pts.extend(up.iter().rev());
        pts.push(top_r);
        pts.extend(arc);
        pts.push(top_l);
        pts.extend(cut.ray_l.below(g0).map(|(_, z)| z));
        let boundary = Polygon::new(pts);
        let index = PolygonIndex::new(&boundary, WEDGE_RASTER);
        Ok(Some(Wedge {
            theta_r: cut.theta_r,
            theta_l: cut.theta_l,
            root: cut.root,
            g0,
            boundary,
            index,
        }))
    }

    /// Angle-arc membership of an external angle (in turns).
    pub fn angle_in_arc(&self, theta: f64) -> bool {
        arc_contains(self.theta_r.to_f64(), self.theta_l.to_f64(), theta)
    }

    /// Polygon test only. Exact for points of potential at most `g0`,
    /// in particular for every point of the filled Julia set.
    pub fn contains_bounded(&self, z: Complex64) -> bool {
        self.index.contains(z)
    }

    /// Membership of an arbitrary point. Above the truncation equipotential
    /// the external angle decides.
    pub fn contains(&self, p: &Polynomial, z: Complex64) -> bool {
        if green_potential(p, z) <= self.g0 {
            return self.index.contains(z);
        }
        match external_angle(p, z) {
            Some((_, theta)) => self.angle_in_arc(theta),
            None => false,
        }
    }
}

/// Membership primitive; degenerate cuts have empty wedges.
pub fn wedge_contains(p: &Polynomial, w: Option<&Wedge>, z: Complex64) -> bool {
    w.is_some_and(|w| w.contains(p, z))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct CutFlags {
    pub periodic: bool,
    pub preperiodic: bool,
    pub critical_root: bool,
    pub fictitious: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RootClass {
    OutwardRepelling,
    OutwardParabolic,
    /// Parabolic, with no attracting direction entering a wedge.
    Parabolic,
    Unresolved,
}

impl RootClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            RootClass::OutwardRepelling => "outward-repelling",
            RootClass::OutwardParabolic => "outward-parabolic",
            RootClass::Parabolic => "parabolic",
            RootClass::Unresolved => "unresolved",
        }
    }
}

/// A finite family of cuts with their wedges and combinatorics.
#[derive(Clone, Debug)]
pub struct CutFamily {
    pub degree: usize,
    pub g0: f64,
    pub cuts: Vec<Cut>,
    pub wedges: Vec<Option<Wedge>>,
    /// Index of the image cut, if it belongs to the family.
    pub forward: Vec<Option<usize>>,
    pub flags: Vec<CutFlags>,
}

impl CutFamily {
    pub fn empty(p: &Polynomial, g0: f64) -> Self {
        CutFamily {
            degree: p.degree(),
            g0,
            cuts: Vec::new(),
            wedges: Vec::new(),
            forward: Vec::new(),
            flags: Vec::new(),
        }
    }

    /// Builds all cuts (rays traced once and shared) and their wedges.
    pub fn build(p: &Polynomial, pairs: &[(Angle, Angle)], g0: f64) -> Result<Self> {
        let mut tracer = RayTracer::new(p, RayOptions::default());
        let mut cuts = Vec::with_capacity(pairs.len());
        for &(r, l) in pairs {
            cuts.push(build_cut_with(&mut tracer, r, l)?);
        }
        Self::from_cuts(p, cuts, g0)
    }

    pub fn from_cuts(p: &Polynomial, cuts: Vec<Cut>, g0: f64) -> Result<Self> {
        let d = p.degree() as u64;
        let wedges = cuts
            .iter()
            .map(|c| Wedge::new(p, c, g0))
            .collect::<Result<Vec<_>>>()?;
        let by_angles: HashMap<(Angle, Angle), usize> = cuts
            .iter()
            .enumerate()
            .map(|(i, c)| ((c.theta_r, c.theta_l), i))
            .collect();
        let forward: Vec<Option<usize>> = cuts
            .iter()
            .map(|c| by_angles.get(&c.image_angles(d)).copied())
            .collect();

        // Degenerate cuts reached from some nondegenerate cut.
        let mut reached = vec![false; cuts.len()];
        for (i, c) in cuts.iter().enumerate() {
            if c.degenerate {
                continue;
            }
            let mut j = forward[i];
            let mut steps = 0;
            while let Some(k) = j {
                if steps > cuts.len() {
                    break;
                }
                reached[k] = true;
                j = forward[k];
                steps += 1;
            }
        }
        let flags = cuts
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let o = tuple_orbit(c.theta_r, d);
                let periodic = o.preperiod == 0 && tuple_orbit(c.theta_l, d).preperiod == 0;
                CutFlags {
                    periodic,
                    preperiodic: !periodic,
                    critical_root: p
                        .critical_points()
                        .iter()
                        .any(|cp| (cp - c.root).norm() < CRITICAL_TOL),
                    fictitious: c.degenerate && !reached[i],
                }
            })
            .collect();
        Ok(CutFamily {
            degree: p.degree(),
            g0,
            cuts,
            wedges,
            forward,
            flags,
        })
    }

    pub fn len(&self) -> usize {
        self.cuts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cuts.is_empty()
    }

    /// Whether `z` lies in some wedge of the family.
    pub fn in_any_wedge(&self, p: &Polynomial, z: Complex64) -> bool {
        self.wedges.iter().flatten().any(|w| w.contains(p, z))
    }

    /// [`Self::in_any_wedge`] for points of potential at most `g0`.
    pub fn in_any_wedge_bounded(&self, z: Complex64) -> bool {
        self.wedges.iter().flatten().any(|w| w.contains_bounded(z))
    }

    /// Indices of nondegenerate cuts whose root is a critical point.
    pub fn critical_cuts(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| !self.cuts[i].degenerate && self.flags[i].critical_root)
            .collect()
    }

    /// Indices of nondegenerate periodic cuts (`Z_pc`).
    pub fn periodic_nondegenerate(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| !self.cuts[i].degenerate && self.flags[i].periodic)
            .collect()
    }
}

/// One line of a validation report.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckRow {
    pub check: String,
    pub subject: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckRow {
    fn new(check: &str, subject: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        CheckRow {
            check: check.into(),
            subject: subject.into(),
            passed,
            detail: detail.into(),
        }
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Writes report rows as CSV: `check,subject,passed,detail`.
pub fn write_rows_csv<W: Write>(w: &mut W, rows: &[CheckRow]) -> std::io::Result<()> {
    writeln!(w, "check,subject,passed,detail")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{}",
            csv_field(&r.check),
            csv_field(&r.subject),
            r.passed,
            csv_field(&r.detail)
        )?;
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct AdmissibleReport {
    pub invariant: bool,
    /// Cuts whose image is missing, with the missing angle pair.
    pub missing_images: Vec<(usize, String)>,
    /// `(i, j)`: cut `i` enters the wedge of cut `j`.
    pub offending: Vec<(usize, usize)>,
    pub admissible: bool,
    pub rows: Vec<CheckRow>,
}

const RAY_SAMPLES: usize = 400;

/// Forward invariance and the principal-component condition.
pub fn check_admissible(p: &Polynomial, z: &CutFamily) -> AdmissibleReport {
    let d = p.degree() as u64;
    let mut rows = Vec::new();
    if z.is_empty() {
        rows.push(CheckRow::new("admissible", "family", true, "empty family; A = K_P"));
        return AdmissibleReport {
            invariant: true,
            missing_images: Vec::new(),
            offending: Vec::new(),
            admissible: true,
            rows,
        };
    }
    let mut missing = Vec::new();
    for (i, c) in z.cuts.iter().enumerate() {
        let (r, l) = c.image_angles(d);
        match z.forward[i] {
            Some(j) => rows.push(CheckRow::new(
                "invariance",
                c.label(),
                true,
                format!("maps to {}", z.cuts[j].label()),
            )),
            None => {
                let img = format!("({r},{l})");
                rows.push(CheckRow::new(
                    "invariance",
                    c.label(),
                    false,
                    format!("image cut {img} missing"),
                ));
                missing.push((i, img));
            }
        }
    }
    let mut offending = Vec::new();
    for (i, c) in z.cuts.iter().enumerate() {
        for (j, w) in z.wedges.iter().enumerate() {
            let Some(w) = w else { continue };
            if i == j {
                continue;
            }
            let mut samples = vec![c.root];
            for ray in [&c.ray_r, &c.ray_l] {
                let step = (ray.points.len() / RAY_SAMPLES).max(1);
                samples.extend(ray.points.iter().step_by(step));
            }
            if samples.par_iter().any(|&s| w.contains(p, s)) {
                offending.push((i, j));
                rows.push(CheckRow::new(
                    "principal-component",
                    c.label(),
                    false,
                    format!("enters the wedge of {}", z.cuts[j].label()),
                ));
            }
        }
    }
    let invariant = missing.is_empty();
    if offending.is_empty() {
        rows.push(CheckRow::new(
            "principal-component",
            "family",
            true,
            "no cut enters another cut's wedge",
        ));
    }
    let admissible = invariant && offending.is_empty();
    rows.push(CheckRow::new(
        "admissible",
        "family",
        admissible,
        if admissible { "admissible" } else { "not admissible" },
    ));
    AdmissibleReport {
        invariant,
        missing_images: missing,
        offending,
        admissible,
        rows,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LegalReport {
    pub fictitious: Vec<usize>,
    /// Nondegenerate periodic cuts (`Z_pc`).
    pub periodic_nondegenerate: Vec<usize>,
    /// Nondegenerate cuts failing the (pre)critical or repelling-root test.
    pub failing: Vec<usize>,
    pub legal: bool,
    pub rows: Vec<CheckRow>,
}

/// Legality: every nondegenerate cut is (pre)critical and its orbit ends
/// on a degenerate cut with repelling periodic root; `Z_pc = ∅`; no
/// fictitious cuts.
pub fn check_legal(p: &Polynomial, z: &CutFamily) -> LegalReport {
    let mut rows = Vec::new();
    let mut failing = Vec::new();
    for (i, c) in z.cuts.iter().enumerate() {
        if c.degenerate {
            continue;
        }
        // Forward orbit inside the family until the first degenerate cut.
        let mut orbit = vec![i];
        let mut cur = z.forward[i];
        let mut end = None;
        while let Some(k) = cur {
            if orbit.contains(&k) {
                break;
            }
            orbit.push(k);
            if z.cuts[k].degenerate {
                end = Some(k);
                break;
            }
            cur = z.forward[k];
        }
        let critical = orbit
            .iter()
            .filter(|&&k| !z.cuts[k].degenerate)
            .any(|&k| z.flags[k].critical_root);
        rows.push(CheckRow::new(
            "precritical",
            c.label(),
            critical,
            if z.flags[i].critical_root {
                format!("root {} is critical", fmt_point(c.root))
            } else if critical {
                "orbit meets a critical root".to_string()
            } else {
                format!("root {} is not (pre)critical", fmt_point(c.root))
            },
        ));
        let terminal = end.map(|k| {
            let root = z.cuts[k].root;
            let cyc = terminal_cycle(p, root, 64, 1e-9);
            (k, root, cyc)
        });
        let repelling_end = match &terminal {
            Some((k, root, Some((0, cyc)))) => {
                let ok = cyc.kind == CycleKind::Repelling;
                rows.push(CheckRow::new(
                    "terminal-root",
                    c.label(),
                    ok,
                    format!(
                        "maps to degenerate cut {} at {} period {} multiplier {}",
                        z.cuts[*k].label(),
                        fmt_point(*root),
                        cyc.period,
                        fmt_point(cyc.multiplier)
                    ),
                ));
                ok
            }
            Some((k, root, _)) => {
                rows.push(CheckRow::new(
                    "terminal-root",
                    c.label(),
                    false,
                    format!(
                        "degenerate cut {} at {} has no periodic root",
                        z.cuts[*k].label(),
                        fmt_point(*root)
                    ),
                ));
                false
            }
            None => {
                rows.push(CheckRow::new(
                    "terminal-root",
                    c.label(),
                    false,
                    "orbit never reaches a degenerate cut",
                ));
                false
            }
        };
        if !(critical && repelling_end) {
            failing.push(i);
        }
    }
    let pc = z.periodic_nondegenerate();
    rows.push(CheckRow::new(
        "periodic-nondegenerate",
        "family",
        pc.is_empty(),
        if pc.is_empty() {
            "none".to_string()
        } else {
            pc.iter().map(|&i| z.cuts[i].label()).collect::<Vec<_>>().join(" ")
        },
    ));
    let fictitious: Vec<usize> = (0..z.len()).filter(|&i| z.flags[i].fictitious).collect();
    rows.push(CheckRow::new(
        "fictitious",
        "family",
        fictitious.is_empty(),
        if fictitious.is_empty() {
            "none".to_string()
        } else {
            fictitious.iter().map(|&i| z.cuts[i].label()).collect::<Vec<_>>().join(" ")
        },
    ));
    let legal = failing.is_empty() && pc.is_empty() && fictitious.is_empty();
    rows.push(CheckRow::new(
        "legal",
        "family",
        legal,
        if legal { "legal" } else { "not legal" },
    ));
    LegalReport {
        fictitious,
        periodic_nondegenerate: pc,
        failing,
        legal,
        rows,
    }
}

pub(crate) fn fmt_point(z: Complex64) -> String {
    let clean = |x: f64| if x.abs() < 5e-13 { 0.0 } else { x };
    let (re, im) = (clean(z.re), clean(z.im));
    if im == 0.0 {
        format!("{re:.9}")
    } else {
        format!("{re:.9}{im:+.9}i")
    }
}

/// Attracting directions at a parabolic point `w` of `P^n` with
/// `(P^n)'(w) = 1`: unit `v` with `a v^m` negative, where `a h^{m+1}` is
/// the first nonlinear term.
pub fn attracting_directions(p: &Polynomial, w: Complex64, n: usize) -> Option<Vec<Complex64>> {
    const ORDER: usize = 12;
    let s = p.iterate_series(w, n, ORDER);
    let scale = s[1].norm().max(1.0);
    let (m1, a) = (2..=ORDER).map(|k| (k, s[k])).find(|(_, c)| c.norm() > 1e-9 * scale)?;
    let m = m1 - 1;
    Some(
        (0..m)
            .map(|j| Complex64::from_polar(1.0, (PI - a.arg() + TAU * j as f64) / m as f64))
            .collect(),
    )
}

/// Outward-repelling / outward-parabolic classification of a cut's root.
pub fn classify_root(p: &Polynomial, z: &CutFamily, cut: &Cut) -> RootClass {
    let Some((pre, cyc)) = terminal_cycle(p, cut.root, 256, 1e-9) else {
        return RootClass::Unresolved;
    };
    match classify_multiplier(cyc.multiplier) {
        CycleKind::Repelling => return RootClass::OutwardRepelling,
        CycleKind::Parabolic => {}
        _ => return RootClass::Unresolved,
    }
    let Some(q) = root_of_unity_order(cyc.multiplier, 1e-6) else {
        return RootClass::Unresolved;
    };
    let w = p.iterate(cut.root, pre);
    let Some(dirs) = attracting_directions(p, w, q as usize * cyc.period) else {
        return RootClass::Unresolved;
    };
    // Pull the directions back to the root through the leading term of P^pre.
    let root_dirs: Vec<Complex64> = if pre == 0 {
        dirs
    } else {
        let s = p.iterate_series(cut.root, pre, 8);
        let Some((j, c)) = (1..s.len()).map(|k| (k, s[k])).find(|(_, c)| c.norm() > 1e-12) else {
            return RootClass::Unresolved;
        };
        dirs.iter()
            .flat_map(|u| {
                let base = (u / c).powf(1.0 / j as f64);
                (0..j).map(move |k| base * Complex64::from_polar(1.0, TAU * k as f64 / j as f64))
            })
            .map(|v| v / v.norm())
            .collect()
    };
    let mut any_in = false;
    for v in root_dirs {
        let hits: Vec<bool> = PARABOLIC_PROBE
            .iter()
            .map(|r| z.in_any_wedge(p, cut.root + v * *r))
            .collect();
        if hits.iter().any(|&h| h != hits[0]) {
            return RootClass::Unresolved;
        }
        any_in |= hits[0];
    }
    if any_in {
        RootClass::OutwardParabolic
    } else {
        RootClass::Parabolic
    }
}

/// Root classification rows for every cut of the family.
pub fn classify_roots(p: &Polynomial, z: &CutFamily) -> Vec<CheckRow> {
    z.cuts
        .iter()
        .map(|c| {
            let class = classify_root(p, z, c);
            CheckRow::new(
                "root-class",
                c.label(),
                class != RootClass::OutwardParabolic,
                format!("{} at {}", class.as_str(), fmt_point(c.root)),
            )
        })
        .collect()
}
