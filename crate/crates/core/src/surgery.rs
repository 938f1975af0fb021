//! The carrot modification `P^c` and its quasi-regular extension `f`.
//!
//! Inside the outer equipotential `E(ρ)` (potential `g0`), `f = P` except on
//! the carrots of critical cuts. There `f` is a patch map onto the image
//! carrot `C_{P(Γ)}(ρ^d)`: it agrees with `P` on the two sides and is
//! affine in external angle on the equipotential arc, so that `E_Γ(ρ)`
//! covers a small arc instead of wrapping around `E(ρ^d)`. Above `E(ρ)` a
//! cap in potential-angle coordinates blends the boundary map into
//! `(G, θ) ↦ (d_c G, d_c θ)`.
//!
//! Inside the cut's wedge the patch is a Coons blend of its boundary arcs
//! written in `ζ = log(z - root)`, where the root sits at `Re ζ = -∞` and
//! the wedge becomes a half-strip. A planar blend would cut across the
//! complement when the wedge's angle at the root is reflex, which it is at
//! a critical root. The rest of the carrot uses Böttcher coordinates.

use std::f64::consts::{PI, TAU};
use std::io::Write;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::angle::{frac, Angle};
use crate::avoiding::{GridSpec, Mask};
use crate::bottcher::{external_angle, psi, Turn};
use crate::carrot::{build_carrots, Carrot, SIDE_LANDING_TOL};
use crate::cuts::CutFamily;
use crate::error::{Error, Result};
use crate::geometry::{Polygon, PolygonIndex};
use crate::poly::{green_potential_budget, Polynomial};

/// Fixed seed of the visit-count experiment.
pub const DEFAULT_SEED: u64 = 0x5eed_ca77_0001;
/// Width in `s` of the strips along the sides where the patch map is
/// blended into `P`.
pub const BLEND_WIDTH: f64 = 0.02;
/// Boundary samples per patch for the continuity check.
pub const CONTINUITY_SAMPLES: usize = 1000;
/// Largest accepted jump across a patch boundary.
pub const CONTINUITY_TOL: f64 = 1e-6;
/// Equipotential arc samples per turn in the patch data.
const ARC_DENSITY: f64 = 16384.0;
/// Iterations enough for any point above `E(ρ)` to pass the Green bailout.
const POTENTIAL_BUDGET: usize = 64;
const SEED_S: usize = 32;
const SEED_T: usize = 64;
const PATCH_RASTER: usize = 1024;

/// Piecewise-linear curve on the uniform grid of `[0, 1]`, extended
/// linearly beyond it.
#[derive(Clone, Debug)]
struct Curve(Vec<Complex64>);

impl Curve {
    /// Value and derivative at `x`.
    fn eval(&self, x: f64) -> (Complex64, Complex64) {
        let n = self.0.len() - 1;
        let y = x * n as f64;
        let i = (y.floor().max(0.0) as usize).min(n - 1);
        let d = (self.0[i + 1] - self.0[i]) * n as f64;
        (self.0[i] + d * ((y - i as f64) / n as f64), d)
    }
}

/// Coons patch in `ζ`: `R(t)` at `s = 0`, `L(t)` at `s = 1`, `E(s)` at
/// `t = 1`, and the root at `t → -∞` in `Re ζ`. The deviation of `E` from
/// its chord enters with weight `e^{(t - 1)/τ}`, so that below the top
/// the patch is the straight interpolation between the sides.
#[derive(Clone, Debug)]
struct Coons {
    r: Curve,
    l: Curve,
    e: Curve,
    tau: f64,
}

impl Coons {
    /// `X(s, t)` and its partial derivatives.
    fn eval(&self, s: f64, t: f64) -> (Complex64, Complex64, Complex64) {
        let (r, dr) = self.r.eval(t);
        let (l, dl) = self.l.eval(t);
        let (e, de) = self.e.eval(s);
        let (e0, e1) = (self.e.0[0], self.e.0[self.e.0.len() - 1]);
        let w = ((t - 1.0) / self.tau).exp();
        let bump = e - e0 * (1.0 - s) - e1 * s;
        let x = r * (1.0 - s) + l * s + bump * w;
        let xs = l - r + (de + e0 - e1) * w;
        let xt = dr * (1.0 - s) + dl * s + bump * (w / self.tau);
        (x, xs, xt)
    }
}

/// Unwraps `arg` along a boundary sequence and returns `ζ = log(z - a)`.
fn unwrap_log(pts: &[Complex64], a: Complex64) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(pts.len());
    let mut prev: Option<f64> = None;
    for z in pts {
        let h = z - a;
        let mut arg = h.arg();
        if let Some(p) = prev {
            arg += TAU * ((p - arg) / TAU).round();
        }
        prev = Some(arg);
        out.push(Complex64::new(h.norm().ln(), arg));
    }
    out
}

/// `P(a + h) - P(a)` from the Taylor coefficients at `a`.
fn delta_eval(taylor: &[Complex64], h: Complex64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for c in taylor.iter().skip(1).rev() {
        acc = acc * h + c;
    }
    acc * h
}

/// Carrot replacement on one critical carrot.
///
/// The cut's two external rays and the equipotential at about half the
/// outer potential bound the wedge `Ω`, which holds the part of `K_P`
/// inside the carrot. Off `Ω` the carrot lies in the basin of infinity and
/// the map is `(G, x) ↦ (dG, A_G(x))` in Böttcher coordinates, `x` the
/// angle measured from the right side's edge and `A_G` piecewise linear
/// and increasing: `A_G(0) = 0` makes it `P` on the sides, and `A_g` is
/// affine. Inside `Ω` a Coons patch in `ζ` carries the rest onto the
/// complementary region of the image carrot. Rays meet equipotentials at
/// right angles, so this patch has none of the carrot's thin corners on
/// `E(ρ)`, where a blend folds.
#[derive(Clone, Debug)]
pub struct Patch {
    /// Index of the critical cut in the family.
    pub cut: usize,
    pub root: Complex64,
    pub image_root: Complex64,
    /// `d·|I_Γ|`.
    pub k: u32,
    /// Start (turns) and length of the carrot's equipotential arc.
    pub arc_start: f64,
    pub arc_len: f64,
    /// Start and length of the image arc on `E(ρ^d)`.
    pub image_start: f64,
    pub image_len: f64,
    /// Potential of the top of `Ω`.
    pub wedge_top: f64,
    /// Below this potential the image of a ray keeps the fraction
    /// `ray_fraction` of the image carrot's width.
    pub ray_bend: f64,
    pub ray_fraction: f64,
    pub boundary: Polygon,
    pub image_boundary: Polygon,
    /// Boundary of `Ω`.
    pub wedge_boundary: Polygon,
    degree: f64,
    g0: f64,
    arc_i: f64,
    theta_r: Angle,
    theta_l: Angle,
    image_theta: Angle,
    p: Polynomial,
    index: PolygonIndex,
    wedge: PolygonIndex,
    taylor: Vec<Complex64>,
    dom: Coons,
    img: Coons,
    seeds: Vec<(f64, f64, Complex64)>,
    im_range: (f64, f64),
}

/// The wedge top as a fraction of the outer potential, before snapping to
/// the side lattice.
const WEDGE_TOP: f64 = 0.95;
/// `gb` as a fraction of the wedge top.
const RAY_BEND: f64 = 0.95;
/// Decay length in `t` of the top edge's weight in the Coons patches.
const COONS_TAU: f64 = 0.3;
/// Width in `t` of the strip below the wedge top where the Coons patch is
/// blended into the Böttcher map.
const TOP_BLEND: f64 = 0.02;

/// Resamples a polyline (with matching image points) uniformly in the arc
/// length of `zeta`.
fn resample(zeta: &[Complex64], image: &[Complex64], n: usize) -> (Vec<Complex64>, Vec<Complex64>) {
    let mut cum = vec![0.0];
    for w in zeta.windows(2) {
        cum.push(cum[cum.len() - 1] + (w[1] - w[0]).norm());
    }
    let total = cum[cum.len() - 1];
    let mut a = Vec::with_capacity(n + 1);
    let mut b = Vec::with_capacity(n + 1);
    for j in 0..=n {
        let t = total * j as f64 / n as f64;
        let i = cum.partition_point(|&c| c < t).clamp(1, zeta.len() - 1);
        let seg = cum[i] - cum[i - 1];
        let f = if seg > 0.0 { ((t - cum[i - 1]) / seg).clamp(0.0, 1.0) } else { 0.0 };
        a.push(zeta[i - 1] + (zeta[i] - zeta[i - 1]) * f);
        b.push(image[i - 1] + (image[i] - image[i - 1]) * f);
    }
    (a, b)
}

impl Patch {
    pub fn new(p: &Polynomial, family: &CutFamily, carrot: &Carrot, cut: usize, g0: f64) -> Result<Patch> {
        let d = p.degree() as u64;
        let df = d as f64;
        let c = &family.cuts[cut];
        let arc_i = c.arc_length();
        let kf = df * arc_i;
        let k = kf.round();
        if (kf - k).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "critical cut {} has d·|I| = {kf}, not an integer",
                c.label()
            )));
        }
        let arc_len = arc_i + 2.0 * g0;
        let image_len = 2.0 * df * g0;
        let image_theta = c.theta_r.mul(d);
        let a = c.root;
        let taylor = p.taylor_at(a);
        let image_root = taylor[0];

        // The wedge top sits on the side lattice.
        let h = df.ln() / 16.0;
        let j1 = ((-WEDGE_TOP.ln()) / h).round().max(1.0) as usize;
        let gc = g0 * (-(j1 as f64) * h).exp();
        let gb = RAY_BEND * gc;
        let c_frac = 1.0 - g0 * arc_i / ((arc_i + 2.0 * g0) * gb);
        if !(0.02..=0.98).contains(&c_frac) {
            return Err(Error::InvalidArgument(format!(
                "cut {} is too wide for its carrot at potential {g0}",
                c.label()
            )));
        }
        let stub = || Polygon::new(vec![a, a + 1.0, a + Complex64::i()]);
        let flat = Coons {
            r: Curve(vec![a, a]),
            l: Curve(vec![a, a]),
            e: Curve(vec![a, a]),
            tau: 1.0,
        };
        let mut pt = Patch {
            cut,
            root: a,
            image_root,
            k: k as u32,
            arc_start: c.theta_r.to_f64() - g0,
            arc_len,
            image_start: image_theta.to_f64() - df * g0,
            image_len,
            wedge_top: gc,
            ray_bend: gb,
            ray_fraction: c_frac,
            boundary: stub(),
            image_boundary: stub(),
            wedge_boundary: stub(),
            degree: df,
            g0,
            arc_i,
            theta_r: c.theta_r,
            theta_l: c.theta_l,
            image_theta,
            p: p.clone(),
            index: PolygonIndex::new(&stub(), 1),
            wedge: PolygonIndex::new(&stub(), 1),
            taylor,
            dom: flat.clone(),
            img: flat,
            seeds: Vec::new(),
            im_range: (0.0, 0.0),
        };

        // Whole carrot and its image, with dense equipotential arcs.
        let ne = ((arc_len * ARC_DENSITY).ceil() as usize).max(256);
        let dg = df * g0;
        let (arc, image_arc) = rayon::join(
            || -> Result<Vec<Complex64>> {
                (1..ne)
                    .into_par_iter()
                    .map(|i| psi(p, g0.ln(), Turn::Offset(c.theta_r, -g0 + arc_len * i as f64 / ne as f64)))
                    .collect()
            },
            || -> Result<Vec<Complex64>> {
                (1..ne)
                    .into_par_iter()
                    .map(|i| psi(p, dg.ln(), Turn::Offset(image_theta, -dg + image_len * i as f64 / ne as f64)))
                    .collect()
            },
        );
        let mut ring: Vec<Complex64> = carrot.side_r.iter().rev().copied().collect();
        ring.extend(arc?);
        ring.extend(carrot.side_l[..carrot.side_l.len() - 1].iter());
        pt.boundary = Polygon::new(ring);
        pt.index = PolygonIndex::new(&pt.boundary, PATCH_RASTER);
        let mut image_ring: Vec<Complex64> = carrot.side_r.iter().rev().map(|&z| pt.poly(z)).collect();
        image_ring.extend(image_arc?);
        image_ring.extend(carrot.side_l[..carrot.side_l.len() - 1].iter().map(|&z| pt.poly(z)));
        pt.image_boundary = Polygon::new(image_ring);

        // Ω: the ray θ_r up to gc, the equipotential, the ray θ_l down.
        let n_ray = carrot.side_r.len() - 1 - j1;
        let ray_g: Vec<f64> = (0..n_ray).map(|j| gc * (-(j as f64) * h).exp()).collect();
        let trace = |theta: Angle, wide: bool| -> Result<(Vec<Complex64>, Vec<Complex64>)> {
            let pts: Vec<(Complex64, Complex64)> = ray_g
                .par_iter()
                .map(|&g| -> Result<(Complex64, Complex64)> {
                    let x = if wide { arc_i + g } else { g };
                    Ok((psi(p, g.ln(), Turn::Exact(theta))?, pt.upper_point(g, x)?))
                })
                .collect::<Result<_>>()?;
            Ok(pts.into_iter().unzip())
        };
        let (ray_r, ray_l) = rayon::join(|| trace(c.theta_r, false), || trace(c.theta_l, true));
        let ((ray_r, img_r), (ray_l, img_l)) = (ray_r?, ray_l?);
        for (ray, theta) in [(&ray_r, c.theta_r), (&ray_l, c.theta_l)] {
            let gap = (ray[ray.len() - 1] - a).norm();
            if gap > SIDE_LANDING_TOL {
                return Err(Error::WrongPullback {
                    cut: format!("{theta}"),
                    gap,
                });
            }
        }
        let nf = ((arc_i * ARC_DENSITY).ceil() as usize).max(256);
        let top: Vec<(Complex64, Complex64)> = (0..=nf)
            .into_par_iter()
            .map(|i| -> Result<(Complex64, Complex64)> {
                let x = gc + arc_i * i as f64 / nf as f64;
                Ok((psi(p, gc.ln(), Turn::Offset(c.theta_r, x - gc))?, pt.upper_point(gc, x)?))
            })
            .collect::<Result<_>>()?;
        let (mut tz, mut tw): (Vec<Complex64>, Vec<Complex64>) = top.into_iter().unzip();
        tz[0] = ray_r[0];
        tz[nf] = ray_l[0];
        tw[0] = img_r[0];
        tw[nf] = img_l[0];

        let nr = ray_r.len();
        let mut run: Vec<Complex64> = ray_r.iter().rev().copied().collect();
        run.extend(tz[1..nf].iter());
        run.extend(ray_l.iter());
        let mut image_run: Vec<Complex64> = img_r.iter().rev().copied().collect();
        image_run.extend(tw[1..nf].iter());
        image_run.extend(img_l.iter());
        let zeta = unwrap_log(&run, a);
        let zeta_img = unwrap_log(&image_run, image_root);
        let (rt, rw) = resample(&zeta[nr - 1..nr + nf], &zeta_img[nr - 1..nr + nf], nf);
        let take = |z: &[Complex64], e: Vec<Complex64>| {
            let mut l = z[nr + nf - 1..].to_vec();
            l.reverse();
            Coons {
                r: Curve(z[..nr].to_vec()),
                l: Curve(l),
                e: Curve(e),
                tau: COONS_TAU,
            }
        };
        pt.dom = take(&zeta, rt);
        pt.img = take(&zeta_img, rw);
        pt.im_range = zeta
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), z| (lo.min(z.im), hi.max(z.im)));
        for i in 0..=SEED_S {
            for j in 0..=SEED_T {
                let (s, t) = (i as f64 / SEED_S as f64, j as f64 / SEED_T as f64);
                pt.seeds.push((s, t, pt.dom.eval(s, t).0));
            }
        }
        let mut w = run;
        w.pop();
        w.push(a);
        pt.wedge_boundary = Polygon::new(w);
        pt.wedge = PolygonIndex::new(&pt.wedge_boundary, PATCH_RASTER);
        Ok(pt)
    }

    /// Image offset of the ray `θ_r` at domain potential `g`: the
    /// fraction `c` of the image width up to `gb`, then the field line that
    /// meets `E(ρ^d)` where the affine arc map puts `θ_r`.
    fn ray_offset(&self, g: f64) -> f64 {
        let (d, gb, c) = (self.degree, self.ray_bend, self.ray_fraction);
        if g <= gb {
            c * d * g
        } else {
            d * g - d * gb * (1.0 - c)
        }
    }

    /// `A_G(x)`: the image offset from the image carrot's right edge for an
    /// offset `x` from the right side's edge at potential `g`.
    fn angle_map(&self, g: f64, x: f64) -> f64 {
        let w = self.arc_i + 2.0 * g;
        let wi = 2.0 * self.degree * g;
        let y = self.ray_offset(g);
        if x <= g {
            x * y / g
        } else if x >= w - g {
            wi - (w - x) * y / g
        } else {
            y + (x - g) * (wi - 2.0 * y) / (w - 2.0 * g)
        }
    }

    /// The Böttcher-coordinate map at `(g, θ_r - g + x)`.
    fn upper_point(&self, g: f64, x: f64) -> Result<Complex64> {
        let dg = self.degree * g;
        psi(&self.p, dg.ln(), Turn::Offset(self.image_theta, -dg + self.angle_map(g, x)))
    }

    /// The map off `Ω`; `P` where the external angle is out of reach or
    /// outside the carrot's angle range.
    pub fn upper_map(&self, z: Complex64) -> Complex64 {
        self.try_upper(z).unwrap_or_else(|| self.poly(z))
    }

    fn try_upper(&self, z: Complex64) -> Option<Complex64> {
        let (g, theta) = external_angle(&self.p, z)?;
        let x = frac(theta - self.theta_r.to_f64() + g);
        let g = g.min(self.g0);
        if x > self.arc_i + 2.0 * g {
            return None;
        }
        self.upper_point(g, x).ok()
    }

    pub fn contains(&self, z: Complex64) -> bool {
        self.index.contains(z)
    }

    /// Whether `z` lies in `Ω`.
    pub fn in_wedge(&self, z: Complex64) -> bool {
        self.wedge.contains(z)
    }

    /// Newton solve of `X(s, t) = ζ` from the nearest seed node.
    fn solve(&self, zeta: Complex64) -> Option<(f64, f64)> {
        let &(mut s, mut t, _) = self
            .seeds
            .iter()
            .min_by(|a, b| (a.2 - zeta).norm_sqr().total_cmp(&(b.2 - zeta).norm_sqr()))?;
        for _ in 0..60 {
            let (x, xs, xt) = self.dom.eval(s, t);
            let r = x - zeta;
            if r.norm() <= 1e-12 * (1.0 + zeta.norm()) {
                return Some((s, t));
            }
            let det = xs.re * xt.im - xt.re * xs.im;
            if det == 0.0 || !det.is_finite() {
                return None;
            }
            let ds = (r.re * xt.im - xt.re * r.im) / det;
            let dt = (xs.re * r.im - r.re * xs.im) / det;
            let scale = (0.25 / ds.abs().max(dt.abs())).min(1.0);
            s = (s - ds * scale).clamp(-0.5, 1.5);
            t = (t - dt * scale).clamp(-4.0, 1.5);
        }
        let r = self.dom.eval(s, t).0 - zeta;
        (r.norm() <= 1e-9 * (1.0 + zeta.norm())).then_some((s, t))
    }

    /// Coons coordinates `(s, t)` of `z`, over the branches of `log`.
    pub fn coordinates(&self, z: Complex64) -> Option<(f64, f64)> {
        let h = z - self.root;
        if h.norm() == 0.0 {
            return None;
        }
        let base = Complex64::new(h.norm().ln(), h.arg());
        let mut best: Option<((f64, f64), f64)> = None;
        for k in -2i32..=2 {
            let zeta = base + Complex64::new(0.0, TAU * k as f64);
            if zeta.im < self.im_range.0 - PI || zeta.im > self.im_range.1 + PI {
                continue;
            }
            if let Some((s, t)) = self.solve(zeta) {
                let off = (-s).max(s - 1.0).max(t - 1.0).max(0.0);
                if off < 0.1 && best.is_none_or(|b| off < b.1) {
                    best = Some(((s, t), off));
                }
            }
        }
        best.map(|b| b.0)
    }

    /// The unblended wedge map at Coons coordinates.
    pub fn map_coordinates(&self, s: f64, t: f64) -> Complex64 {
        self.image_root + self.img.eval(s, t).0.exp()
    }

    /// `P(z)`, accurate near the root.
    pub fn poly(&self, z: Complex64) -> Complex64 {
        self.image_root + delta_eval(&self.taylor, z - self.root)
    }

    /// The wedge map, blended into the Böttcher map within [`BLEND_WIDTH`]
    /// of the rays and [`TOP_BLEND`] of the top.
    pub fn wedge_map(&self, z: Complex64) -> Complex64 {
        let Some((s, t)) = self.coordinates(z) else {
            return self.upper_map(z);
        };
        let w = self.map_coordinates(s, t);
        let phi = (1.0 - s / BLEND_WIDTH)
            .max(1.0 - (1.0 - s) / BLEND_WIDTH)
            .max(1.0 - (1.0 - t) / TOP_BLEND)
            .clamp(0.0, 1.0);
        if phi == 0.0 {
            return w;
        }
        match self.try_upper(z) {
            Some(u) => w + (u - w) * phi,
            None => w,
        }
    }

    /// The patch map.
    pub fn map(&self, z: Complex64) -> Complex64 {
        if self.in_wedge(z) {
            self.wedge_map(z)
        } else {
            self.upper_map(z)
        }
    }

    /// Largest jump between the wedge map and the Böttcher map across the
    /// boundary of `Ω`, over `n` samples of each ray and of the top.
    pub fn wedge_gap(&self, n: usize) -> Result<f64> {
        let gc = self.wedge_top;
        let gaps: Vec<f64> = (0..3 * n)
            .into_par_iter()
            .map(|j| -> Result<f64> {
                let f = (j % n) as f64 / n as f64;
                let (g, x, theta) = match j / n {
                    0 => {
                        let g = gc * (-f * 9.0 * std::f64::consts::LN_10).exp();
                        (g, g, Turn::Exact(self.theta_r))
                    }
                    1 => {
                        let g = gc * (-f * 9.0 * std::f64::consts::LN_10).exp();
                        (g, self.arc_i + g, Turn::Exact(self.theta_l))
                    }
                    _ => {
                        let x = gc + self.arc_i * f;
                        (gc, x, Turn::Offset(self.theta_r, x - gc))
                    }
                };
                let z = psi(&self.p, g.ln(), theta)?;
                let u = self.upper_point(g, x)?;
                let w = match self.coordinates(z) {
                    Some(_) => self.wedge_map(z),
                    None => return Ok(f64::INFINITY),
                };
                Ok((w - u).norm())
            })
            .collect::<Result<_>>()?;
        Ok(gaps.into_iter().fold(0.0, f64::max))
    }

    /// Largest finite-difference dilatation over an `n × n` grid of the
    /// Coons coordinates and of the Böttcher part; infinite on a fold.
    pub fn dilatation(&self, n: usize) -> f64 {
        let wedge = (0..n * n)
            .into_par_iter()
            .map(|k| {
                let s = (k % n) as f64 / n as f64 + 0.5 / n as f64;
                let t = (k / n) as f64 / n as f64 + 0.5 / n as f64;
                let (_, as_, at) = self.dom.eval(s, t);
                let (_, bs, bt) = self.img.eval(s, t);
                dilatation_2x2(as_, at, bs, bt)
            })
            .reduce(|| 1.0, f64::max);
        // Böttcher part in the conformal coordinates (G, 2πθ), on a grid
        // geometric in G down to 1e-9·g0.
        let g0 = self.g0;
        let outer = (0..n * n)
            .into_par_iter()
            .map(|k| {
                let g = g0 * (-(((k / n) as f64 + 0.5) / n as f64) * 9.0 * std::f64::consts::LN_10).exp();
                let w = self.arc_i + 2.0 * g;
                let x = w * ((k % n) as f64 + 0.5) / n as f64;
                if g < self.wedge_top && x > g && x < w - g {
                    return 1.0;
                }
                let eps = 1e-6 * g;
                let dadg = (self.angle_map(g + eps, x) - self.angle_map(g - eps, x)) / (2.0 * eps);
                let dadx = (self.angle_map(g, x + eps) - self.angle_map(g, x - eps)) / (2.0 * eps);
                // x is measured from the right side's edge, which moves with G.
                let dom_g = Complex64::new(1.0, -TAU);
                let dom_x = Complex64::new(0.0, TAU);
                let img_g = Complex64::new(self.degree, TAU * (dadg - self.degree));
                let img_x = Complex64::new(0.0, TAU * dadx);
                dilatation_2x2(dom_g, dom_x, img_g, img_x)
            })
            .reduce(|| 1.0, f64::max);
        wedge.max(outer)
    }
}
/// Dilatation of `B A^{-1}` for real 2×2 Jacobians given by columns.
/// `exp` is conformal, so working in `ζ` does not change it.
fn dilatation_2x2(as_: Complex64, at: Complex64, bs: Complex64, bt: Complex64) -> f64 {
    let da = as_.re * at.im - at.re * as_.im;
    let db = bs.re * bt.im - bt.re * bs.im;
    if da * db <= 0.0 {
        return f64::INFINITY;
    }
    // A^{-1} = [at.im, -at.re; -as.im, as.re] / da
    let m11 = (bs.re * at.im - bt.re * as_.im) / da;
    let m12 = (-bs.re * at.re + bt.re * as_.re) / da;
    let m21 = (bs.im * at.im - bt.im * as_.im) / da;
    let m22 = (-bs.im * at.re + bt.im * as_.re) / da;
    let fro = m11 * m11 + m12 * m12 + m21 * m21 + m22 * m22;
    let det = (m11 * m22 - m12 * m21).abs();
    // K + 1/K = |M|_F² / det
    let q = fro / det;
    0.5 * (q + (q * q - 4.0).max(0.0).sqrt())
}

/// Lost angle of one critical arc.
#[derive(Clone, Copy, Debug)]
struct Compression {
    start: f64,
    len: f64,
    k: f64,
    slope: f64,
}

/// The assembled map `f`.
#[derive(Clone, Debug)]
pub struct SurgeryMap {
    pub p: Polynomial,
    pub degree: usize,
    pub d_c: usize,
    pub g0: f64,
    pub carrots: Vec<Carrot>,
    pub patches: Vec<Patch>,
    /// `|Z_cr|`.
    pub t_cr: usize,
    /// Number of blend annuli above `E(ρ)`.
    pub t_0: usize,
    pub continuity_gap: f64,
    compressions: Vec<Compression>,
}

/// `d_c = d - Σ d·|I_Γ|` over the critical cuts.
pub fn degree_formula(p: &Polynomial, family: &CutFamily) -> usize {
    let d = p.degree();
    let lost: f64 = family
        .critical_cuts()
        .iter()
        .map(|&i| (d as f64 * family.cuts[i].arc_length()).round())
        .sum();
    d.saturating_sub(lost as usize)
}

pub fn build_surgery(p: &Polynomial, family: &CutFamily, g0: f64) -> Result<SurgeryMap> {
    let d_c = degree_formula(p, family);
    if d_c < 2 {
        return Err(Error::InjectiveOnAvoidingSet { d_c });
    }
    let carrots = build_carrots(p, family, g0)?;
    let critical = family.critical_cuts();
    let patches = critical
        .iter()
        .map(|&i| Patch::new(p, family, &carrots[i], i, g0))
        .collect::<Result<Vec<_>>>()?;
    let d = p.degree();
    let compressions = patches
        .iter()
        .map(|pt| Compression {
            start: frac(pt.arc_start),
            len: pt.arc_len,
            k: pt.k as f64,
            slope: d as f64 - pt.image_len / pt.arc_len,
        })
        .collect();
    let mut s = SurgeryMap {
        p: p.clone(),
        degree: d,
        d_c,
        g0,
        carrots,
        patches,
        t_cr: critical.len(),
        t_0: 1,
        continuity_gap: 0.0,
        compressions,
    };
    let gaps = s.continuity_check(CONTINUITY_SAMPLES)?;
    for (pt, &gap) in s.patches.iter().zip(&gaps) {
        if gap > CONTINUITY_TOL {
            return Err(Error::ContinuityGap {
                patch: family.cuts[pt.cut].label(),
                gap,
            });
        }
    }
    s.continuity_gap = gaps.into_iter().fold(0.0, f64::max);
    Ok(s)
}

impl SurgeryMap {
    /// Lift of the boundary angle map on `E(ρ)`: `dθ` off the critical
    /// arcs, affine on them; degree `d_c`.
    pub fn boundary_angle(&self, theta: f64) -> f64 {
        let mut out = self.degree as f64 * theta;
        for c in &self.compressions {
            let x = theta - c.start;
            let inside = frac(x);
            let partial = if inside <= c.len { c.slope * inside } else { c.k };
            out -= c.k * x.floor() + partial;
        }
        out
    }

    /// New potential in the cap: `dG` up to `g0`, then linear up to
    /// `d_c·d·g0` at `d·g0`, then `d_c G`.
    pub fn cap_potential(&self, g: f64) -> f64 {
        let (d, dc) = (self.degree as f64, self.d_c as f64);
        if g <= self.g0 {
            d * g
        } else if g <= d * self.g0 {
            d * self.g0 + (g - self.g0) * d * (dc - 1.0) / (d - 1.0)
        } else {
            dc * g
        }
    }

    /// The cap at a point of potential `g` and angle `theta`.
    fn cap(&self, g: f64, theta: f64) -> Complex64 {
        let d = self.degree as f64;
        let s = ((g - self.g0) / ((d - 1.0) * self.g0)).clamp(0.0, 1.0);
        let alpha = (1.0 - s) * self.boundary_angle(theta) + s * self.d_c as f64 * theta;
        psi(&self.p, self.cap_potential(g).ln(), Turn::Real(alpha))
            .unwrap_or(Complex64::new(f64::NAN, f64::NAN))
    }

    /// The critical patch containing `z`, if any.
    pub fn patch_at(&self, z: Complex64) -> Option<&Patch> {
        self.patches.iter().find(|pt| pt.contains(z))
    }

    /// `f(z)`; NaN if the cap's field line cannot be followed.
    pub fn evaluate(&self, z: Complex64) -> Complex64 {
        if let Some(pt) = self.patch_at(z) {
            return pt.map(z);
        }
        let g = green_potential_budget(&self.p, z, POTENTIAL_BUDGET);
        if g < self.g0 * (1.0 - 1e-6) {
            return self.p.eval(z);
        }
        match external_angle(&self.p, z) {
            Some((g, theta)) => self.cap(g, theta),
            None => Complex64::new(f64::NAN, f64::NAN),
        }
    }

    /// Largest jump between the patch map and its neighbours: `P` on the
    /// sides, the cap on the equipotential arc, and between the two halves
    /// of the patch on the tent curve. One value per patch.
    fn continuity_check(&self, n: usize) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.patches.len());
        for pt in &self.patches {
            let cut = &self.carrots[pt.cut];
            let g0 = self.g0;
            let side_gaps: Vec<f64> = (0..n)
                .into_par_iter()
                .map(|j| -> Result<f64> {
                    // Potentials from g0 down to 1e-9·g0.
                    let tau = (-(j as f64) / (n - 1).max(1) as f64 * 9.0 * std::f64::consts::LN_10).exp();
                    let g = g0 * tau;
                    let zr = psi(&self.p, g.ln(), Turn::Offset(cut.theta_r, -g))?;
                    let zl = psi(&self.p, g.ln(), Turn::Offset(cut.theta_l, g))?;
                    Ok((pt.map(zr) - pt.poly(zr)).norm().max((pt.map(zl) - pt.poly(zl)).norm()))
                })
                .collect::<Result<_>>()?;
            let arc_gaps: Vec<f64> = (1..n)
                .into_par_iter()
                .map(|j| -> Result<f64> {
                    let th = pt.arc_start + pt.arc_len * j as f64 / n as f64;
                    let z = psi(&self.p, g0.ln(), Turn::Real(th))?;
                    Ok((pt.map(z) - self.cap(g0, th)).norm())
                })
                .collect::<Result<_>>()?;
            let tent = pt.wedge_gap(n)?;
            out.push(side_gaps.into_iter().chain(arc_gaps).fold(tent, f64::max));
        }
        Ok(out)
    }

    /// Degree of `f` on `E(ρ)`: the winding of the image angle over `n`
    /// samples, and preimage counts of 20 generic angles on `E(ρ^d)`.
    pub fn degree_count(&self, n: usize) -> Result<(i64, Vec<usize>)> {
        let phis: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|i| -> Result<f64> {
                let th = i as f64 / n as f64;
                let z = psi(&self.p, self.g0.ln(), Turn::Real(th))?;
                let w = self.evaluate(z);
                external_angle(&self.p, w)
                    .map(|(_, a)| a)
                    .ok_or(Error::NonConvergence { param: th })
            })
            .collect::<Result<_>>()?;
        let mut lifted = Vec::with_capacity(n + 1);
        let mut acc = phis[0];
        lifted.push(acc);
        for i in 1..=n {
            let next = phis[i % n];
            let mut step = next - phis[i - 1];
            step -= step.round();
            acc += step;
            lifted.push(acc);
        }
        let winding = (lifted[n] - lifted[0]).round() as i64;
        let counts = (0..20)
            .map(|j| {
                let target = (j as f64 + 0.3713) / 20.0;
                lifted
                    .windows(2)
                    .map(|w| {
                        let (lo, hi) = (w[0].min(w[1]), w[0].max(w[1]));
                        ((hi - target).floor() - (lo - target).floor()) as usize
                    })
                    .sum()
            })
            .collect();
        Ok((winding, counts))
    }

    /// Formula `d_c` checked against the winding and preimage counts.
    pub fn verify_degree(&self, n: usize) -> Result<usize> {
        let (winding, counts) = self.degree_count(n)?;
        if let Some(&bad) = counts.iter().find(|&&c| c != self.d_c) {
            return Err(Error::DegreeMismatch {
                formula: self.d_c,
                counted: bad,
            });
        }
        if winding != self.d_c as i64 {
            return Err(Error::DegreeMismatch {
                formula: self.d_c,
                counted: winding.max(0) as usize,
            });
        }
        Ok(self.d_c)
    }

    /// One step of `f` inside `U(ρ)`, tracking the potential: `P` scales
    /// it by `d`, the patch map needs a fresh value.
    fn step_inside(&self, z: Complex64, g: f64) -> (Complex64, f64, bool) {
        if let Some(pt) = self.patch_at(z) {
            let w = pt.map(z);
            (w, green_potential_budget(&self.p, w, POTENTIAL_BUDGET), true)
        } else {
            let w = self.p.eval(z);
            let r = self.p.escape_radius();
            let g = if w.norm_sqr() > r * r {
                green_potential_budget(&self.p, w, POTENTIAL_BUDGET)
            } else {
                g * self.degree as f64
            };
            (w, g, false)
        }
    }

    /// Whether the `f`-orbit of `z` stays inside `U(ρ)` for `max_iter`
    /// steps. Above `E(ρ)` the cap raises the potential at every step, so
    /// an orbit that leaves never returns.
    pub fn stays_bounded(&self, z: Complex64, max_iter: usize) -> bool {
        let mut z = z;
        let mut g = green_potential_budget(&self.p, z, POTENTIAL_BUDGET);
        for _ in 0..max_iter {
            if g > self.g0 || !z.re.is_finite() || !z.im.is_finite() {
                return false;
            }
            let (w, h, _) = self.step_inside(z, g);
            z = w;
            g = h;
        }
        g <= self.g0
    }

    /// Visits of the orbit of `z` to `A_cr` (critical carrots) and to
    /// `A_0` (potentials in `[g0, d^{T_0} g0)`), for `max_iter` steps.
    pub fn visits(&self, z: Complex64, max_iter: usize) -> (usize, usize) {
        let upper = self.g0 * (self.degree as f64).powi(self.t_0 as i32);
        let mut z = z;
        let mut g = green_potential_budget(&self.p, z, POTENTIAL_BUDGET);
        let (mut cr, mut a0) = (0, 0);
        for _ in 0..max_iter {
            if g > self.g0 {
                // Outside U(ρ) only the potential matters.
                if g < upper {
                    a0 += 1;
                }
                if g >= upper {
                    break;
                }
                g = self.cap_potential(g);
                continue;
            }
            if !z.re.is_finite() || !z.im.is_finite() {
                break;
            }
            let (w, h, hit) = self.step_inside(z, g);
            cr += hit as usize;
            z = w;
            g = h;
        }
        (cr, cr + a0)
    }
}

/// Result of [`visit_count_experiment`].
#[derive(Clone, Debug, Serialize)]
pub struct VisitReport {
    pub seed: u64,
    pub n_seeds: usize,
    pub max_iter: usize,
    pub max_cr_visits: usize,
    pub max_a_visits: usize,
    pub t_cr: usize,
    pub t: usize,
    /// Starting points whose orbits exceed `T_cr` visits to `A_cr`.
    pub offending: Vec<Complex64>,
}

/// Orbits of `n_seeds` uniform points of the grid window.
pub fn visit_count_experiment(
    s: &SurgeryMap,
    window: GridSpec,
    n_seeds: usize,
    max_iter: usize,
    seed: u64,
) -> VisitReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = window.width / 2.0;
    let pts: Vec<Complex64> = (0..n_seeds)
        .map(|_| {
            let x: f64 = rng.gen_range(-half..half);
            let y: f64 = rng.gen_range(-half..half);
            window.center + Complex64::new(x, y)
        })
        .collect();
    let counts: Vec<(usize, usize)> = pts.par_iter().map(|&z| s.visits(z, max_iter)).collect();
    let offending = pts
        .iter()
        .zip(&counts)
        .filter(|(_, c)| c.0 > s.t_cr)
        .map(|(z, _)| *z)
        .collect();
    VisitReport {
        seed,
        n_seeds,
        max_iter,
        max_cr_visits: counts.iter().map(|c| c.0).max().unwrap_or(0),
        max_a_visits: counts.iter().map(|c| c.1).max().unwrap_or(0),
        t_cr: s.t_cr,
        t: s.t_cr + s.t_0,
        offending,
    }
}

/// Pixels whose `f`-orbit stays inside `U(ρ)`.
pub fn nonescaping_mask(s: &SurgeryMap, grid: GridSpec, max_iter: usize) -> Mask {
    let n = grid.n;
    let bits: Vec<bool> = (0..n * n)
        .into_par_iter()
        .map(|k| s.stays_bounded(grid.pixel_center(k / n, k % n), max_iter))
        .collect();
    Mask::new(grid, bits).expect("grid-sized mask")
}

/// Largest dilatation over all patches.
pub fn dilatation(s: &SurgeryMap, n: usize) -> f64 {
    s.patches.iter().map(|p| p.dilatation(n)).fold(1.0, f64::max)
}

#[derive(Clone, Debug, Serialize)]
pub struct SurgeryReport {
    pub d: usize,
    pub d_c: usize,
    pub t_cr: usize,
    pub t_0: usize,
    pub max_cr_visits: usize,
    pub max_a_visits: usize,
    pub continuity_gap: f64,
    pub dilatation: f64,
    pub seed: u64,
}

pub fn write_report_csv<W: Write>(w: &mut W, r: &SurgeryReport) -> std::io::Result<()> {
    writeln!(w, "d,d_c,T_cr,T_0,max_cr_visits,max_a_visits,continuity_gap,dilatation,seed")?;
    writeln!(
        w,
        "{},{},{},{},{},{},{:.3e},{:.6},{}",
        r.d, r.d_c, r.t_cr, r.t_0, r.max_cr_visits, r.max_a_visits, r.continuity_gap, r.dilatation, r.seed
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dilatation_of_similarity_is_one() {
        let a = (Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0));
        let w = Complex64::new(2.0, 1.0);
        let k = dilatation_2x2(a.0, a.1, a.0 * w, a.1 * w);
        assert!((k - 1.0).abs() < 1e-12);
        let k = dilatation_2x2(a.0, a.1, a.0 * 3.0, a.1);
        assert!((k - 3.0).abs() < 1e-12);
        assert!(dilatation_2x2(a.0, a.1, a.0, -a.1).is_infinite());
    }

    #[test]
    fn curve_extends_linearly() {
        let c = Curve(vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0), Complex64::new(1.0, 1.0)]);
        assert_eq!(c.eval(0.25).0, Complex64::new(0.5, 0.0));
        assert_eq!(c.eval(-0.5).0, Complex64::new(-1.0, 0.0));
        assert_eq!(c.eval(1.0).0, Complex64::new(1.0, 1.0));
    }
}
