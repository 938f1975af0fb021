//! Periodic cycles: Newton search from a seed grid, multipliers, and type.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::poly::{escape_time, Polynomial};

/// Two periodic points closer than this are the same point.
pub const DEDUP_TOL: f64 = 1e-7;
/// Residual bound `|P^n(z) - z|` for an accepted periodic point.
pub const RESIDUAL_TOL: f64 = 1e-9;
const KIND_TOL: f64 = 1e-6;
const COLLAPSE_RADIUS: f64 = 1e-2;
const MAX_ROOT_ORDER: u32 = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CycleKind {
    Attracting,
    Repelling,
    Parabolic,
    NeutralIrrational,
}

impl CycleKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            CycleKind::Attracting => "attracting",
            CycleKind::Repelling => "repelling",
            CycleKind::Parabolic => "parabolic",
            CycleKind::NeutralIrrational => "neutral-irrational",
        }
    }
}

/// Smallest `q ≤ 64` with `λ` within tolerance of a primitive-or-not q-th
/// root of unity.
pub fn root_of_unity_order(lambda: Complex64, tol: f64) -> Option<u32> {
    if (lambda.norm() - 1.0).abs() > tol {
        return None;
    }
    let t = lambda.arg() / std::f64::consts::TAU;
    (1..=MAX_ROOT_ORDER).find(|&q| {
        let k = (t * q as f64).round();
        let w = Complex64::from_polar(1.0, std::f64::consts::TAU * k / q as f64);
        (w - lambda).norm() < tol
    })
}

/// Classifies a multiplier.
pub fn classify_multiplier(lambda: Complex64) -> CycleKind {
    let m = lambda.norm();
    if m < 1.0 - KIND_TOL {
        CycleKind::Attracting
    } else if m > 1.0 + KIND_TOL {
        CycleKind::Repelling
    } else if root_of_unity_order(lambda, KIND_TOL).is_some() {
        CycleKind::Parabolic
    } else {
        CycleKind::NeutralIrrational
    }
}

/// One periodic orbit.
#[derive(Clone, Debug, Serialize)]
pub struct Cycle {
    /// The orbit starting from its lexicographically smallest point.
    pub points: Vec<Complex64>,
    pub period: usize,
    pub multiplier: Complex64,
    pub kind: CycleKind,
}

impl Cycle {
    /// Builds the cycle through a periodic point of exact period `n`.
    pub fn from_point(p: &Polynomial, z: Complex64, n: usize) -> Self {
        let mut pts = Vec::with_capacity(n);
        let mut w = z;
        for _ in 0..n {
            pts.push(polish_periodic(p, w, n));
            w = p.eval(w);
        }
        let start = (0..n)
            .min_by(|&a, &b| {
                pts[a]
                    .re
                    .total_cmp(&pts[b].re)
                    .then(pts[a].im.total_cmp(&pts[b].im))
            })
            .unwrap_or(0);
        pts.rotate_left(start);
        let multiplier = pts.iter().map(|&w| p.derivative(w)).product();
        Cycle {
            points: pts,
            period: n,
            multiplier,
            kind: classify_multiplier(multiplier),
        }
    }

    pub fn residual(&self, p: &Polynomial) -> f64 {
        (p.iterate(self.points[0], self.period) - self.points[0]).norm()
    }

    pub fn contains_point(&self, z: Complex64, tol: f64) -> bool {
        self.points.iter().any(|w| (w - z).norm() < tol)
    }
}

/// Rectangular grid of Newton seeds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SeedGrid {
    pub center: Complex64,
    pub width: f64,
    pub height: f64,
    pub n: usize,
}

impl SeedGrid {
    pub fn square(center: Complex64, width: f64, n: usize) -> Self {
        SeedGrid {
            center,
            width,
            height: width,
            n,
        }
    }

    /// A grid over the bounding box of a coarse filled-Julia-set mask,
    /// padded by ten percent.
    pub fn fitted(p: &Polynomial, n: usize) -> Self {
        let r = p.escape_radius();
        let m = 128usize;
        let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        let step = 2.0 * r / m as f64;
        for i in 0..m {
            for j in 0..m {
                let z = Complex64::new(-r + (j as f64 + 0.5) * step, -r + (i as f64 + 0.5) * step);
                if !escape_time(p, z, 200).escaped {
                    x0 = x0.min(z.re);
                    x1 = x1.max(z.re);
                    y0 = y0.min(z.im);
                    y1 = y1.max(z.im);
                }
            }
        }
        if x0 > x1 {
            return SeedGrid::square(Complex64::new(0.0, 0.0), 2.0 * r, n);
        }
        let pad = 2.0 * step;
        let (w, h) = ((x1 - x0) * 1.1 + 2.0 * pad, (y1 - y0) * 1.1 + 2.0 * pad);
        SeedGrid {
            center: Complex64::new(0.5 * (x0 + x1), 0.5 * (y0 + y1)),
            width: w,
            height: h,
            n,
        }
    }

    pub fn seeds(&self) -> Vec<Complex64> {
        let n = self.n.max(1);
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                out.push(Complex64::new(
                    self.center.re - 0.5 * self.width + (j as f64 + 0.5) * self.width / n as f64,
                    self.center.im - 0.5 * self.height + (i as f64 + 0.5) * self.height / n as f64,
                ));
            }
        }
        out
    }
}

/// Output of [`find_cycles`].
#[derive(Clone, Debug)]
pub struct CycleSearch {
    /// Sorted by period, then by first point.
    pub cycles: Vec<Cycle>,
    /// Seeds whose Newton iteration did not settle (informational).
    pub failed_seeds: usize,
}

impl CycleSearch {
    pub fn of_period(&self, n: usize) -> impl Iterator<Item = &Cycle> {
        self.cycles.iter().filter(move |c| c.period == n)
    }
}

fn newton_periodic(p: &Polynomial, z0: Complex64, n: usize, max_step: f64) -> Option<Complex64> {
    let mut z = z0;
    let mut last_step = f64::INFINITY;
    for _ in 0..300 {
        let (w, dw) = p.iterate_d(z, n);
        let f = w - z;
        let df = dw - 1.0;
        if !f.re.is_finite() || !f.im.is_finite() || df.norm() == 0.0 {
            return None;
        }
        let mut step = f / df;
        if step.norm() > max_step {
            step *= max_step / step.norm();
        }
        z -= step;
        let s = step.norm();
        if s <= 1e-15 * (1.0 + z.norm()) || (s < 1e-10 && s >= last_step) {
            break;
        }
        last_step = s;
    }
    let res = (p.iterate(z, n) - z).norm();
    (res < 0.1 * RESIDUAL_TOL).then_some(z)
}

/// A few Newton steps on `P^n(z) - z`, kept only if they reduce the residual.
pub fn polish_periodic(p: &Polynomial, z: Complex64, n: usize) -> Complex64 {
    let mut best = z;
    let mut best_res = (p.iterate(z, n) - z).norm();
    let mut w = z;
    for _ in 0..4 {
        let (v, dv) = p.iterate_d(w, n);
        let df = dv - 1.0;
        if df.norm() == 0.0 {
            break;
        }
        w -= (v - w) / df;
        let res = (p.iterate(w, n) - w).norm();
        if res < best_res && (w - z).norm() < 1e-6 {
            best = w;
            best_res = res;
        }
    }
    best
}

fn divisors(n: usize) -> Vec<usize> {
    (1..=n).filter(|m| n.is_multiple_of(*m)).collect()
}

/// Finds the distinct cycles of every period `1..=max_period` by Newton's
/// method on `P^n(z) - z` from the seed grid.
///
/// Candidates whose minimal period is smaller are left to that period.
/// Near a parabolic cycle of period `m`, Newton for `P^n - z` (with `m | n`,
/// `λ^{n/m} = 1`) converges to a cluster around the cycle rather than to a
/// genuine period-`n` orbit; such collapsed candidates are discarded.
pub fn find_cycles(p: &Polynomial, max_period: usize, seeds: &SeedGrid) -> CycleSearch {
    let seed_pts = seeds.seeds();
    let max_step = 0.25 * seeds.width.max(seeds.height).max(1e-3);
    let mut cycles: Vec<Cycle> = Vec::new();
    let mut failed = 0usize;
    for n in 1..=max_period {
        let results: Vec<Option<Complex64>> = seed_pts
            .par_iter()
            .map(|&s| newton_periodic(p, s, n, max_step))
            .collect();
        let mut found: Vec<Cycle> = Vec::new();
        for z in results {
            let Some(z) = z else {
                failed += 1;
                continue;
            };
            if found.iter().any(|c| c.contains_point(z, DEDUP_TOL)) {
                continue;
            }
            let tol = 1e-7 * (1.0 + z.norm());
            let lower = divisors(n)
                .into_iter()
                .filter(|&m| m < n)
                .any(|m| (p.iterate(z, m) - z).norm() < tol);
            if lower {
                continue;
            }
            // The residual is flat to high order there, so the cluster can
            // spread well beyond the dedup radius. Its derivative stays near 1.
            let collapsed = cycles.iter().any(|c| {
                n % c.period == 0
                    && c.contains_point(z, COLLAPSE_RADIUS)
                    && (c.multiplier.powu((n / c.period) as u32) - 1.0).norm() < 1e-3
                    && (p.iterate_d(z, n).1 - 1.0).norm() < 1e-2
            });
            if collapsed {
                continue;
            }
            let cycle = Cycle::from_point(p, z, n);
            if cycle.residual(p) >= RESIDUAL_TOL {
                continue;
            }
            if found
                .iter()
                .any(|c| cycle.points.iter().any(|&w| c.contains_point(w, DEDUP_TOL)))
            {
                continue;
            }
            found.push(cycle);
        }
        found.sort_by(|a, b| {
            a.points[0]
                .re
                .total_cmp(&b.points[0].re)
                .then(a.points[0].im.total_cmp(&b.points[0].im))
        });
        cycles.extend(found);
    }
    CycleSearch {
        cycles,
        failed_seeds: failed,
    }
}

/// Finds the cycle through a (numerically) periodic point by forward
/// iteration, trying periods up to `max_period`.
pub fn cycle_through(p: &Polynomial, z: Complex64, max_period: usize, tol: f64) -> Option<Cycle> {
    let mut w = z;
    for n in 1..=max_period {
        w = p.eval(w);
        if (w - z).norm() < tol * (1.0 + z.norm()) {
            return Some(Cycle::from_point(p, z, n));
        }
    }
    None
}

/// Follows the orbit of `z` until it returns near an earlier iterate and
/// returns that terminal cycle with the number of steps needed to reach it.
pub fn terminal_cycle(
    p: &Polynomial,
    z: Complex64,
    max_steps: usize,
    tol: f64,
) -> Option<(usize, Cycle)> {
    let mut orbit = vec![z];
    let mut w = z;
    for _ in 0..max_steps {
        w = p.eval(w);
        if let Some(i) = orbit
            .iter()
            .position(|&u| (u - w).norm() < tol * (1.0 + u.norm()))
        {
            let n = orbit.len() - i;
            return Some((i, Cycle::from_point(p, orbit[i], n)));
        }
        orbit.push(w);
    }
    None
}
