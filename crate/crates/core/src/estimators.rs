//! Numerical estimates of the geometric constants of carrot sides: the
//! quasi-arc constant, the transversality gap at the root, and the weak
//! quasisymmetry constant of a map on sampled points.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::carrot::Carrot;
use crate::error::{Error, Result};
use crate::poly::Polynomial;

/// Arc-length positions of a polyline's vertices.
fn cumulative(arc: &[Complex64]) -> Vec<f64> {
    let mut s = Vec::with_capacity(arc.len());
    let mut acc = 0.0;
    for (i, z) in arc.iter().enumerate() {
        if i > 0 {
            acc += (z - arc[i - 1]).norm();
        }
        s.push(acc);
    }
    s
}

/// The point at arc length `t` along the polyline.
fn at_length(arc: &[Complex64], cum: &[f64], t: f64) -> Complex64 {
    let i = cum.partition_point(|&s| s < t);
    if i == 0 {
        return arc[0];
    }
    if i >= arc.len() {
        return arc[arc.len() - 1];
    }
    let seg = cum[i] - cum[i - 1];
    let f = if seg > 0.0 { (t - cum[i - 1]) / seg } else { 0.0 };
    arc[i - 1] + (arc[i] - arc[i - 1]) * f
}

/// The first point of `arc` (walked from its start) at distance exactly
/// `r` from `a`, assuming the start is farther than `r`.
fn at_distance(arc: &[Complex64], a: Complex64, r: f64) -> Option<Complex64> {
    for w in arc.windows(2) {
        let (d0, d1) = ((w[0] - a).norm(), (w[1] - a).norm());
        if d0 >= r && d1 <= r {
            // Bisection on the segment; distance need not be linear.
            let (mut lo, mut hi) = (0.0, 1.0);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if (w[0] + (w[1] - w[0]) * mid - a).norm() >= r {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return Some(w[0] + (w[1] - w[0]) * (0.5 * (lo + hi)));
        }
    }
    None
}

/// Ordered samples of an arc: `n/2` uniform in arc length, plus points at
/// dyadic arc-length distances from vertex `focus` on both sides of it.
pub fn stratified_samples(arc: &[Complex64], focus: Option<usize>, n: usize) -> Vec<Complex64> {
    if arc.len() < 2 {
        return arc.to_vec();
    }
    let cum = cumulative(arc);
    let total = cum[cum.len() - 1];
    let mut ts: Vec<f64> = (0..=n / 2).map(|j| total * j as f64 / (n / 2).max(1) as f64).collect();
    if let Some(f) = focus {
        let tf = cum[f.min(arc.len() - 1)];
        let per_side = n / 4;
        let ratio = (1e-12_f64).powf(1.0 / per_side.max(1) as f64);
        let mut left = tf;
        let mut right = total - tf;
        for _ in 0..per_side {
            ts.push(tf - left);
            ts.push(tf + right);
            left *= ratio;
            right *= ratio;
        }
        ts.push(tf);
    }
    ts.sort_by(f64::total_cmp);
    ts.dedup_by(|a, b| (*a - *b).abs() <= 1e-15 * total.max(1.0));
    ts.into_iter().map(|t| at_length(arc, &cum, t)).collect()
}

/// `min |ξ(x) - ξ(z)| / |ξ(x) - ξ(y)|` over ordered sample triples
/// `x < y ≤ z` along the arc. Triples with `ξ(x) = ξ(y)` are skipped.
pub fn quasi_arc_constant(samples: &[Complex64]) -> f64 {
    let n = samples.len();
    (0..n)
        .into_par_iter()
        .map(|i| {
            // suffix minima of |ξ(x) - ξ(z)| turn the inner loop over z into a lookup
            let mut suffix = vec![f64::INFINITY; n + 1];
            for k in (i + 1..n).rev() {
                suffix[k] = suffix[k + 1].min((samples[i] - samples[k]).norm());
            }
            let mut best = f64::INFINITY;
            for j in i + 1..n {
                let dxy = (samples[i] - samples[j]).norm();
                if dxy > 0.0 {
                    best = best.min(suffix[j] / dxy);
                }
            }
            best
        })
        .reduce(|| f64::INFINITY, f64::min)
}

/// Gap at one dyadic scale.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ScaleGap {
    pub scale: f64,
    pub gap: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct TransversalityProfile {
    /// Smallest gap over all scales.
    pub gap: f64,
    pub scales: Vec<ScaleGap>,
}

/// `min |(u - a)/(v - a) - 1|` over `u ∈ R`, `v ∈ L` whose distances to the
/// root `a` agree within 10%, sampled at dyadic scales from the arcs' size
/// down to `min_scale`. Arcs run from far to near the root; points within
/// `1e-300` of `a` are ignored.
pub fn transversality_gap(
    r: &[Complex64],
    l: &[Complex64],
    a: Complex64,
    min_scale: f64,
) -> Result<TransversalityProfile> {
    let strip = |arc: &[Complex64]| -> Vec<Complex64> {
        arc.iter().copied().filter(|z| (z - a).norm() > 1e-300).collect()
    };
    let (r, l) = (strip(r), strip(l));
    let near = |arc: &[Complex64]| arc.iter().map(|z| (z - a).norm()).fold(f64::INFINITY, f64::min);
    let far = |arc: &[Complex64]| arc.first().map(|z| (z - a).norm()).unwrap_or(0.0);
    if r.is_empty() || l.is_empty() || near(&r) > min_scale || near(&l) > min_scale {
        return Err(Error::InsufficientSamples(format!(
            "arcs reach {:.3e} and {:.3e} of the root, need {min_scale:.3e}",
            near(&r),
            near(&l)
        )));
    }
    let top = far(&r).min(far(&l)) * 0.9;
    let mut scales = Vec::new();
    let mut s = top;
    while s >= min_scale {
        let mut gap = f64::INFINITY;
        for fu in [0.95, 1.0, 1.0 / 0.95] {
            for fv in [0.95, 1.0, 1.0 / 0.95] {
                if let (Some(u), Some(v)) = (at_distance(&r, a, s * fu), at_distance(&l, a, s * fv)) {
                    gap = gap.min(((u - a) / (v - a) - 1.0).norm());
                }
            }
        }
        if gap.is_finite() {
            scales.push(ScaleGap { scale: s, gap });
        }
        s *= 0.5;
    }
    if scales.is_empty() {
        return Err(Error::InsufficientSamples("no matched pairs at any scale".into()));
    }
    let gap = scales.iter().map(|s| s.gap).fold(f64::INFINITY, f64::min);
    Ok(TransversalityProfile { gap, scales })
}

/// `max |f(x) - f(y)| / |f(x) - f(z)|` over sample triples with
/// `|x - y| ≤ |x - z|`, `x ≠ z`.
pub fn weak_qs_constant(pairs: &[(Complex64, Complex64)]) -> f64 {
    let n = pairs.len();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let (x, fx) = pairs[i];
            // (d(x, ·), d(fx, f·)) sorted by the first; z ranges over a suffix
            let mut d: Vec<(f64, f64)> = pairs
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != i)
                .map(|(_, &(y, fy))| ((x - y).norm(), (fx - fy).norm()))
                .collect();
            d.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut suffix = vec![f64::INFINITY; d.len() + 1];
            for k in (0..d.len()).rev() {
                let (dxz, fxz) = d[k];
                let v = if dxz > 0.0 && fxz > 0.0 { fxz } else { f64::INFINITY };
                suffix[k] = suffix[k + 1].min(v);
            }
            let mut best: f64 = 0.0;
            for &(dxy, fxy) in &d {
                let start = d.partition_point(|e| e.0 < dxy);
                let m = suffix[start];
                if m.is_finite() {
                    best = best.max(fxy / m);
                }
            }
            best
        })
        .reduce(|| 0.0, f64::max)
}

/// Constants measured on one carrot.
#[derive(Clone, Debug, Serialize)]
pub struct GeometryEstimate {
    pub quasi_arc: f64,
    pub transversality: f64,
    pub weak_qs: f64,
    pub samples: usize,
    /// Smallest root distance of the transversality scales.
    pub min_scale: f64,
}

/// The three constants of `R ∪ L` on `n` stratified samples: the quasi-arc
/// constant, the transversality gap down to `min_scale` of the root, and
/// the weak QS constant of `P` on the arc. `P` is evaluated by its Taylor
/// expansion at nearby critical points, where Horner cancels.
pub fn estimate_geometry(p: &Polynomial, carrot: &Carrot, n: usize, min_scale: f64) -> Result<GeometryEstimate> {
    if n < 100 {
        return Err(Error::InsufficientSamples(format!("need at least 100 samples, got {n}")));
    }
    let arc = carrot.side_arc();
    let focus = carrot.side_r.len() - 1;
    let samples = stratified_samples(&arc, Some(focus), n);
    let prof = transversality_gap(&carrot.side_r, &carrot.side_l, carrot.root, min_scale)?;
    let pairs: Vec<(Complex64, Complex64)> = samples.iter().map(|&z| (z, p.eval_precise(z).0)).collect();
    Ok(GeometryEstimate {
        quasi_arc: quasi_arc_constant(&samples),
        transversality: prof.gap,
        weak_qs: weak_qs_constant(&pairs),
        samples: samples.len(),
        min_scale,
    })
}

/// CSV rows `label,samples,min_scale,quasi_arc,transversality,weak_qs`.
pub fn write_geometry_csv<W: std::io::Write>(w: &mut W, rows: &[(String, GeometryEstimate)]) -> std::io::Result<()> {
    writeln!(w, "carrot,samples,min_scale,quasi_arc,transversality,weak_qs")?;
    for (label, g) in rows {
        writeln!(
            w,
            "{label},{},{:e},{:.9},{:.9},{:.9}",
            g.samples, g.min_scale, g.quasi_arc, g.transversality, g.weak_qs
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn straight_segment_is_one() {
        let seg: Vec<_> = (0..=50).map(|i| c(i as f64 / 50.0, 0.0)).collect();
        let s = stratified_samples(&seg, Some(25), 80);
        assert!((quasi_arc_constant(&s) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn right_angle_gap() {
        let r: Vec<_> = (0..=200).map(|i| c(0.5f64.powi(i / 4), 0.0)).collect();
        let l: Vec<_> = r.iter().map(|z| z * Complex64::i()).collect();
        let g = transversality_gap(&r, &l, c(0.0, 0.0), 1e-8).unwrap();
        assert!((g.gap - 2f64.sqrt()).abs() < 0.1);
        let same = transversality_gap(&r, &r, c(0.0, 0.0), 1e-8).unwrap();
        assert!(same.gap < 1e-12);
        assert!(transversality_gap(&r[..10], &l, c(0.0, 0.0), 1e-8).is_err());
    }

    #[test]
    fn similarity_is_weakly_one() {
        let pts: Vec<_> = (0..40).map(|i| c((i as f64 * 0.37).sin(), (i as f64 * 0.91).cos())).collect();
        let id: Vec<_> = pts.iter().map(|&z| (z, z)).collect();
        assert!((weak_qs_constant(&id) - 1.0).abs() < 1e-12);
        let a = c(2.0, -1.0);
        let sim: Vec<_> = pts.iter().map(|&z| (z, a * z + 3.0)).collect();
        assert!((weak_qs_constant(&sim) - 1.0).abs() < 1e-9);
    }
}
