//! Simultaneous root finding for small-degree complex polynomials
//! (Aberth–Ehrlich), with cluster averaging for multiple roots.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Evaluates `sum c[i] z^i` together with its derivative.
pub fn horner(coeffs: &[Complex64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(0.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

/// Returns all roots of the polynomial with the given constant-first
/// coefficients, repeated according to multiplicity.
///
/// Multiple roots come out of the iteration as tight clusters; members of a
/// cluster are replaced by the cluster centroid, which is far more accurate
/// than any individual member.
pub fn polynomial_roots(coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
    let mut coeffs = coeffs.to_vec();
    while coeffs.len() > 1 && coeffs.last().is_some_and(|c| c.norm() == 0.0) {
        coeffs.pop();
    }
    let n = coeffs.len() - 1;
    if n == 0 {
        return Ok(Vec::new());
    }
    let lead = coeffs[n];
    let monic: Vec<Complex64> = coeffs.iter().map(|c| c / lead).collect();

    // Cauchy bound for the initial circle.
    let bound = 1.0 + monic[..n].iter().map(|c| c.norm()).fold(0.0, f64::max);
    let radius = 0.5 * bound;
    let mut z: Vec<Complex64> = (0..n)
        .map(|k| {
            let a = std::f64::consts::TAU * (k as f64 + 0.25) / n as f64 + 0.4;
            Complex64::from_polar(radius, a)
        })
        .collect();

    let mut done = vec![false; n];
    for _ in 0..500 {
        let mut moved = false;
        for i in 0..n {
            if done[i] {
                continue;
            }
            let (p, dp) = horner(&monic, z[i]);
            if p.norm() == 0.0 {
                done[i] = true;
                continue;
            }
            let ratio = p / dp;
            let mut sum = Complex64::new(0.0, 0.0);
            for j in 0..n {
                if j != i {
                    let diff = z[i] - z[j];
                    if diff.norm() > 0.0 {
                        sum += 1.0 / diff;
                    }
                }
            }
            let step = ratio / (Complex64::new(1.0, 0.0) - ratio * sum);
            if !step.re.is_finite() || !step.im.is_finite() {
                continue;
            }
            z[i] -= step;
            if step.norm() <= 1e-15 * (1.0 + z[i].norm()) {
                done[i] = true;
            } else {
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }

    let roots = merge_clusters(&z, 1e-5 * (1.0 + bound));
    let scale: f64 = monic.iter().map(|c| c.norm()).sum();
    let mut worst: f64 = 0.0;
    let mut failed = 0;
    for r in &roots {
        let res = horner(&monic, *r).0.norm();
        worst = worst.max(res);
        if res > 1e-8 * scale * (1.0 + r.norm()).powi(n as i32) {
            failed += 1;
        }
    }
    if failed > 0 {
        return Err(Error::RootNonConvergence {
            failed,
            total: n,
            max_residual: worst,
        });
    }
    Ok(roots)
}

/// Replaces each cluster of points (single-linkage within `radius`) by copies
/// of its centroid, preserving the total count.
fn merge_clusters(z: &[Complex64], radius: f64) -> Vec<Complex64> {
    let n = z.len();
    let mut label: Vec<usize> = (0..n).collect();
    fn find(label: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while label[r] != r {
            r = label[r];
        }
        let mut c = i;
        while label[c] != r {
            let next = label[c];
            label[c] = r;
            c = next;
        }
        r
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if (z[i] - z[j]).norm() < radius {
                let (a, b) = (find(&mut label, i), find(&mut label, j));
                if a != b {
                    label[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut out = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    for i in 0..n {
        let r = find(&mut label, i);
        if seen[r] {
            continue;
        }
        seen[r] = true;
        let members: Vec<usize> = (0..n).filter(|&j| find(&mut label, j) == r).collect();
        let centroid =
            members.iter().map(|&j| z[j]).sum::<Complex64>() / members.len() as f64;
        out.extend(std::iter::repeat_n(centroid, members.len()));
    }
    out.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    out
}
