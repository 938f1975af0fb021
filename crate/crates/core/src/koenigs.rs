//! Königs linearizing coordinate at a repelling periodic point.

use num_complex::Complex64;

use crate::cycles::Cycle;
use crate::error::{Error, Result};
use crate::poly::Polynomial;

/// Pullbacks stop once the point is this close to the fixed point.
const DEPTH: f64 = 1e-6;

/// Linearizing coordinate `u` with `u(P^m z) = λ u(z)` near a repelling
/// point `z0` of period `m`.
#[derive(Clone, Debug)]
pub struct Koenigs<'a> {
    p: &'a Polynomial,
    pub z0: Complex64,
    pub period: usize,
    pub lambda: Complex64,
    /// Second-order coefficient: `u = h + b h² + O(h³)`, `h = z - z0`.
    b: Complex64,
    pub radius: f64,
}

impl<'a> Koenigs<'a> {
    /// Sets up the coordinate at `cycle.points[index]`.
    pub fn new(p: &'a Polynomial, cycle: &Cycle, index: usize) -> Result<Self> {
        let z0 = cycle.points[index % cycle.points.len()];
        let m = cycle.period;
        let s = p.iterate_series(z0, m, 2);
        let lambda = s[1];
        if lambda.norm() <= 1.0 + 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "Königs coordinate needs a repelling point (|λ| = {})",
                lambda.norm()
            )));
        }
        let b = s[2] / (lambda - lambda * lambda);
        let mut k = Koenigs {
            p,
            z0,
            period: m,
            lambda,
            b,
            radius: 0.0,
        };
        k.radius = k.estimate_radius();
        Ok(k)
    }

    /// The inverse branch of `P^m` fixing `z0`, by Newton from the linear
    /// guess.
    pub fn inverse(&self, z: Complex64) -> Option<Complex64> {
        let mut w = self.z0 + (z - self.z0) / self.lambda;
        for _ in 0..60 {
            let (v, dv) = self.p.iterate_d(w, self.period);
            let step = (v - z) / dv;
            if !step.re.is_finite() || !step.im.is_finite() {
                return None;
            }
            w -= step;
            if step.norm() <= 1e-16 * (1.0 + w.norm()) {
                break;
            }
        }
        let res = (self.p.iterate(w, self.period) - z).norm();
        (res < 1e-12 * (1.0 + z.norm())).then_some(w)
    }

    /// Largest dyadic radius on which the inverse branch maps the disk
    /// into itself and contracts, checked on 64 boundary samples.
    fn estimate_radius(&self) -> f64 {
        let mut r = 1.0 + self.z0.norm();
        for _ in 0..60 {
            let ok = (0..64).all(|j| {
                let z = self.z0 + Complex64::from_polar(r, std::f64::consts::TAU * j as f64 / 64.0);
                match self.inverse(z) {
                    Some(w) => {
                        let dv = self.p.iterate_d(w, self.period).1;
                        (w - self.z0).norm() < r && dv.norm() > 1.0
                    }
                    None => false,
                }
            });
            if ok {
                return r;
            }
            r *= 0.5;
        }
        0.0
    }

    /// `u(z) = lim λⁿ (P^{-n} z - z0)`, with a second-order correction at
    /// the final depth.
    pub fn coordinate(&self, z: Complex64) -> Result<Complex64> {
        let outside = || Error::OutsideLinearizationDomain {
            point: z,
            radius: self.radius,
        };
        if (z - self.z0).norm() > self.radius {
            return Err(outside());
        }
        let mut w = z;
        let mut scale = Complex64::new(1.0, 0.0);
        while (w - self.z0).norm() > DEPTH * self.radius.min(1.0) {
            w = self.inverse(w).ok_or_else(outside)?;
            scale *= self.lambda;
        }
        let h = w - self.z0;
        Ok(scale * (h + self.b * h * h))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_at_one() {
        let p = Polynomial::from_real(&[0.0, 0.0, 1.0]).unwrap();
        let cyc = Cycle::from_point(&p, Complex64::new(1.0, 0.0), 1);
        let k = Koenigs::new(&p, &cyc, 0).unwrap();
        assert!((k.lambda - 2.0).norm() < 1e-12);
        assert!(k.radius > 0.1);
        assert_eq!(k.coordinate(k.z0).unwrap(), Complex64::new(0.0, 0.0));
        // For z², u(z) = log z.
        let z = Complex64::new(1.05, 0.02);
        assert!((k.coordinate(z).unwrap() - z.ln()).norm() < 1e-9);
    }
}
