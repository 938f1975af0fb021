//! Monic polynomials: evaluation, iteration, escape testing, Green function.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::roots::{horner, polynomial_roots};

/// Evaluation switches to a Taylor expansion about a critical point inside
/// this radius. Near a critical point Horner's rule loses most of its
/// relative accuracy, which matters for rays landing there.
const LOCAL_RADIUS: f64 = 1e-2;

/// Modulus past which the Green function is read off directly.
const GREEN_BAILOUT: f64 = 1e16;

/// Iteration budget of [`green_potential`].
pub const GREEN_MAX_ITER: usize = 2000;

#[derive(Clone, Debug)]
struct LocalExpansion {
    center: Complex64,
    /// `P(center + h) = sum coeffs[j] h^j`
    coeffs: Vec<Complex64>,
}

/// A monic complex polynomial of degree at least two.
#[derive(Clone, Debug)]
pub struct Polynomial {
    coeffs: Vec<Complex64>,
    deriv: Vec<Complex64>,
    escape_radius: f64,
    critical: Vec<Complex64>,
    local: Vec<LocalExpansion>,
}

impl PartialEq for Polynomial {
    fn eq(&self, other: &Self) -> bool {
        self.coeffs == other.coeffs
    }
}

impl Polynomial {
    /// Builds a polynomial from constant-first coefficients. The leading
    /// coefficient must be 1.
    pub fn new(coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() < 3 {
            return Err(Error::InvalidPolynomial(format!(
                "degree must be at least 2, got {}",
                coeffs.len().saturating_sub(1)
            )));
        }
        if coeffs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::InvalidPolynomial("non-finite coefficient".into()));
        }
        let mut coeffs = coeffs;
        let lead = *coeffs.last().unwrap();
        if (lead - 1.0).norm() > 1e-12 {
            return Err(Error::InvalidPolynomial(format!(
                "leading coefficient must be 1 (monic), got {lead}"
            )));
        }
        *coeffs.last_mut().unwrap() = Complex64::new(1.0, 0.0);

        let d = coeffs.len() - 1;
        let deriv: Vec<Complex64> = (1..=d).map(|i| coeffs[i] * i as f64).collect();
        let sum: f64 = coeffs[..d].iter().map(|c| c.norm()).sum();
        let escape_radius = f64::max(2.0, 1.0 + sum);

        let mut critical = polynomial_roots(&deriv)?;
        for c in critical.iter_mut() {
            // A few Newton steps on P' sharpen simple roots; for repeated
            // roots the centroid is already the best estimate.
            let (_, ddp) = horner(&deriv, *c);
            if ddp.norm() > 1e-6 {
                for _ in 0..4 {
                    let (dp, ddp) = horner(&deriv, *c);
                    if ddp.norm() == 0.0 {
                        break;
                    }
                    *c -= dp / ddp;
                }
            }
        }
        let mut local: Vec<LocalExpansion> = Vec::new();
        for &c in &critical {
            if local.iter().any(|l| (l.center - c).norm() < 1e-9) {
                continue;
            }
            local.push(LocalExpansion {
                center: c,
                coeffs: taylor_shift(&coeffs, c),
            });
        }
        Ok(Polynomial {
            coeffs,
            deriv,
            escape_radius,
            critical,
            local,
        })
    }

    /// Convenience constructor from real constant-first coefficients.
    pub fn from_real(coeffs: &[f64]) -> Result<Self> {
        Self::new(coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect())
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// `R = max(2, 1 + sum |a_i|)`; every orbit leaving the disk of this
    /// radius escapes.
    pub fn escape_radius(&self) -> f64 {
        self.escape_radius
    }

    /// Roots of `P'` with multiplicity.
    pub fn critical_points(&self) -> &[Complex64] {
        &self.critical
    }

    /// Horner evaluation.
    #[inline]
    pub fn eval(&self, z: Complex64) -> Complex64 {
        let mut p = Complex64::new(0.0, 0.0);
        for &c in self.coeffs.iter().rev() {
            p = p * z + c;
        }
        p
    }

    #[inline]
    pub fn derivative(&self, z: Complex64) -> Complex64 {
        let mut p = Complex64::new(0.0, 0.0);
        for &c in self.deriv.iter().rev() {
            p = p * z + c;
        }
        p
    }

    /// Value and derivative by Horner's rule.
    #[inline]
    pub fn eval_d(&self, z: Complex64) -> (Complex64, Complex64) {
        horner(&self.coeffs, z)
    }

    /// Value and derivative, using a local expansion near critical points.
    #[inline]
    pub fn eval_precise(&self, z: Complex64) -> (Complex64, Complex64) {
        for l in &self.local {
            let h = z - l.center;
            if h.norm_sqr() < LOCAL_RADIUS * LOCAL_RADIUS {
                return horner(&l.coeffs, h);
            }
        }
        horner(&self.coeffs, z)
    }

    /// `P^n(z)`.
    pub fn iterate(&self, z: Complex64, n: usize) -> Complex64 {
        let mut z = z;
        for _ in 0..n {
            z = self.eval(z);
        }
        z
    }

    /// `P^n(z)` and `(P^n)'(z)` with precise evaluation.
    pub fn iterate_d(&self, z: Complex64, n: usize) -> (Complex64, Complex64) {
        let mut z = z;
        let mut dz = Complex64::new(1.0, 0.0);
        for _ in 0..n {
            let (p, dp) = self.eval_precise(z);
            dz *= dp;
            z = p;
        }
        (z, dz)
    }

    /// Taylor coefficients of `P` at `c`, constant first.
    pub fn taylor_at(&self, c: Complex64) -> Vec<Complex64> {
        taylor_shift(&self.coeffs, c)
    }

    /// Taylor coefficients of `P^n` at `z0` truncated after `h^order`.
    pub fn iterate_series(&self, z0: Complex64, n: usize, order: usize) -> Vec<Complex64> {
        let zero = Complex64::new(0.0, 0.0);
        let mut s = vec![zero; order + 1];
        s[0] = z0;
        if order >= 1 {
            s[1] = Complex64::new(1.0, 0.0);
        }
        for _ in 0..n {
            let b = self.taylor_at(s[0]);
            let mut h = s.clone();
            h[0] = zero;
            let mut out = vec![zero; order + 1];
            out[0] = b[0];
            let mut pow = vec![zero; order + 1];
            pow[0] = Complex64::new(1.0, 0.0);
            for bj in b.iter().skip(1) {
                pow = series_mul(&pow, &h, order);
                for (o, p) in out.iter_mut().zip(&pow) {
                    *o += bj * p;
                }
            }
            s = out;
        }
        s
    }
}

fn series_mul(a: &[Complex64], b: &[Complex64], order: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); order + 1];
    for (i, ai) in a.iter().enumerate() {
        if ai.norm_sqr() == 0.0 {
            continue;
        }
        for (j, bj) in b.iter().enumerate().take(order + 1 - i) {
            out[i + j] += ai * bj;
        }
    }
    out
}

/// Coefficients of `p(c + h)` in powers of `h` (repeated synthetic division).
fn taylor_shift(coeffs: &[Complex64], c: Complex64) -> Vec<Complex64> {
    let mut a = coeffs.to_vec();
    let n = a.len();
    for i in 0..n {
        for j in (i..n - 1).rev() {
            let next = a[j + 1];
            a[j] += c * next;
        }
    }
    a
}

/// Result of [`escape_time`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EscapeResult {
    pub escaped: bool,
    pub steps: usize,
    pub last: Complex64,
}

/// Iterates `P` up to `max_iter` times and reports the first iterate
/// leaving the escape disk.
pub fn escape_time(p: &Polynomial, z: Complex64, max_iter: usize) -> EscapeResult {
    let r2 = p.escape_radius() * p.escape_radius();
    let mut z = z;
    for step in 1..=max_iter.max(1) {
        z = p.eval(z);
        if z.norm_sqr() > r2 || !z.re.is_finite() || !z.im.is_finite() {
            return EscapeResult {
                escaped: true,
                steps: step,
                last: z,
            };
        }
    }
    EscapeResult {
        escaped: false,
        steps: max_iter.max(1),
        last: z,
    }
}

/// Green function `G(z) = lim log|P^n z| / d^n`; zero when the orbit stays
/// bounded for [`GREEN_MAX_ITER`] steps.
pub fn green_potential(p: &Polynomial, z: Complex64) -> f64 {
    green_potential_budget(p, z, GREEN_MAX_ITER)
}

/// [`green_potential`] with an explicit iteration budget.
pub fn green_potential_budget(p: &Polynomial, z: Complex64, max_iter: usize) -> f64 {
    let ln_d = (p.degree() as f64).ln();
    let mut z = z;
    for n in 0..=max_iter {
        let r = z.norm();
        if !r.is_finite() {
            return 0.0;
        }
        if r > GREEN_BAILOUT {
            return r.ln() * (-(n as f64) * ln_d).exp();
        }
        z = p.eval(z);
    }
    0.0
}
