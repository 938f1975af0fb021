use num_complex::Complex64;
use proptest::prelude::*;
use renorm::estimators::{quasi_arc_constant, weak_qs_constant};

fn quasi_arc_oracle(s: &[Complex64]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..s.len() {
        for j in i + 1..s.len() {
            let dxy = (s[i] - s[j]).norm();
            if dxy == 0.0 {
                continue;
            }
            for k in j..s.len() {
                best = best.min((s[i] - s[k]).norm() / dxy);
            }
        }
    }
    best
}

fn weak_qs_oracle(p: &[(Complex64, Complex64)]) -> f64 {
    let mut best: f64 = 0.0;
    for (i, &(x, fx)) in p.iter().enumerate() {
        for (j, &(y, fy)) in p.iter().enumerate() {
            for (k, &(z, fz)) in p.iter().enumerate() {
                if j == i || k == i {
                    continue;
                }
                let (dxy, dxz, fxz) = ((x - y).norm(), (x - z).norm(), (fx - fz).norm());
                if dxy <= dxz && dxz > 0.0 && fxz > 0.0 {
                    best = best.max((fx - fy).norm() / fxz);
                }
            }
        }
    }
    best
}

fn points(n: usize) -> impl Strategy<Value = Vec<Complex64>> {
    // a coarse lattice produces repeated points and tied distances
    prop::collection::vec((-4i32..=4, -4i32..=4), 2..n)
        .prop_map(|v| v.into_iter().map(|(a, b)| Complex64::new(a as f64 * 0.25, b as f64 * 0.25)).collect())
}

proptest! {
    #[test]
    fn quasi_arc_matches_definition(s in points(40)) {
        let (a, b) = (quasi_arc_constant(&s), quasi_arc_oracle(&s));
        prop_assert!(a == b || (a - b).abs() <= 1e-12 * b.abs(), "{a} vs {b}");
    }

    #[test]
    fn weak_qs_matches_definition(x in points(30), fx in points(30)) {
        let pairs: Vec<_> = x.iter().copied().zip(fx.iter().copied()).collect();
        let (a, b) = (weak_qs_constant(&pairs), weak_qs_oracle(&pairs));
        prop_assert!(a == b || (a - b).abs() <= 1e-12 * b.abs(), "{a} vs {b}");
    }
}
