use num_complex::Complex64;
use proptest::prelude::*;
use renorm::avoiding::{
    avoids, compare_masks, compute_mask, connected_components, forward_invariance, GridSpec, Mask,
};
use renorm::cuts::CutFamily;
use renorm::{Angle, Polynomial};

fn fig1() -> Polynomial {
    Polynomial::from_real(&[0.0, 4.0, 4.0, 1.0]).unwrap()
}

fn fig1_family(p: &Polynomial) -> CutFamily {
    let pairs = [
        ("1/3".parse::<Angle>().unwrap(), "2/3".parse().unwrap()),
        (Angle::new(0, 1).unwrap(), Angle::new(0, 1).unwrap()),
    ];
    CutFamily::build(p, &pairs, 0.125).unwrap()
}

fn grid(n: usize) -> GridSpec {
    GridSpec::new(Complex64::new(-1.5, 0.0), 4.0, n).unwrap()
}

#[test]
fn empty_family_gives_the_filled_set() {
    let p = fig1();
    let g = grid(128);
    let k = compute_mask(&p, None, g, 256, 1);
    let a = compute_mask(&p, Some(&CutFamily::empty(&p, 0.125)), g, 256, 1);
    assert_eq!(a, k);
    assert!(k.count() > 0);
}

#[test]
fn avoiding_set_inside_filled_set() {
    let p = fig1();
    let z = fig1_family(&p);
    let g = grid(128);
    let k = compute_mask(&p, None, g, 256, 1);
    let a = compute_mask(&p, Some(&z), g, 256, 1);
    assert!(a.is_subset_of(&k));
    assert!(a.count() < k.count());
    assert!(avoids(&p, Some(&z), Complex64::new(0.0, 0.0), 256));
    assert!(avoids(&p, Some(&z), Complex64::new(-1.0, 0.0), 256));
    assert!(avoids(&p, Some(&z), Complex64::new(-2.0, 0.0), 256));
    assert!(!avoids(&p, Some(&z), Complex64::new(-2.3, 0.0), 256));
    assert!(!avoids(&p, Some(&z), Complex64::new(-1.9, 0.05), 256));
    // no set pixel is in a wedge
    for r in 0..g.n {
        for c in 0..g.n {
            if a.get(r, c) {
                assert!(!z.in_any_wedge(&p, g.pixel_center(r, c)));
            }
        }
    }
}

#[test]
fn avoiding_set_is_forward_invariant() {
    let p = fig1();
    let z = fig1_family(&p);
    let a = compute_mask(&p, Some(&z), grid(256), 512, 1);
    let inv = forward_invariance(&a, |w| p.eval(w), 2);
    assert!(inv >= 0.99, "{inv}");
    let comps = connected_components(&a, 1);
    assert_eq!(comps.count(), 1);
}

#[test]
fn supersampling_changes_only_the_edge() {
    let p = fig1();
    let z = fig1_family(&p);
    let g = grid(128);
    let a1 = compute_mask(&p, Some(&z), g, 256, 1);
    let a2 = compute_mask(&p, Some(&z), g, 256, 2);
    let cmp = compare_masks(&a1, &a2, 2).unwrap();
    assert!(cmp.strict_agreement > 0.999, "{cmp:?}");
}

#[test]
fn raw_roundtrip() {
    let p = fig1();
    let g = grid(37);
    let k = compute_mask(&p, None, g, 64, 1);
    let mut buf = Vec::new();
    k.write_raw(&mut buf).unwrap();
    assert_eq!(Mask::read_raw(&mut buf.as_slice(), g).unwrap(), k);
}

fn arb_mask() -> impl Strategy<Value = Mask> {
    proptest::collection::vec(any::<bool>(), 24 * 24)
        .prop_map(|bits| Mask::new(GridSpec::new(Complex64::new(0.0, 0.0), 1.0, 24).unwrap(), bits).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn morphology_orders(m in arb_mask(), r in 0usize..3) {
        prop_assert!(m.erode(r).is_subset_of(&m));
        prop_assert!(m.is_subset_of(&m.dilate(r)));
        prop_assert!(m.is_subset_of(&m.close(r)));
        let b = m.boundary();
        prop_assert!(b.is_subset_of(&m.dilate(1)));
        let flipped = Mask::new(m.grid, m.bits().iter().map(|x| !x).collect()).unwrap();
        prop_assert_eq!(flipped.boundary(), b);
    }

    #[test]
    fn component_sizes_sum_to_count(m in arb_mask()) {
        let c = connected_components(&m, 0);
        prop_assert_eq!(c.sizes.iter().sum::<usize>(), m.count());
        prop_assert!(c.sizes.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn self_comparison_is_perfect(m in arb_mask(), band in 0usize..3) {
        let c = compare_masks(&m, &m, band).unwrap();
        prop_assert_eq!(c.differing, 0);
        prop_assert_eq!(c.agreement, 1.0);
    }
}
