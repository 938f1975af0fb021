use num_complex::Complex64;
use renorm::cuts::{build_cut, check_admissible, check_legal, CutFamily};
use renorm::error::Error;
use renorm::{Angle, Polynomial};

fn angle(s: &str) -> Angle {
    s.parse().unwrap()
}

fn fig1() -> Polynomial {
    Polynomial::from_real(&[0.0, 4.0, 4.0, 1.0]).unwrap()
}

fn fig1_family() -> CutFamily {
    let pairs = [(angle("1/3"), angle("2/3")), (angle("0"), angle("0"))];
    CutFamily::build(&fig1(), &pairs, 0.125).unwrap()
}

#[test]
fn rays_of_the_square_do_not_coland() {
    let sq = Polynomial::from_real(&[0.0, 0.0, 1.0]).unwrap();
    match build_cut(&sq, angle("1/3"), angle("2/3")) {
        Err(Error::NoColanding { gap, .. }) => assert!(gap > 0.5),
        other => panic!("expected NoColanding, got {other:?}"),
    }
}

#[test]
fn figure_one_cut() {
    let p = fig1();
    let c = build_cut(&p, angle("1/3"), angle("2/3")).unwrap();
    assert!((c.root + 2.0).norm() < 1e-6);
    assert!(!c.degenerate);
    assert!((c.arc_length() - 1.0 / 3.0).abs() < 1e-15);
    assert_eq!(c.image_angles(3), (angle("0"), angle("0")));
    let d = build_cut(&p, angle("0"), angle("0")).unwrap();
    assert!(d.degenerate && d.arc_length() == 0.0 && d.root.norm() < 1e-6);
}

#[test]
fn wedge_membership() {
    let p = fig1();
    let z = fig1_family();
    assert!(z.in_any_wedge(&p, Complex64::new(-2.5, 0.0)));
    assert!(z.in_any_wedge(&p, Complex64::new(-2.2, 0.1)));
    assert!(!z.in_any_wedge(&p, Complex64::new(0.0, 0.0)));
    assert!(!z.in_any_wedge(&p, Complex64::new(-1.0, 0.0)));
    assert!(!z.in_any_wedge(&p, Complex64::new(-1.5, 0.3)));
    assert!(z.wedges[1].is_none());
    let w = z.wedges[0].as_ref().unwrap();
    assert!(w.angle_in_arc(0.5) && !w.angle_in_arc(0.0) && !w.angle_in_arc(0.9));
}

#[test]
fn family_combinatorics() {
    let p = fig1();
    let z = fig1_family();
    assert_eq!(z.forward, vec![Some(1), Some(1)]);
    assert!(z.flags[0].critical_root && z.flags[0].preperiodic);
    assert!(z.flags[1].periodic);
    assert_eq!(z.critical_cuts(), vec![0]);
    assert!(z.periodic_nondegenerate().is_empty());
    assert!(check_admissible(&p, &z).admissible);
    assert!(check_legal(&p, &z).legal);
}

#[test]
fn missing_image_breaks_invariance() {
    let p = fig1();
    let z = CutFamily::build(&p, &[(angle("1/3"), angle("2/3"))], 0.125).unwrap();
    let r = check_admissible(&p, &z);
    assert!(!r.invariant && !r.admissible);
    assert_eq!(r.missing_images.len(), 1);
}

#[test]
fn image_cut_is_the_image_of_the_cut() {
    let p = fig1();
    let z = fig1_family();
    for (i, c) in z.cuts.iter().enumerate() {
        let j = z.forward[i].unwrap();
        let img = &z.cuts[j];
        assert!((p.eval(c.root) - img.root).norm() < 1e-5);
        // a ray point at potential g maps onto the image ray at 3g
        let k = c.ray_r.points.len() / 2;
        let w = p.eval(c.ray_r.points[k]);
        let target = c.ray_r.potential(k) * 3.0;
        let m = (0..img.ray_r.points.len())
            .min_by(|&a, &b| {
                (img.ray_r.potential(a) - target)
                    .abs()
                    .total_cmp(&(img.ray_r.potential(b) - target).abs())
            })
            .unwrap();
        assert!((img.ray_r.potential(m) / target - 1.0).abs() < 1e-9, "cut {i}");
        assert!((w - img.ray_r.points[m]).norm() < 1e-5, "cut {i}");
    }
}
