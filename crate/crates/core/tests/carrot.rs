use std::sync::OnceLock;

use num_complex::Complex64;
use proptest::prelude::*;
use renorm::bottcher::{psi, Turn};
use renorm::carrot::{
    build_carrot, build_carrots, check_disjoint, proto_contains, proto_image_check, Carrot, ProtoCarrot,
};
use renorm::cuts::CutFamily;
use renorm::cycles::cycle_through;
use renorm::error::Error;
use renorm::koenigs::Koenigs;
use renorm::{Angle, Polynomial};

fn fig1() -> &'static Polynomial {
    static P: OnceLock<Polynomial> = OnceLock::new();
    P.get_or_init(|| Polynomial::from_real(&[0.0, 4.0, 4.0, 1.0]).unwrap())
}

fn family() -> &'static CutFamily {
    static Z: OnceLock<CutFamily> = OnceLock::new();
    Z.get_or_init(|| {
        let pairs = [
            ("1/3".parse::<Angle>().unwrap(), "2/3".parse().unwrap()),
            (Angle::new(0, 1).unwrap(), Angle::new(0, 1).unwrap()),
        ];
        CutFamily::build(fig1(), &pairs, 0.125).unwrap()
    })
}

fn carrot(index: usize, g: f64) -> Carrot {
    build_carrot(fig1(), family(), index, g).unwrap()
}

#[test]
fn proto_carrot_examples() {
    let pc = ProtoCarrot::new(0.9, 0.0).unwrap();
    assert!(proto_contains(&pc, 0.95, 0.0));
    assert!(proto_contains(&pc, 0.9, 0.0));
    assert!(!proto_contains(&pc, 0.85, 0.0));
    assert!(!proto_contains(&pc, 0.99, 0.05));
    assert!(proto_contains(&pc, 0.93, -0.05));
    // wraps across angle 0
    let pc = ProtoCarrot::new(0.9, 0.99).unwrap();
    assert!(proto_contains(&pc, 0.97, 0.01));
    assert!(ProtoCarrot::new(1.0, 0.0).is_err());
    assert!(ProtoCarrot::new(0.0, 0.0).is_err());
}

#[test]
fn proto_boundary_maps_to_the_image_boundary() {
    let pc = ProtoCarrot::new((-0.05f64).exp(), 0.0).unwrap();
    assert!(proto_image_check(&pc, 3, 3000) < 1e-12);
}

#[test]
fn carrot_sides_land_at_the_root() {
    let c = carrot(0, 0.05);
    assert!((c.root + 2.0).norm() < 1e-6);
    assert_eq!(*c.side_r.last().unwrap(), c.root);
    assert_eq!(*c.side_l.last().unwrap(), c.root);
    assert_eq!(c.equip_arc[0], c.side_r[0]);
    assert_eq!(*c.equip_arc.last().unwrap(), c.side_l[0]);
    let (start, len) = c.angle_range();
    assert!((start - (1.0 / 3.0 - 0.05)).abs() < 1e-12);
    assert!((len - (1.0 / 3.0 + 0.1)).abs() < 1e-12);
    assert_eq!(c.side_arc().len(), c.side_r.len() + c.side_l.len() - 1);
}

#[test]
fn carrot_membership() {
    let p = fig1();
    let c = carrot(0, 0.05);
    // inside the wedge below the outer potential
    let z = psi(p, 0.02f64.ln(), Turn::Exact(Angle::new(1, 2).unwrap())).unwrap();
    assert!(c.contains(z));
    let z = psi(p, 0.02f64.ln(), Turn::Exact(Angle::new(0, 1).unwrap())).unwrap();
    assert!(!c.contains(z));
    let z = psi(p, 0.1f64.ln(), Turn::Exact(Angle::new(1, 2).unwrap())).unwrap();
    assert!(!c.contains(z));
    assert!(!c.contains(Complex64::new(0.0, 0.0)));
}

#[test]
fn sides_map_onto_the_image_carrot() {
    let p = fig1();
    let c = carrot(0, 0.05);
    let img = carrot(1, 0.15);
    // index j sits at potential g·3^(-j/16) on both; the last point is the root
    for (side, image_side) in [(&c.side_r, &img.side_r), (&c.side_l, &img.side_l)] {
        for (z, w) in side[..side.len() - 1].iter().zip(image_side.iter()) {
            assert!((p.eval(*z) - w).norm() < 1e-5);
        }
    }
}

#[test]
fn periodic_carrot_is_invariant_in_the_linearizing_coordinate() {
    let p = fig1();
    let c = carrot(1, 0.05);
    assert!(c.periodic);
    let cyc = cycle_through(p, c.root, 1, 1e-9).unwrap();
    let k = Koenigs::new(p, &cyc, 0).unwrap();
    assert!((k.lambda - 4.0).norm() < 1e-9);
    let mut checked = 0;
    for side in [&c.side_r, &c.side_l] {
        for z in side.iter() {
            let w = p.eval(*z);
            if (w - k.z0).norm() > 0.5 * k.radius || (*z - k.z0).norm() < 1e-9 {
                continue;
            }
            let (u, uw) = (k.coordinate(*z).unwrap(), k.coordinate(w).unwrap());
            assert!((uw - k.lambda * u).norm() < 1e-6 * (1.0 + uw.norm()));
            checked += 1;
        }
    }
    assert!(checked > 20, "{checked}");
}

#[test]
fn figure_one_carrots_are_disjoint() {
    let cs = build_carrots(fig1(), family(), 0.05).unwrap();
    assert_eq!(cs.len(), 2);
    // the smaller carrot's outer arc runs through the larger one
    match check_disjoint(&[carrot(0, 0.05), carrot(0, 0.08)]) {
        Err(Error::CarrotOverlap { a: 0, b: 1 }) => {}
        other => panic!("expected overlap, got {other:?}"),
    }
}

#[test]
fn carrot_potential_range() {
    assert!(build_carrot(fig1(), family(), 0, 0.3).is_err());
    assert!(build_carrot(fig1(), family(), 0, 0.0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    // (ρ, θ) ↦ (ρ³, 3θ) maps C(ρ0, θ0) into C(ρ0³, 3θ0).
    #[test]
    fn proto_carrots_are_equivariant(
        g0 in 0.001f64..0.15,
        theta0 in 0.0f64..1.0,
        s in 0.0f64..1.0,
        dt in -0.15f64..0.15,
    ) {
        let pc = ProtoCarrot::new((-g0).exp(), theta0).unwrap();
        let g = g0 * s;
        let (rho, theta) = ((-g).exp(), theta0 + dt);
        prop_assume!(proto_contains(&pc, rho, theta));
        let image = ProtoCarrot::new(pc.rho0.powi(3), 3.0 * theta0).unwrap();
        prop_assert!(proto_contains(&image, rho.powi(3) * (1.0 - 1e-12), 3.0 * theta));
    }
}
