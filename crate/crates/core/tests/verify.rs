use num_complex::Complex64;
use renorm::cuts::{CutFamily, DEFAULT_G0};
use renorm::cycles::CycleKind;
use renorm::verify::{brute_force_cycle_count, conjugacy_report, cycles_in_filled_set, cycles_in_region};
use renorm::{Angle, Polynomial};

fn figure1() -> (Polynomial, CutFamily) {
    let p = Polynomial::from_real(&[0.0, 4.0, 4.0, 1.0]).unwrap();
    let pairs = [
        ("1/3".parse::<Angle>().unwrap(), "2/3".parse::<Angle>().unwrap()),
        ("0".parse().unwrap(), "0".parse().unwrap()),
    ];
    let fam = CutFamily::build(&p, &pairs, DEFAULT_G0).unwrap();
    (p, fam)
}

#[test]
fn fixed_points_in_region() {
    let (p, fam) = figure1();
    let cyc = cycles_in_region(&p, &fam, 1);
    let mut pts: Vec<f64> = cyc.iter().map(|c| c.cycle.points[0].re).collect();
    pts.sort_by(f64::total_cmp);
    assert_eq!(pts.len(), 2, "{pts:?}");
    assert!((pts[0] + 1.0).abs() < 1e-6 && pts[1].abs() < 1e-9, "{pts:?}");
    assert!(cyc.iter().all(|c| !c.ambiguous));
}

#[test]
fn period_two_region_residuals() {
    let (p, fam) = figure1();
    for c in cycles_in_region(&p, &fam, 2) {
        assert!(c.cycle.residual(&p) < 1e-9);
    }
}

#[test]
fn empty_family_keeps_every_cycle() {
    let (p, _) = figure1();
    let fam = CutFamily::empty(&p, DEFAULT_G0);
    let n: Vec<usize> = (1..=3).map(|k| cycles_in_region(&p, &fam, 3).iter().filter(|c| c.cycle.period == k).count()).collect();
    // z(z+2)^2 has 3 fixed points; of the three 2-cycles one collapses into
    // the parabolic point -1.
    assert_eq!(n, vec![3, 2, 8]);
}

#[test]
fn figure1_candidate_passes() {
    let (p, fam) = figure1();
    let q = Polynomial::from_real(&[0.0, -1.0, 1.0]).unwrap();
    let rep = conjugacy_report(&p, &fam, &q, 2, 3).unwrap();
    println!("{}", rep.summary());
    assert!(rep.pass);
    let para = rep
        .matches
        .iter()
        .find(|m| m.side == "P" && m.kind == CycleKind::Parabolic)
        .expect("parabolic cycle of P");
    assert!((para.multiplier + 1.0).norm() < 1e-6);
    assert!((para.point + 1.0).norm() < 1e-6);
}

#[test]
fn square_candidate_fails() {
    let (p, fam) = figure1();
    let q = Polynomial::from_real(&[0.0, 0.0, 1.0]).unwrap();
    let rep = conjugacy_report(&p, &fam, &q, 2, 3).unwrap();
    assert!(!rep.pass);
    assert!(!rep.multipliers_ok);
}

#[test]
fn degree_mismatch_is_an_error() {
    let (p, fam) = figure1();
    let q = Polynomial::from_real(&[0.0, 0.0, 0.0, 1.0]).unwrap();
    assert!(conjugacy_report(&p, &fam, &q, 2, 2).is_err());
}

#[test]
fn identical_maps_pass() {
    let (p, _) = figure1();
    let fam = CutFamily::empty(&p, DEFAULT_G0);
    let rep = conjugacy_report(&p, &fam, &p, 3, 2).unwrap();
    assert!(rep.pass);
}

#[test]
fn census_agrees_with_brute_force() {
    for q in [
        Polynomial::from_real(&[0.0, -1.0, 1.0]).unwrap(),
        Polynomial::from_real(&[-1.0, 0.0, 1.0]).unwrap(),
        Polynomial::from_real(&[0.25, 0.0, 1.0]).unwrap(),
        Polynomial::from_real(&[0.0, 0.5, 0.0, 1.0]).unwrap(),
    ] {
        let found = cycles_in_filled_set(&q, 3);
        for n in 1..=3 {
            let count = found.iter().filter(|c| c.period == n).count();
            assert_eq!(count, brute_force_cycle_count(&q, n, 1e-4).unwrap(), "{:?} period {n}", q.coeffs());
        }
    }
}

#[test]
fn multipliers_survive_translation() {
    // Monic conjugates of z^2 - z are translates h(z) = q(z + b) - b.
    let b = Complex64::new(0.3, 0.1);
    let q = Polynomial::from_real(&[0.0, -1.0, 1.0]).unwrap();
    let c = q.coeffs();
    let shifted = Polynomial::new(vec![
        c[0] + c[1] * b + c[2] * b * b - b,
        c[1] + c[2] * 2.0 * b,
        c[2],
    ])
    .unwrap();
    let m = |p: &Polynomial| {
        let mut v: Vec<(usize, f64, f64)> = cycles_in_filled_set(p, 3)
            .iter()
            .map(|c| (c.period, c.multiplier.re, c.multiplier.im))
            .collect();
        v.sort_by(|x, y| x.0.cmp(&y.0).then(x.1.total_cmp(&y.1)).then(x.2.total_cmp(&y.2)));
        v
    };
    let (u, v) = (m(&q), m(&shifted));
    assert_eq!(u.len(), v.len());
    for (x, y) in u.iter().zip(&v) {
        assert_eq!(x.0, y.0);
        assert!((x.1 - y.1).abs() < 1e-6 && (x.2 - y.2).abs() < 1e-6);
    }
}
