//! The ten acceptance criteria, one verdict line each.
//!
//! Lines go straight to the process stdout so they show up without
//! `--nocapture`.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use renorm::avoiding::{compare_masks, compute_mask, connected_components, GridSpec};
use renorm::bottcher::{trace_landed_ray, RayOptions};
use renorm::carrot::{build_carrots, proto_image_check, ProtoCarrot};
use renorm::cuts::{check_admissible, check_legal, CutFamily, DEFAULT_G0};
use renorm::cycles::{cycle_through, find_cycles, CycleKind, SeedGrid};
use renorm::estimators::{estimate_geometry, quasi_arc_constant, stratified_samples, transversality_gap, weak_qs_constant};
use renorm::surgery::{build_surgery, degree_formula, nonescaping_mask, visit_count_experiment, DEFAULT_SEED};
use renorm::verify::{brute_force_cycle_count, conjugacy_report};
use renorm::{green_potential, Angle, ComplexPoint, Polynomial};

type Verdict = Result<String, String>;

fn c(re: f64, im: f64) -> ComplexPoint {
    ComplexPoint::new(re, im)
}

fn angle(s: &str) -> Angle {
    s.parse().expect("angle literal")
}

fn figure1_p() -> Polynomial {
    Polynomial::from_real(&[0.0, 4.0, 4.0, 1.0]).expect("z(z+2)^2")
}

fn figure1_family(p: &Polynomial) -> CutFamily {
    CutFamily::build(p, &[(angle("1/3"), angle("2/3")), (angle("0"), angle("0"))], DEFAULT_G0).expect("cut family")
}

fn figure1_grid(n: usize) -> GridSpec {
    GridSpec::new(c(-1.5, 0.0), 4.0, n).expect("grid")
}

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(t: Instant, limit: Duration) -> Result<(), String> {
    let e = t.elapsed();
    ensure(e < limit, format!("runtime {:.1} s exceeds {:.0} s", e.as_secs_f64(), limit.as_secs_f64()))
}

fn criterion_1() -> Verdict {
    let t = Instant::now();
    let p = Polynomial::from_real(&[0.0, 0.0, 1.0]).map_err(|e| e.to_string())?;
    let grid = GridSpec::new(c(0.0, 0.0), 2.5, 512).map_err(|e| e.to_string())?;
    let k = compute_mask(&p, None, grid, 512, 1);
    let n = grid.n;
    let differing = (0..n * n)
        .filter(|&i| k.get(i / n, i % n) != (grid.pixel_center(i / n, i % n).norm() <= 1.0))
        .count();
    let frac = differing as f64 / (n * n) as f64;
    let mut worst: f64 = 0.0;
    for j in 0..100 {
        let r = 2.0 + 8.0 * j as f64 / 99.0;
        let z = ComplexPoint::from_polar(r, 0.7 + 2.39996 * j as f64);
        worst = worst.max((green_potential(&p, z) - r.ln()).abs());
    }
    within(t, Duration::from_secs(10))?;
    ensure(frac < 0.01, format!("K mask differs from the unit disk on {:.3}%", 100.0 * frac))?;
    ensure(worst < 1e-9, format!("|G - log|z|| = {worst:e}"))?;
    Ok(format!("disk mismatch {:.3}%, max |G - log|z|| {worst:.1e}", 100.0 * frac))
}

fn criterion_2() -> Verdict {
    let t = Instant::now();
    let p = figure1_p();
    // distance of both the landing point and the deepest traced point
    let err = |s: &str, target: ComplexPoint| -> Result<f64, String> {
        let r = trace_landed_ray(&p, angle(s), RayOptions::default()).map_err(|e| e.to_string())?;
        let l = r.landing.ok_or(format!("ray {s} has no landing"))?;
        ensure(l.converged, format!("ray {s} did not converge"))?;
        let last = *r.points.last().ok_or("empty ray")?;
        Ok((l.point - target).norm().max((last - target).norm()))
    };
    let ea = err("1/3", c(-2.0, 0.0))?.max(err("2/3", c(-2.0, 0.0))?);
    let ez = err("0", c(0.0, 0.0))?;
    within(t, Duration::from_secs(5))?;
    ensure(ea < 1e-6, format!("rays 1/3, 2/3 land {ea:e} from -2"))?;
    ensure(ez < 1e-6, format!("ray 0 lands {ez:e} from 0"))?;
    Ok(format!("1/3 and 2/3 within {ea:.1e} of -2, 0 within {ez:.1e} of 0"))
}

fn criterion_3() -> Verdict {
    let p = figure1_p();
    let search = find_cycles(&p, 1, &SeedGrid::fitted(&p, 64));
    let found: Vec<_> = search.of_period(1).collect();
    ensure(found.len() == 3, format!("{} fixed points", found.len()))?;
    // P(z) - z = z(z+1)(z+3), P'(z) = 3z^2 + 8z + 4
    let expected = [(0.0, 4.0), (-1.0, -1.0), (-3.0, 7.0)];
    for (z, lambda) in expected {
        let cyc = found
            .iter()
            .find(|cy| (cy.points[0] - z).norm() < 1e-6)
            .ok_or(format!("fixed point {z} missing"))?;
        let res = cyc.residual(&p);
        ensure(res < 1e-9, format!("residual {res:e} at {z}"))?;
        ensure(
            (cyc.multiplier - lambda).norm() < 1e-9,
            format!("multiplier {} at {z}, expected {lambda}", cyc.multiplier),
        )?;
    }
    Ok("fixed points 0, -1, -3 with multipliers 4, -1, 7".into())
}

fn criterion_4() -> Verdict {
    let p = figure1_p();
    let fam = figure1_family(&p);
    let adm = check_admissible(&p, &fam);
    let legal = check_legal(&p, &fam);
    ensure(adm.admissible, "family not admissible")?;
    ensure(legal.legal, "family not legal")?;
    let crit = fam.critical_cuts();
    ensure(crit.len() == 1, format!("{} critical cuts", crit.len()))?;
    let cut = &fam.cuts[crit[0]];
    ensure((cut.root + 2.0).norm() < 1e-6, format!("critical root at {}", cut.root))?;
    let image = fam.forward[crit[0]].ok_or("image cut not in family")?;
    let target = &fam.cuts[image];
    ensure(target.degenerate && target.root.norm() < 1e-6, format!("image cut root {}", target.root))?;
    let cyc = cycle_through(&p, target.root, 4, 1e-9).ok_or("image root not periodic")?;
    ensure(
        cyc.period == 1 && cyc.kind == CycleKind::Repelling,
        format!("image root period {} kind {}", cyc.period, cyc.kind.as_str()),
    )?;
    let row = legal
        .rows
        .iter()
        .find(|r| r.check == "terminal-root" && r.subject == cut.label())
        .ok_or("no terminal-root row")?;
    ensure(row.passed, format!("terminal-root row: {}", row.detail))?;
    let crow = legal
        .rows
        .iter()
        .find(|r| r.check == "precritical" && r.subject == cut.label())
        .ok_or("no precritical row")?;
    ensure(crow.passed && crow.detail.contains("-2.0"), format!("precritical row: {}", crow.detail))?;
    Ok(format!("admissible and legal; {} / {}", crow.detail, row.detail))
}

fn criterion_5() -> Verdict {
    let t = Instant::now();
    let p = figure1_p();
    let fam = figure1_family(&p);
    let grid = figure1_grid(1024);
    let k = compute_mask(&p, None, grid, 512, 1);
    let a = compute_mask(&p, Some(&fam), grid, 512, 1);
    let a2 = compute_mask(&p, Some(&fam), grid, 1024, 1);
    let comps = connected_components(&a, 1).count();
    let changed = compare_masks(&a, &a2, 0).map_err(|e| e.to_string())?.differing;
    let frac = changed as f64 / (1024.0 * 1024.0);
    within(t, Duration::from_secs(120))?;
    ensure(a.is_subset_of(&k) && a.count() < k.count(), "A is not a strict subset of K")?;
    ensure(comps == 1, format!("{comps} components after closing"))?;
    ensure(frac < 0.005, format!("max_iter doubling changes {:.3}%", 100.0 * frac))?;
    Ok(format!(
        "|A| = {}, |K| = {}, 1 component, doubling max_iter changes {:.4}% ({:.1} s)",
        a.count(),
        k.count(),
        100.0 * frac,
        t.elapsed().as_secs_f64()
    ))
}

fn criterion_6() -> Verdict {
    let mut worst: f64 = 0.0;
    for d in [2u32, 3, 4] {
        for rho0 in [0.9, 0.95, 0.99] {
            for theta0 in [0.0, 1.0 / 7.0, 0.3819] {
                let pc = ProtoCarrot::new(rho0, theta0).map_err(|e| e.to_string())?;
                worst = worst.max(proto_image_check(&pc, d, 1000));
            }
        }
    }
    ensure(worst < 1e-12, format!("deviation {worst:e}"))?;
    Ok(format!("max boundary deviation {worst:.1e}"))
}

fn rel_change(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs())
}

fn criterion_7() -> Verdict {
    let p = figure1_p();
    let fam = figure1_family(&p);
    let carrots = build_carrots(&p, &fam, DEFAULT_G0).map_err(|e| e.to_string())?;
    let periodic = carrots
        .iter()
        .find(|c| c.periodic && c.root.norm() < 1e-6)
        .ok_or("no periodic carrot at 0")?;
    let critical = &carrots[fam.critical_cuts()[0]];

    let arc = periodic.side_arc();
    let focus = periodic.side_r.len() - 1;
    let qa = |n| quasi_arc_constant(&stratified_samples(&arc, Some(focus), n));
    let (q1, q2) = (qa(2000), qa(4000));
    let gap = transversality_gap(&periodic.side_r, &periodic.side_l, periodic.root, 5e-7).map_err(|e| e.to_string())?;

    let carc = critical.side_arc();
    let cfocus = critical.side_r.len() - 1;
    let kq = |n| {
        let pairs: Vec<_> = stratified_samples(&carc, Some(cfocus), n)
            .into_iter()
            .map(|z| (z, p.eval_precise(z).0))
            .collect();
        weak_qs_constant(&pairs)
    };
    let (k1, k2) = (kq(2000), kq(4000));
    let est = estimate_geometry(&p, periodic, 2000, 1e-6).map_err(|e| e.to_string())?;

    ensure(q1 > 0.0 && q2 > 0.0, format!("quasi-arc constant {q1}, {q2}"))?;
    ensure(rel_change(q1, q2) < 0.1, format!("quasi-arc constant moves {q1} -> {q2}"))?;
    ensure(gap.gap > 0.1, format!("transversality gap {}", gap.gap))?;
    let finest = gap.scales.iter().map(|s| s.scale).fold(f64::INFINITY, f64::min);
    ensure(finest <= 1e-6, format!("finest scale {finest:e}"))?;
    ensure(k1.is_finite() && k2.is_finite(), "weak QS constant not finite")?;
    ensure(rel_change(k1, k2) < 0.1, format!("weak QS constant moves {k1} -> {k2}"))?;
    ensure((est.quasi_arc - q1).abs() < 1e-12, "estimate_geometry disagrees with the direct estimate")?;
    Ok(format!(
        "quasi-arc {q1:.4} -> {q2:.4}, transversality {:.4} over {} scales down to {finest:.1e}, weak QS {k1:.4} -> {k2:.4}",
        gap.gap,
        gap.scales.len()
    ))
}

fn criterion_8() -> Verdict {
    let t = Instant::now();
    let p = figure1_p();
    let fam = figure1_family(&p);
    let s = build_surgery(&p, &fam, DEFAULT_G0).map_err(|e| e.to_string())?;
    let formula = degree_formula(&p, &fam);
    let (winding, counts) = s.degree_count(2048).map_err(|e| e.to_string())?;
    let grid = figure1_grid(512);
    let visits = visit_count_experiment(&s, grid, 10_000, 512, DEFAULT_SEED);
    let fm = nonescaping_mask(&s, grid, 512);
    let am = compute_mask(&p, Some(&fam), grid, 512, 1);
    let cmp = compare_masks(&fm, &am, 2).map_err(|e| e.to_string())?;
    within(t, Duration::from_secs(300))?;
    ensure(formula == 2 && s.d_c == 2, format!("d_c by formula {formula}"))?;
    ensure(
        winding == 2 && counts.iter().all(|&k| k == 2),
        format!("winding {winding}, preimage counts {counts:?}"),
    )?;
    ensure(visits.max_cr_visits <= 1, format!("max A_cr visits {}", visits.max_cr_visits))?;
    ensure(cmp.strict_agreement >= 0.97, format!("mask agreement {:.4}", cmp.strict_agreement))?;
    Ok(format!(
        "d_c = 2 by formula and counting, max A_cr visits {}, mask agreement {:.4} ({:.1} s)",
        visits.max_cr_visits,
        cmp.strict_agreement,
        t.elapsed().as_secs_f64()
    ))
}

fn criterion_9() -> Verdict {
    let t = Instant::now();
    let p = figure1_p();
    let fam = figure1_family(&p);
    let q = Polynomial::from_real(&[0.0, -1.0, 1.0]).map_err(|e| e.to_string())?;
    let rep = conjugacy_report(&p, &fam, &q, 2, 3).map_err(|e| e.to_string())?;
    let wrong = Polynomial::from_real(&[0.0, 0.0, 1.0]).map_err(|e| e.to_string())?;
    let neg = conjugacy_report(&p, &fam, &wrong, 2, 3).map_err(|e| e.to_string())?;
    for row in &rep.periods {
        let oracle = brute_force_cycle_count(&q, row.period, 1e-4).map_err(|e| e.to_string())?;
        ensure(
            oracle == row.q_count,
            format!("period {}: census {} vs brute force {oracle}", row.period, row.q_count),
        )?;
    }
    within(t, Duration::from_secs(60))?;
    ensure(rep.pass, format!("Q = z^2 - z fails:\n{}", rep.summary()))?;
    let para = rep
        .matches
        .iter()
        .find(|m| m.side == "P" && m.kind == CycleKind::Parabolic && (m.multiplier + 1.0).norm() < 1e-6)
        .ok_or("no parabolic multiplier -1 on the P side")?;
    ensure(para.partner.is_some(), "parabolic multiplier unmatched")?;
    ensure(!neg.pass, "negative control Q = z^2 passes")?;
    let counts: Vec<String> = rep.periods.iter().map(|r| format!("{}:{}", r.period, r.q_count)).collect();
    Ok(format!(
        "counts per period {} match, multiplier -1 matched, z^2 rejected",
        counts.join(" ")
    ))
}

fn run_figure1(dir: &Path, threads: usize) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_renorm"))
        .args(["figure1", "--out"])
        .arg(dir)
        .args(["--threads", &threads.to_string()])
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), format!("figure1 exited with {}", out.status))?;
    let mut files = BTreeMap::new();
    for entry in std::fs::read_dir(dir).map_err(|e| e.to_string())? {
        let path = entry.map_err(|e| e.to_string())?.path();
        let name = path.file_name().unwrap_or_default().to_string_lossy().into_owned();
        if name.ends_with(".ppm") || name.ends_with(".csv") {
            files.insert(name, std::fs::read(&path).map_err(|e| e.to_string())?);
        }
    }
    Ok(files)
}

fn criterion_10() -> Verdict {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut runs = Vec::new();
    for (i, threads) in [1, 1, 8, 8].into_iter().enumerate() {
        runs.push(run_figure1(&tmp.path().join(format!("run{i}")), threads)?);
    }
    let reference = &runs[0];
    ensure(
        reference.keys().any(|k| k.ends_with(".ppm")) && reference.keys().any(|k| k.ends_with(".csv")),
        "figure1 produced no PPM or CSV output",
    )?;
    for (i, r) in runs.iter().enumerate().skip(1) {
        ensure(
            r.keys().eq(reference.keys()),
            format!("run {i} produced a different file set"),
        )?;
        for (name, bytes) in r {
            ensure(bytes == &reference[name], format!("{name} differs in run {i}"))?;
        }
    }
    Ok(format!(
        "{} files byte-identical over 2 runs each with --threads 1 and --threads 8",
        reference.len()
    ))
}

#[test]
fn acceptance_criteria() {
    let criteria: [(&str, fn() -> Verdict); 10] = [
        ("baseline dynamics", criterion_1),
        ("cut landing", criterion_2),
        ("fixed-point census", criterion_3),
        ("legality", criterion_4),
        ("avoiding set", criterion_5),
        ("proto-carrot equivariance", criterion_6),
        ("carrot geometry", criterion_7),
        ("surgery", criterion_8),
        ("conjugacy evidence", criterion_9),
        ("determinism", criterion_10),
    ];
    let mut failed = Vec::new();
    let mut stdout = std::io::stdout().lock();
    for (i, (name, f)) in criteria.iter().enumerate() {
        let line = match f() {
            Ok(detail) => format!("criterion {}: PASS {name}: {detail}", i + 1),
            Err(why) => {
                failed.push(i + 1);
                format!("criterion {}: FAIL {name}: {why}", i + 1)
            }
        };
        let _ = writeln!(stdout, "{line}");
    }
    let _ = stdout.flush();
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}
