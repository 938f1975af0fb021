use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};

use renorm::avoiding::{compare_masks, compute_mask, connected_components, Mask};
use renorm::bottcher::{trace_landed_ray, write_rays_csv, RayOptions, RayPolyline};
use renorm::carrot::{build_carrots, write_carrots_csv, Carrot};
use renorm::cuts::{check_admissible, check_legal, classify_roots, write_rows_csv, CutFamily};
use renorm::estimators::{estimate_geometry, write_geometry_csv};
use renorm::render::{escape_steps, mask_image, wedge_mask, Picture};
use renorm::scene::Scene;
use renorm::surgery::{
    build_surgery, degree_formula, dilatation, nonescaping_mask, visit_count_experiment, write_report_csv,
    SurgeryReport,
};
use renorm::verify::conjugacy_report;
use renorm::{Angle, ComplexPoint};

use crate::output::{write_checks_csv, write_file, Check};

/// Closing radius, in pixels, before counting components.
pub const CLOSING: usize = 1;
/// Pixels on either side of a mask boundary left out of comparisons.
pub const BAND: usize = 2;
pub const MIN_AGREEMENT: f64 = 0.97;
pub const VISIT_SEEDS: usize = 10_000;
const DEGREE_SAMPLES: usize = 2048;
const DILATATION_GRID: usize = 64;
const GEOMETRY_SAMPLES: usize = 2000;
const GEOMETRY_MIN_SCALE: f64 = 1e-6;
const LANDING_TOL: f64 = 1e-6;

pub struct Ctx {
    pub scene: Scene,
    pub out: PathBuf,
    pub supersample: usize,
}

impl Ctx {
    fn family(&self) -> Result<CutFamily> {
        let s = &self.scene;
        if s.cuts.is_empty() {
            return Ok(CutFamily::empty(&s.polynomial, s.g0));
        }
        CutFamily::build(&s.polynomial, &s.cuts, s.g0).context("building the cut family")
    }

    fn filled_mask(&self) -> Mask {
        let s = &self.scene;
        compute_mask(&s.polynomial, None, s.grid, s.max_iter, self.supersample)
    }

    fn avoiding_mask(&self, family: &CutFamily) -> Mask {
        let s = &self.scene;
        compute_mask(&s.polynomial, Some(family), s.grid, s.max_iter, self.supersample)
    }
}

fn closed(poly: &[ComplexPoint]) -> Vec<ComplexPoint> {
    let mut v = poly.to_vec();
    if let Some(&first) = poly.first() {
        v.push(first);
    }
    v
}

fn cut_rays(family: &CutFamily) -> Vec<&[ComplexPoint]> {
    family
        .cuts
        .iter()
        .flat_map(|c| [c.ray_r.points.as_slice(), c.ray_l.points.as_slice()])
        .collect()
}

fn fmt_z(z: ComplexPoint) -> String {
    format!("{:.9}{:+.9}i", z.re, z.im)
}

pub fn julia(ctx: &Ctx) -> Result<Vec<Check>> {
    let s = &ctx.scene;
    let k = ctx.filled_mask();
    let esc = escape_steps(&s.polynomial, s.grid, s.max_iter);
    let pic = Picture {
        grid: s.grid,
        palette: s.palette,
        max_iter: s.max_iter,
        escape: &esc,
        avoiding: None,
        wedges: None,
        rays: vec![],
        carrots: vec![],
    };
    write_file(&ctx.out, "julia.ppm", |w| pic.render().write_ppm(w))?;
    write_file(&ctx.out, "julia_mask.bin", |w| k.write_raw(w))?;
    let n = s.grid.n * s.grid.n;
    Ok(vec![Check::new(
        "julia",
        k.count() > 0,
        format!("{} of {} pixels in K_P", k.count(), n),
    )])
}

fn trace_all(ctx: &Ctx, angles: &[Angle]) -> Result<Vec<RayPolyline>> {
    angles
        .iter()
        .map(|&a| trace_landed_ray(&ctx.scene.polynomial, a, RayOptions::default()).with_context(|| format!("ray {a}")))
        .collect()
}

fn ray_angles(ctx: &Ctx, args: &[String]) -> Result<Vec<Angle>> {
    if !args.is_empty() {
        return args
            .iter()
            .map(|s| s.parse::<Angle>().with_context(|| format!("angle {s:?}")))
            .collect();
    }
    let mut v = ctx.scene.rays.clone();
    for &(r, l) in &ctx.scene.cuts {
        for a in [r, l] {
            if !v.contains(&a) {
                v.push(a);
            }
        }
    }
    if v.is_empty() {
        bail!("no angles: pass --angle or list rays in the scene");
    }
    Ok(v)
}

pub fn ray(ctx: &Ctx, args: &[String]) -> Result<Vec<Check>> {
    let angles = ray_angles(ctx, args)?;
    let rays = trace_all(ctx, &angles)?;
    write_file(&ctx.out, "rays.csv", |w| write_rays_csv(w, &rays))?;
    write_file(&ctx.out, "landings.csv", |w| {
        writeln!(w, "angle,converged,kind,re,im")?;
        for r in &rays {
            match &r.landing {
                Some(l) => writeln!(w, "{},{},{:?},{:.15e},{:.15e}", r.angle, l.converged, l.kind, l.point.re, l.point.im)?,
                None => writeln!(w, "{},false,none,,", r.angle)?,
            }
        }
        Ok(())
    })?;
    let mut checks: Vec<Check> = rays
        .iter()
        .map(|r| match &r.landing {
            Some(l) => Check::new(
                &format!("ray {}", r.angle),
                l.converged,
                format!("lands at {} ({:?})", fmt_z(l.point), l.kind),
            ),
            None => Check::new(&format!("ray {}", r.angle), false, "no landing point"),
        })
        .collect();
    let land = |a: Angle| {
        rays.iter()
            .find(|r| r.angle == a)
            .and_then(|r| r.landing.as_ref())
            .map(|l| l.point)
    };
    for &(r, l) in &ctx.scene.cuts {
        if r == l {
            continue;
        }
        if let (Some(a), Some(b)) = (land(r), land(l)) {
            let gap = (a - b).norm();
            checks.push(Check::new(
                &format!("co-landing ({r},{l})"),
                gap < LANDING_TOL,
                format!("gap {gap:.3e}"),
            ));
        }
    }
    Ok(checks)
}

pub fn cuts_check(ctx: &Ctx) -> Result<Vec<Check>> {
    let p = &ctx.scene.polynomial;
    let family = ctx.family()?;
    let adm = check_admissible(p, &family);
    let legal = check_legal(p, &family);
    let roots = classify_roots(p, &family);
    write_file(&ctx.out, "cuts.csv", |w| {
        let rows: Vec<_> = adm.rows.iter().chain(&legal.rows).chain(&roots).cloned().collect();
        write_rows_csv(w, &rows)
    })?;
    let mut checks = vec![
        Check::new(
            "admissible",
            adm.admissible,
            format!("{} cuts, {} wedge entries", family.len(), adm.offending.len()),
        ),
        Check::new(
            "legal",
            legal.legal,
            format!("{} failing, {} fictitious", legal.failing.len(), legal.fictitious.len()),
        ),
    ];
    for r in legal.rows.iter().filter(|r| r.check == "precritical" || r.check == "terminal-root") {
        checks.push(Check::new(&format!("{} {}", r.check, r.subject), r.passed, r.detail.clone()));
    }
    Ok(checks)
}

struct AvoidData {
    k: Mask,
    a: Mask,
}

fn avoid_checks(d: &AvoidData) -> Result<Vec<Check>> {
    let comps = connected_components(&d.a, CLOSING);
    let subset = d.a.is_subset_of(&d.k);
    let strict = subset && d.a.count() < d.k.count();
    Ok(vec![
        Check::new(
            "avoid-subset",
            strict,
            format!("|A| = {}, |K| = {}", d.a.count(), d.k.count()),
        ),
        Check::new(
            "avoid-components",
            comps.count() == 1,
            format!("{} components after closing radius {CLOSING}", comps.count()),
        ),
    ])
}

pub fn avoid(ctx: &Ctx) -> Result<Vec<Check>> {
    let s = &ctx.scene;
    let family = ctx.family()?;
    let d = AvoidData {
        k: ctx.filled_mask(),
        a: ctx.avoiding_mask(&family),
    };
    let esc = escape_steps(&s.polynomial, s.grid, s.max_iter);
    let wm = wedge_mask(&family, s.grid);
    let pic = Picture {
        grid: s.grid,
        palette: s.palette,
        max_iter: s.max_iter,
        escape: &esc,
        avoiding: Some(&d.a),
        wedges: Some(&wm),
        rays: cut_rays(&family),
        carrots: vec![],
    };
    write_file(&ctx.out, "avoid.ppm", |w| pic.render().write_ppm(w))?;
    write_file(&ctx.out, "avoid_mask.bin", |w| d.a.write_raw(w))?;
    let checks = avoid_checks(&d)?;
    write_checks_csv(&ctx.out, "avoid.csv", &checks)?;
    Ok(checks)
}

fn geometry(ctx: &Ctx, family: &CutFamily, carrots: &[Carrot]) -> Result<Vec<Check>> {
    let p = &ctx.scene.polynomial;
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    for (i, c) in carrots.iter().enumerate() {
        let label = family.cuts[i].label();
        let g = estimate_geometry(p, c, GEOMETRY_SAMPLES, GEOMETRY_MIN_SCALE)
            .with_context(|| format!("geometry of carrot {label}"))?;
        let ok = g.quasi_arc > 0.0 && g.transversality > 0.0 && g.weak_qs.is_finite();
        checks.push(Check::new(
            &format!("carrot {label}"),
            ok,
            format!(
                "quasi-arc {:.4}, transversality {:.4}, weak QS {:.4}",
                g.quasi_arc, g.transversality, g.weak_qs
            ),
        ));
        rows.push((label, g));
    }
    write_file(&ctx.out, "geometry.csv", |w| write_geometry_csv(w, &rows))?;
    Ok(checks)
}

pub fn carrot(ctx: &Ctx) -> Result<Vec<Check>> {
    let s = &ctx.scene;
    let family = ctx.family()?;
    let carrots = build_carrots(&s.polynomial, &family, s.g0).context("building carrots")?;
    write_file(&ctx.out, "carrots.csv", |w| write_carrots_csv(w, &carrots))?;
    let mut checks = vec![Check::new(
        "carrots-disjoint",
        true,
        format!("{} carrots at potential {}", carrots.len(), s.g0),
    )];
    checks.extend(geometry(ctx, &family, &carrots)?);
    Ok(checks)
}

fn surgery_with(ctx: &Ctx, family: &CutFamily, a: &Mask) -> Result<Vec<Check>> {
    let s = &ctx.scene;
    let p = &s.polynomial;
    let sm = build_surgery(p, family, s.g0).context("building the surgery")?;
    let formula = degree_formula(p, family);
    let (winding, counts) = sm.degree_count(DEGREE_SAMPLES)?;
    let counted_ok = counts.iter().all(|&c| c == formula) && winding == formula as i64;
    let visits = visit_count_experiment(&sm, s.grid, VISIT_SEEDS, s.max_iter, s.seed);
    let fm = nonescaping_mask(&sm, s.grid, s.max_iter);
    let cmp = compare_masks(&fm, a, BAND)?;
    let dil = dilatation(&sm, DILATATION_GRID);
    let report = SurgeryReport {
        d: p.degree(),
        d_c: sm.d_c,
        t_cr: sm.t_cr,
        t_0: sm.t_0,
        max_cr_visits: visits.max_cr_visits,
        max_a_visits: visits.max_a_visits,
        continuity_gap: sm.continuity_gap,
        dilatation: dil,
        seed: s.seed,
    };
    write_file(&ctx.out, "surgery.csv", |w| write_report_csv(w, &report))?;
    write_file(&ctx.out, "surgery_masks.csv", |w| {
        writeln!(w, "band,agreement,differing,band_pixels,strict_differing,strict_agreement")?;
        writeln!(
            w,
            "{BAND},{:.6},{},{},{},{:.6}",
            cmp.agreement, cmp.differing, cmp.band_pixels, cmp.strict_differing, cmp.strict_agreement
        )
    })?;
    write_file(&ctx.out, "surgery_mask.ppm", |w| mask_image(&fm).write_ppm(w))?;
    Ok(vec![
        Check::new(
            "degree",
            counted_ok && formula >= 2,
            format!("d_c = {formula} by formula, winding {winding}, preimage counts {:?}", counts.iter().min().zip(counts.iter().max())),
        ),
        Check::new(
            "visits",
            visits.max_cr_visits <= sm.t_cr,
            format!(
                "max A_cr visits {} (T_cr = {}), max A visits {}, {} seeds, {} iterations",
                visits.max_cr_visits, sm.t_cr, visits.max_a_visits, visits.n_seeds, visits.max_iter
            ),
        ),
        Check::new(
            "nonescaping-mask",
            cmp.strict_agreement >= MIN_AGREEMENT,
            format!(
                "agreement {:.4} outside a {BAND}-pixel band ({:.4} overall)",
                cmp.strict_agreement, cmp.agreement
            ),
        ),
        Check::new(
            "patch",
            dil.is_finite(),
            format!("continuity gap {:.2e}, dilatation {dil:.2}", sm.continuity_gap),
        ),
    ])
}

pub fn surgery(ctx: &Ctx) -> Result<Vec<Check>> {
    let family = ctx.family()?;
    let a = ctx.avoiding_mask(&family);
    surgery_with(ctx, &family, &a)
}

pub fn verify(ctx: &Ctx) -> Result<Vec<Check>> {
    let s = &ctx.scene;
    let Some(q) = &s.q else {
        bail!("the scene has no candidate polynomial q");
    };
    let family = ctx.family()?;
    let d_c = degree_formula(&s.polynomial, &family);
    let rep = conjugacy_report(&s.polynomial, &family, q, d_c, s.max_period)?;
    write_file(&ctx.out, "conjugacy.csv", |w| rep.write_csv(w))?;
    write_file(&ctx.out, "conjugacy.txt", |w| w.write_all(rep.summary().as_bytes()))?;
    let counts: Vec<String> = rep.periods.iter().map(|r| format!("{}:{}/{}", r.period, r.p_count, r.q_count)).collect();
    let unmatched = rep.matches.iter().filter(|m| m.partner.is_none()).count();
    Ok(vec![
        Check::new("cycle-counts", rep.counts_ok, format!("period:P/Q {}", counts.join(" "))),
        Check::new(
            "multipliers",
            rep.multipliers_ok,
            format!("{} non-repelling cycles, {unmatched} unmatched", rep.matches.len()),
        ),
    ])
}

pub fn figure1(ctx: &Ctx) -> Result<Vec<Check>> {
    let s = &ctx.scene;
    let p = &s.polynomial;
    let mut checks = ray(ctx, &[])?;
    checks.extend(cuts_check(ctx)?);
    let family = ctx.family()?;
    let d = AvoidData {
        k: ctx.filled_mask(),
        a: ctx.avoiding_mask(&family),
    };
    checks.extend(avoid_checks(&d)?);
    let carrots = build_carrots(p, &family, s.g0).context("building carrots")?;
    write_file(&ctx.out, "carrots.csv", |w| write_carrots_csv(w, &carrots))?;
    checks.extend(geometry(ctx, &family, &carrots)?);
    checks.extend(surgery_with(ctx, &family, &d.a)?);
    checks.extend(verify(ctx)?);

    let esc = escape_steps(p, s.grid, s.max_iter);
    let wm = wedge_mask(&family, s.grid);
    let outlines: Vec<Vec<ComplexPoint>> = carrots.iter().map(|c| closed(c.boundary.points())).collect();
    let pic = Picture {
        grid: s.grid,
        palette: s.palette,
        max_iter: s.max_iter,
        escape: &esc,
        avoiding: Some(&d.a),
        wedges: Some(&wm),
        rays: cut_rays(&family),
        carrots: outlines.iter().map(Vec::as_slice).collect(),
    };
    write_file(&ctx.out, "figure1.ppm", |w| pic.render().write_ppm(w))?;
    write_checks_csv(&ctx.out, "report.csv", &checks)?;
    Ok(checks)
}
