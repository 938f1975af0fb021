//! Conjugacy evidence: cycles of `P` inside the avoiding set against the
//! cycles of a candidate polynomial `Q`.
//!
//! Repelling cycles are compared by count. Non-repelling cycles are
//! matched by multiplier, since only those are preserved by a topological
//! conjugacy.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_complex::Complex64;
use serde::Serialize;

use crate::cuts::CutFamily;
use crate::cycles::{find_cycles, Cycle, CycleKind, SeedGrid};
use crate::error::{Error, Result};
use crate::poly::Polynomial;
use crate::roots::polynomial_roots;

/// Multipliers closer than this are the same multiplier.
pub const MULTIPLIER_TOL: f64 = 1e-6;
/// Cycles closer than this to a cut are ambiguous.
pub const AMBIGUOUS_TOL: f64 = 1e-6;
const SEED_RES: usize = 96;

/// A cycle of `P` tested against the wedges of the family.
#[derive(Clone, Debug, Serialize)]
pub struct RegionCycle {
    pub cycle: Cycle,
    /// Smallest distance from an orbit point to a wedge boundary.
    pub cut_distance: f64,
    pub ambiguous: bool,
}

fn orbit_avoids(family: &CutFamily, cycle: &Cycle) -> bool {
    cycle.points.iter().all(|&z| !family.in_any_wedge_bounded(z))
}

fn cut_distance(family: &CutFamily, cycle: &Cycle) -> f64 {
    family
        .wedges
        .iter()
        .flatten()
        .flat_map(|w| cycle.points.iter().map(move |&z| w.boundary.boundary_distance(z)))
        .fold(f64::INFINITY, f64::min)
}

/// Cycles of `P` of period at most `max_period` whose whole orbit avoids
/// every wedge. Cycles within [`AMBIGUOUS_TOL`] of a wedge boundary are kept
/// and flagged.
pub fn cycles_in_region(p: &Polynomial, family: &CutFamily, max_period: usize) -> Vec<RegionCycle> {
    let search = find_cycles(p, max_period, &SeedGrid::fitted(p, SEED_RES));
    search
        .cycles
        .into_iter()
        .filter_map(|c| {
            let dist = cut_distance(family, &c);
            let ambiguous = dist < AMBIGUOUS_TOL;
            (ambiguous || orbit_avoids(family, &c)).then_some(RegionCycle {
                cycle: c,
                cut_distance: dist,
                ambiguous,
            })
        })
        .collect()
}

/// Cycles of `Q` in `K_Q`. Periodic orbits are bounded, so this is every
/// cycle the search finds.
pub fn cycles_in_filled_set(q: &Polynomial, max_period: usize) -> Vec<Cycle> {
    find_cycles(q, max_period, &SeedGrid::fitted(q, SEED_RES)).cycles
}

/// Coefficients of `Q^n(z) - z`, constant first.
pub fn iterate_minus_identity(q: &Polynomial, n: usize) -> Vec<Complex64> {
    let mut acc = vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)];
    for _ in 0..n {
        acc = compose(q.coeffs(), &acc);
    }
    acc[1] -= 1.0;
    acc
}

fn compose(outer: &[Complex64], inner: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![*outer.last().expect("nonempty polynomial")];
    for &c in outer.iter().rev().skip(1) {
        let mut next = vec![Complex64::new(0.0, 0.0); out.len() + inner.len() - 1];
        for (i, a) in out.iter().enumerate() {
            for (j, b) in inner.iter().enumerate() {
                next[i + j] += a * b;
            }
        }
        next[0] += c;
        out = next;
    }
    out
}

/// Number of cycles of exact period `n` of `Q`, by solving `Q^n(z) = z`.
///
/// Roots near a fixed point of a lower iterate (within `cluster_tol`) are
/// attributed to that period. This also absorbs the clusters that appear
/// around parabolic cycles.
pub fn brute_force_cycle_count(q: &Polynomial, n: usize, cluster_tol: f64) -> Result<usize> {
    let roots = polynomial_roots(&iterate_minus_identity(q, n))?;
    let mut lower = Vec::new();
    for m in (1..n).filter(|m| n.is_multiple_of(*m)) {
        lower.extend(polynomial_roots(&iterate_minus_identity(q, m))?);
    }
    let mut exact: Vec<Complex64> = Vec::new();
    for z in roots {
        if lower.iter().any(|w| (w - z).norm() < cluster_tol) {
            continue;
        }
        if exact.iter().any(|w| (w - z).norm() < cluster_tol) {
            continue;
        }
        exact.push(z);
    }
    Ok(exact.len() / n)
}

/// Per-period comparison.
#[derive(Clone, Debug, Serialize)]
pub struct PeriodRow {
    pub period: usize,
    pub q_count: usize,
    pub p_count: usize,
    pub ambiguous: usize,
    pub counts_match: bool,
}

/// A non-repelling cycle and its partner on the other side, if any.
#[derive(Clone, Debug, Serialize)]
pub struct MultiplierMatch {
    pub side: &'static str,
    pub period: usize,
    pub point: Complex64,
    pub multiplier: Complex64,
    pub kind: CycleKind,
    pub partner: Option<Complex64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConjugacyReport {
    pub max_period: usize,
    pub degree_q: usize,
    pub periods: Vec<PeriodRow>,
    pub matches: Vec<MultiplierMatch>,
    pub p_cycles: Vec<RegionCycle>,
    pub q_cycles: Vec<Cycle>,
    pub counts_ok: bool,
    pub multipliers_ok: bool,
    pub pass: bool,
}

fn non_repelling<'a>(cycles: impl Iterator<Item = &'a Cycle>) -> Vec<&'a Cycle> {
    cycles.filter(|c| c.kind != CycleKind::Repelling).collect()
}

fn match_side(
    side: &'static str,
    ours: &[&Cycle],
    theirs: &[&Cycle],
) -> Vec<MultiplierMatch> {
    let mut used = vec![false; theirs.len()];
    ours.iter()
        .map(|c| {
            let partner = theirs.iter().enumerate().position(|(j, t)| {
                !used[j] && t.period == c.period && (t.multiplier - c.multiplier).norm() < MULTIPLIER_TOL
            });
            if let Some(j) = partner {
                used[j] = true;
            }
            MultiplierMatch {
                side,
                period: c.period,
                point: c.points[0],
                multiplier: c.multiplier,
                kind: c.kind,
                partner: partner.map(|j| theirs[j].multiplier),
            }
        })
        .collect()
}

/// Compares the cycles of `P` on `A_P(Z)` with the cycles of `Q` on `K_Q`.
/// `d_c` is the degree the surgery produced; `Q` must have it.
pub fn conjugacy_report(
    p: &Polynomial,
    family: &CutFamily,
    q: &Polynomial,
    d_c: usize,
    max_period: usize,
) -> Result<ConjugacyReport> {
    if q.degree() != d_c {
        return Err(Error::DegreeMismatch {
            formula: d_c,
            counted: q.degree(),
        });
    }
    let p_cycles = cycles_in_region(p, family, max_period);
    let q_cycles = cycles_in_filled_set(q, max_period);

    let mut per: BTreeMap<usize, (usize, usize, usize)> = (1..=max_period).map(|n| (n, (0, 0, 0))).collect();
    for c in &q_cycles {
        per.get_mut(&c.period).expect("period in range").0 += 1;
    }
    for c in &p_cycles {
        let e = per.get_mut(&c.cycle.period).expect("period in range");
        if c.ambiguous {
            e.2 += 1;
        } else {
            e.1 += 1;
        }
    }
    let periods: Vec<PeriodRow> = per
        .into_iter()
        .map(|(period, (q_count, p_count, ambiguous))| PeriodRow {
            period,
            q_count,
            p_count,
            ambiguous,
            counts_match: q_count == p_count && ambiguous == 0,
        })
        .collect();

    let pn = non_repelling(p_cycles.iter().filter(|c| !c.ambiguous).map(|c| &c.cycle));
    let qn = non_repelling(q_cycles.iter());
    let mut matches = match_side("P", &pn, &qn);
    matches.extend(match_side("Q", &qn, &pn));

    let counts_ok = periods.iter().all(|r| r.counts_match);
    let multipliers_ok = matches.iter().all(|m| m.partner.is_some());
    Ok(ConjugacyReport {
        max_period,
        degree_q: q.degree(),
        periods,
        matches,
        p_cycles,
        q_cycles,
        counts_ok,
        multipliers_ok,
        pass: counts_ok && multipliers_ok,
    })
}

impl ConjugacyReport {
    pub fn verdict(&self) -> &'static str {
        if self.pass {
            "PASS"
        } else {
            "FAIL"
        }
    }

    /// CSV rows `section,period,a,b,c,ok`.
    pub fn write_csv<W: std::io::Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "section,period,q_count,p_count,ambiguous,ok")?;
        for r in &self.periods {
            writeln!(w, "count,{},{},{},{},{}", r.period, r.q_count, r.p_count, r.ambiguous, r.counts_match)?;
        }
        writeln!(w, "section,period,point_re,point_im,multiplier_re,multiplier_im,kind,partner_re,partner_im")?;
        for m in &self.matches {
            let (pr, pi) = m.partner.map_or((String::new(), String::new()), |z| {
                (format!("{:.12e}", z.re), format!("{:.12e}", z.im))
            });
            writeln!(
                w,
                "match-{},{},{:.12e},{:.12e},{:.12e},{:.12e},{},{pr},{pi}",
                m.side,
                m.period,
                m.point.re,
                m.point.im,
                m.multiplier.re,
                m.multiplier.im,
                m.kind.as_str()
            )?;
        }
        Ok(())
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "conjugacy report, periods 1..={}, deg Q = {}", self.max_period, self.degree_q);
        for r in &self.periods {
            let _ = writeln!(
                s,
                "  period {}: Q {} cycles, P on A {} cycles{}{}",
                r.period,
                r.q_count,
                r.p_count,
                if r.ambiguous > 0 { format!(", {} ambiguous", r.ambiguous) } else { String::new() },
                if r.counts_match { "" } else { "  MISMATCH" }
            );
        }
        for m in &self.matches {
            let _ = writeln!(
                s,
                "  {} period {} {} multiplier {:.6}{:+.6}i at {:.6}{:+.6}i: {}",
                m.side,
                m.period,
                m.kind.as_str(),
                m.multiplier.re,
                m.multiplier.im,
                m.point.re,
                m.point.im,
                if m.partner.is_some() { "matched" } else { "UNMATCHED" }
            );
        }
        let _ = writeln!(s, "verdict: {}", self.verdict());
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iterate_coefficients_of_square() {
        let q = Polynomial::from_real(&[0.0, 0.0, 1.0]).unwrap();
        let c = iterate_minus_identity(&q, 2);
        let re: Vec<f64> = c.iter().map(|z| z.re).collect();
        assert_eq!(re, vec![0.0, -1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn brute_force_counts_for_square() {
        let q = Polynomial::from_real(&[0.0, 0.0, 1.0]).unwrap();
        assert_eq!(brute_force_cycle_count(&q, 1, 1e-4).unwrap(), 2);
        assert_eq!(brute_force_cycle_count(&q, 2, 1e-4).unwrap(), 1);
        assert_eq!(brute_force_cycle_count(&q, 3, 1e-4).unwrap(), 2);
    }
}
