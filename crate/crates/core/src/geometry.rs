//! Closed polygons in the plane and a raster index for fast containment
//! queries against polygons with many vertices.

use num_complex::Complex64;

/// Points closer than this to a polygon boundary count as outside.
pub const BOUNDARY_TOL: f64 = 1e-9;

/// A closed polygon; the last vertex connects back to the first.
#[derive(Clone, Debug, PartialEq)]
pub struct Polygon {
    pts: Vec<Complex64>,
}

#[inline]
fn cross(a: Complex64, b: Complex64) -> f64 {
    a.re * b.im - a.im * b.re
}

/// Distance from `z` to the segment `[a, b]`.
pub fn segment_distance(z: Complex64, a: Complex64, b: Complex64) -> f64 {
    let ab = b - a;
    let l2 = ab.norm_sqr();
    if l2 == 0.0 {
        return (z - a).norm();
    }
    let t = ((z - a).re * ab.re + (z - a).im * ab.im) / l2;
    let t = t.clamp(0.0, 1.0);
    (z - (a + ab * t)).norm()
}

/// Whether the segment `p → q` crosses edge `a b`, with the half-open
/// endpoint rule that makes parity counts consistent at shared vertices.
#[inline]
fn crosses(p: Complex64, q: Complex64, a: Complex64, b: Complex64) -> bool {
    let dir = q - p;
    let sa = cross(dir, a - p) > 0.0;
    let sb = cross(dir, b - p) > 0.0;
    if sa == sb {
        return false;
    }
    // Parameter of the intersection along p → q.
    let e = b - a;
    let den = cross(dir, e);
    if den == 0.0 {
        return false;
    }
    let t = cross(a - p, e) / den;
    (0.0..1.0).contains(&t)
}

impl Polygon {
    /// Builds a polygon, dropping consecutive duplicate vertices.
    pub fn new(pts: Vec<Complex64>) -> Self {
        let mut out: Vec<Complex64> = Vec::with_capacity(pts.len());
        for z in pts {
            if out.last().is_none_or(|w| *w != z) {
                out.push(z);
            }
        }
        while out.len() > 1 && out[0] == out[out.len() - 1] {
            out.pop();
        }
        Polygon { pts: out }
    }

    pub fn points(&self) -> &[Complex64] {
        &self.pts
    }

    pub fn len(&self) -> usize {
        self.pts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pts.len() < 3
    }

    /// Edges `(a, b)`, including the closing one.
    pub fn edges(&self) -> impl Iterator<Item = (Complex64, Complex64)> + '_ {
        let n = self.pts.len();
        (0..n).map(move |i| (self.pts[i], self.pts[(i + 1) % n]))
    }

    /// `(min, max)` corners of the bounding box.
    pub fn bbox(&self) -> (Complex64, Complex64) {
        let mut lo = Complex64::new(f64::INFINITY, f64::INFINITY);
        let mut hi = -lo;
        for z in &self.pts {
            lo.re = lo.re.min(z.re);
            lo.im = lo.im.min(z.im);
            hi.re = hi.re.max(z.re);
            hi.im = hi.im.max(z.im);
        }
        (lo, hi)
    }

    /// Signed area (positive for counterclockwise orientation).
    pub fn signed_area(&self) -> f64 {
        0.5 * self.edges().map(|(a, b)| cross(a, b)).sum::<f64>()
    }

    pub fn boundary_distance(&self, z: Complex64) -> f64 {
        self.edges()
            .map(|(a, b)| segment_distance(z, a, b))
            .fold(f64::INFINITY, f64::min)
    }

    /// Crossing-number parity of a horizontal ray to the right, without the
    /// boundary tolerance.
    fn parity(&self, z: Complex64) -> bool {
        let mut inside = false;
        for (a, b) in self.edges() {
            if (a.im > z.im) != (b.im > z.im) {
                let x = a.re + (z.im - a.im) / (b.im - a.im) * (b.re - a.re);
                if x > z.re {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// Reference containment test: crossing number, with points within
    /// [`BOUNDARY_TOL`] of the boundary reported as outside. O(n).
    pub fn contains(&self, z: Complex64) -> bool {
        if self.is_empty() {
            return false;
        }
        self.parity(z) && self.boundary_distance(z) >= BOUNDARY_TOL
    }

    /// Pairs of non-adjacent edges that intersect, found through the raster
    /// index. Empty for a simple polygon.
    pub fn self_intersections(&self) -> Vec<(usize, usize)> {
        let n = self.pts.len();
        if n < 4 {
            return Vec::new();
        }
        let idx = PolygonIndex::new(self, 256);
        let mut hits = Vec::new();
        for cell in &idx.cells {
            if let Cell::Boundary { edges, .. } = cell {
                for (i, &e) in edges.iter().enumerate() {
                    for &f in &edges[i + 1..] {
                        let (e, f) = (e as usize, f as usize);
                        if (e + 1) % n == f || (f + 1) % n == e {
                            continue;
                        }
                        if segments_intersect(
                            self.pts[e],
                            self.pts[(e + 1) % n],
                            self.pts[f],
                            self.pts[(f + 1) % n],
                        ) {
                            hits.push((e.min(f), e.max(f)));
                        }
                    }
                }
            }
        }
        hits.sort_unstable();
        hits.dedup();
        hits
    }

    pub fn is_simple(&self) -> bool {
        self.self_intersections().is_empty()
    }
}

fn segments_intersect(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> bool {
    let o1 = cross(b - a, c - a);
    let o2 = cross(b - a, d - a);
    let o3 = cross(d - c, a - c);
    let o4 = cross(d - c, b - c);
    if o1 * o2 < 0.0 && o3 * o4 < 0.0 {
        return true;
    }
    let on = |p: Complex64, q: Complex64, r: Complex64, o: f64| {
        o == 0.0
            && r.re >= p.re.min(q.re)
            && r.re <= p.re.max(q.re)
            && r.im >= p.im.min(q.im)
            && r.im <= p.im.max(q.im)
    };
    on(a, b, c, o1) || on(a, b, d, o2) || on(c, d, a, o3) || on(c, d, b, o4)
}

#[derive(Clone, Debug)]
enum Cell {
    Inside,
    Outside,
    /// Edges meeting the (slightly enlarged) cell and a reference point of
    /// known status.
    Boundary {
        edges: Vec<u32>,
        reference: Complex64,
        inside: bool,
    },
}

/// Raster acceleration structure for [`Polygon::contains`].
///
/// The bounding box is split into square-ish cells. Cells no edge touches
/// are entirely inside or outside (decided by a scanline through their
/// centers). In the remaining cells a query counts crossings between a
/// reference point of known status and the query point; that segment stays
/// in the cell, so only the cell's own edges matter.
#[derive(Clone, Debug)]
pub struct PolygonIndex {
    poly: Polygon,
    lo: Complex64,
    cell: f64,
    nx: usize,
    ny: usize,
    cells: Vec<Cell>,
}

impl PolygonIndex {
    /// Indexes `poly` with about `res` cells along the longer bbox side.
    pub fn new(poly: &Polygon, res: usize) -> Self {
        let res = res.max(1);
        let (lo, hi) = poly.bbox();
        let span = (hi.re - lo.re).max(hi.im - lo.im).max(1e-12);
        let cell = span / res as f64 * (1.0 + 1e-9);
        let nx = (((hi.re - lo.re) / cell).floor() as usize + 1).max(1);
        let ny = (((hi.im - lo.im) / cell).floor() as usize + 1).max(1);
        let mut buckets: Vec<Vec<u32>> = vec![Vec::new(); nx * ny];
        let margin = 2.0 * BOUNDARY_TOL;
        if !poly.is_empty() {
            for (k, (a, b)) in poly.edges().enumerate() {
                let x0 = ((a.re.min(b.re) - margin - lo.re) / cell).floor().max(0.0) as usize;
                let x1 = (((a.re.max(b.re) + margin - lo.re) / cell).floor() as usize).min(nx - 1);
                let y0 = ((a.im.min(b.im) - margin - lo.im) / cell).floor().max(0.0) as usize;
                let y1 = (((a.im.max(b.im) + margin - lo.im) / cell).floor() as usize).min(ny - 1);
                for iy in y0..=y1 {
                    for ix in x0..=x1 {
                        let c0 = lo + Complex64::new(ix as f64 * cell, iy as f64 * cell);
                        if edge_meets_box(a, b, c0, cell, margin) {
                            buckets[iy * nx + ix].push(k as u32);
                        }
                    }
                }
            }
        }

        let mut cells = Vec::with_capacity(nx * ny);
        for iy in 0..ny {
            let yc = lo.im + (iy as f64 + 0.5) * cell;
            // Scanline crossings through the row of cell centers.
            let mut xs: Vec<f64> = Vec::new();
            if !poly.is_empty() {
                for (a, b) in poly.edges() {
                    if (a.im > yc) != (b.im > yc) {
                        xs.push(a.re + (yc - a.im) / (b.im - a.im) * (b.re - a.re));
                    }
                }
            }
            xs.sort_by(f64::total_cmp);
            for ix in 0..nx {
                let k = iy * nx + ix;
                let center = lo + Complex64::new((ix as f64 + 0.5) * cell, (iy as f64 + 0.5) * cell);
                if buckets[k].is_empty() {
                    let right = xs.len() - xs.partition_point(|&x| x <= center.re);
                    cells.push(if right % 2 == 1 { Cell::Inside } else { Cell::Outside });
                } else {
                    let edges = std::mem::take(&mut buckets[k]);
                    let c0 = lo + Complex64::new(ix as f64 * cell, iy as f64 * cell);
                    let reference = pick_reference(poly, &edges, c0, cell);
                    cells.push(Cell::Boundary {
                        inside: poly.parity(reference),
                        edges,
                        reference,
                    });
                }
            }
        }
        PolygonIndex {
            poly: poly.clone(),
            lo,
            cell,
            nx,
            ny,
            cells,
        }
    }

    pub fn polygon(&self) -> &Polygon {
        &self.poly
    }

    /// Same answer as [`Polygon::contains`].
    pub fn contains(&self, z: Complex64) -> bool {
        let fx = (z.re - self.lo.re) / self.cell;
        let fy = (z.im - self.lo.im) / self.cell;
        if !(fx >= 0.0 && fy >= 0.0) || fx >= self.nx as f64 || fy >= self.ny as f64 {
            return false;
        }
        let (ix, iy) = (fx as usize, fy as usize);
        match &self.cells[iy * self.nx + ix] {
            Cell::Inside => true,
            Cell::Outside => false,
            Cell::Boundary {
                edges,
                reference,
                inside,
            } => {
                let pts = self.poly.points();
                let n = pts.len();
                let mut parity = *inside;
                for &e in edges {
                    let (a, b) = (pts[e as usize], pts[(e as usize + 1) % n]);
                    if segment_distance(z, a, b) < BOUNDARY_TOL {
                        return false;
                    }
                    if crosses(*reference, z, a, b) {
                        parity = !parity;
                    }
                }
                parity
            }
        }
    }
}

/// Whether segment `[a, b]` meets the square `[c0, c0 + cell]²` enlarged by
/// `margin`.
fn edge_meets_box(a: Complex64, b: Complex64, c0: Complex64, cell: f64, margin: f64) -> bool {
    let (x0, y0) = (c0.re - margin, c0.im - margin);
    let (x1, y1) = (c0.re + cell + margin, c0.im + cell + margin);
    // Liang–Barsky clipping.
    let d = b - a;
    let mut t0 = 0.0f64;
    let mut t1 = 1.0f64;
    for (p, q) in [
        (-d.re, a.re - x0),
        (d.re, x1 - a.re),
        (-d.im, a.im - y0),
        (d.im, y1 - a.im),
    ] {
        if p == 0.0 {
            if q < 0.0 {
                return false;
            }
        } else {
            let r = q / p;
            if p < 0.0 {
                t0 = t0.max(r);
            } else {
                t1 = t1.min(r);
            }
            if t0 > t1 {
                return false;
            }
        }
    }
    true
}

/// A point of the cell well away from its edges.
fn pick_reference(poly: &Polygon, edges: &[u32], c0: Complex64, cell: f64) -> Complex64 {
    let pts = poly.points();
    let n = pts.len();
    let clearance = |z: Complex64| {
        edges
            .iter()
            .map(|&e| segment_distance(z, pts[e as usize], pts[(e as usize + 1) % n]))
            .fold(f64::INFINITY, f64::min)
    };
    let mut best = c0 + Complex64::new(0.5 * cell, 0.5 * cell);
    let mut best_d = clearance(best);
    if best_d > 0.05 * cell {
        return best;
    }
    const M: usize = 7;
    for i in 0..M {
        for j in 0..M {
            let z = c0
                + Complex64::new(
                    (i as f64 + 0.5) / M as f64 * cell,
                    (j as f64 + 0.5) / M as f64 * cell,
                );
            let d = clearance(z);
            if d > best_d {
                best = z;
                best_d = d;
            }
        }
    }
    best
}
