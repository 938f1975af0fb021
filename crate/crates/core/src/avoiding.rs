//! Pixel masks of the filled Julia set and of the avoiding set, with
//! connectivity, comparison and mask file formats.

use std::io::{Read, Write};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::cuts::CutFamily;
use crate::error::{Error, Result};
use crate::poly::Polynomial;

/// Default iteration budget of mask computations.
pub const DEFAULT_MAX_ITER: usize = 512;
const RAW_MAGIC: &[u8; 8] = b"APLMASK1";

/// Square pixel window. Pixel `(row, col)` has its center at
/// `center + (-w/2 + (col + 1/2) h) + i (w/2 - (row + 1/2) h)` with
/// `h = w / n`; row 0 is the top row.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GridSpec {
    pub center: Complex64,
    pub width: f64,
    pub n: usize,
}

impl GridSpec {
    pub fn new(center: Complex64, width: f64, n: usize) -> Result<Self> {
        if !(width > 0.0) || !width.is_finite() || n < 16 {
            return Err(Error::InvalidArgument(format!(
                "grid needs width > 0 and n >= 16 (got {width}, {n})"
            )));
        }
        Ok(GridSpec { center, width, n })
    }

    pub fn pixel_size(&self) -> f64 {
        self.width / self.n as f64
    }

    pub fn pixel_center(&self, row: usize, col: usize) -> Complex64 {
        self.subpixel(row, col, 0.5, 0.5)
    }

    /// Point at fractional offset `(fx, fy)` inside a pixel; `(0, 0)` is the
    /// pixel's top-left corner.
    pub fn subpixel(&self, row: usize, col: usize, fx: f64, fy: f64) -> Complex64 {
        let h = self.pixel_size();
        let half = 0.5 * self.width;
        Complex64::new(
            self.center.re - half + (col as f64 + fx) * h,
            self.center.im + half - (row as f64 + fy) * h,
        )
    }

    /// Pixel containing `z`, if inside the window.
    pub fn locate(&self, z: Complex64) -> Option<(usize, usize)> {
        let h = self.pixel_size();
        let half = 0.5 * self.width;
        let fc = (z.re - (self.center.re - half)) / h;
        let fr = ((self.center.im + half) - z.im) / h;
        if fc >= 0.0 && fr >= 0.0 && fc < self.n as f64 && fr < self.n as f64 {
            Some((fr as usize, fc as usize))
        } else {
            None
        }
    }
}

/// Row-major boolean pixel mask over a [`GridSpec`].
#[derive(Clone, Debug, PartialEq)]
pub struct Mask {
    pub grid: GridSpec,
    bits: Vec<bool>,
}

impl Mask {
    pub fn new(grid: GridSpec, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != grid.n * grid.n {
            return Err(Error::GridMismatch);
        }
        Ok(Mask { grid, bits })
    }

    pub fn filled(grid: GridSpec, value: bool) -> Self {
        Mask {
            bits: vec![value; grid.n * grid.n],
            grid,
        }
    }

    pub fn n(&self) -> usize {
        self.grid.n
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.grid.n + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, v: bool) {
        let n = self.grid.n;
        self.bits[row * n + col] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_subset_of(&self, other: &Mask) -> bool {
        self.grid == other.grid && self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }

    /// Whether some set pixel lies within Chebyshev distance `r` of
    /// `(row, col)`.
    pub fn near(&self, row: usize, col: usize, r: usize) -> bool {
        let n = self.grid.n;
        let (r0, r1) = (row.saturating_sub(r), (row + r).min(n - 1));
        let (c0, c1) = (col.saturating_sub(r), (col + r).min(n - 1));
        (r0..=r1).any(|i| (c0..=c1).any(|j| self.get(i, j)))
    }

    /// Morphological dilation by a `(2r+1)²` square.
    pub fn dilate(&self, r: usize) -> Mask {
        let n = self.grid.n;
        let bits = (0..n * n)
            .into_par_iter()
            .map(|k| self.near(k / n, k % n, r))
            .collect();
        Mask { grid: self.grid, bits }
    }

    /// Morphological erosion by a `(2r+1)²` square; pixels outside the
    /// window count as set.
    pub fn erode(&self, r: usize) -> Mask {
        let n = self.grid.n;
        let bits = (0..n * n)
            .into_par_iter()
            .map(|k| {
                let (row, col) = (k / n, k % n);
                let (r0, r1) = (row.saturating_sub(r), (row + r).min(n - 1));
                let (c0, c1) = (col.saturating_sub(r), (col + r).min(n - 1));
                (r0..=r1).all(|i| (c0..=c1).all(|j| self.get(i, j)))
            })
            .collect();
        Mask { grid: self.grid, bits }
    }

    /// Dilation followed by erosion.
    pub fn close(&self, r: usize) -> Mask {
        self.dilate(r).erode(r)
    }

    /// Pixels, set or not, with a 4-neighbour of the other value.
    pub fn boundary(&self) -> Mask {
        let n = self.grid.n;
        let bits = (0..n * n)
            .into_par_iter()
            .map(|k| {
                let (row, col) = (k / n, k % n);
                let v = self.get(row, col);
                (row > 0 && self.get(row - 1, col) != v)
                    || (row + 1 < n && self.get(row + 1, col) != v)
                    || (col > 0 && self.get(row, col - 1) != v)
                    || (col + 1 < n && self.get(row, col + 1) != v)
            })
            .collect();
        Mask { grid: self.grid, bits }
    }

    /// Packed raw format: 8-byte magic `APLMASK1`, `u32` width and height
    /// (little-endian), then rows of bits, most significant bit first, with
    /// each row padded to whole bytes.
    pub fn write_raw<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        let n = self.grid.n;
        w.write_all(RAW_MAGIC)?;
        w.write_all(&(n as u32).to_le_bytes())?;
        w.write_all(&(n as u32).to_le_bytes())?;
        let mut row = vec![0u8; n.div_ceil(8)];
        for i in 0..n {
            row.iter_mut().for_each(|b| *b = 0);
            for j in 0..n {
                if self.get(i, j) {
                    row[j / 8] |= 0x80 >> (j % 8);
                }
            }
            w.write_all(&row)?;
        }
        Ok(())
    }

    /// Reads the raw format onto `grid`, which must have the stored size.
    pub fn read_raw<R: Read>(r: &mut R, grid: GridSpec) -> Result<Mask> {
        let mut head = [0u8; 16];
        r.read_exact(&mut head)?;
        if &head[..8] != RAW_MAGIC {
            return Err(Error::InvalidArgument("not an APLMASK1 file".into()));
        }
        let w = u32::from_le_bytes(head[8..12].try_into().unwrap()) as usize;
        let h = u32::from_le_bytes(head[12..16].try_into().unwrap()) as usize;
        if w != grid.n || h != grid.n {
            return Err(Error::GridMismatch);
        }
        let mut row = vec![0u8; w.div_ceil(8)];
        let mut bits = Vec::with_capacity(w * h);
        for _ in 0..h {
            r.read_exact(&mut row)?;
            bits.extend((0..w).map(|j| row[j / 8] & (0x80 >> (j % 8)) != 0));
        }
        Mask::new(grid, bits)
    }
}

/// Whether the orbit of `z` stays bounded for `max_iter` steps and never
/// (from step 0 on) enters a wedge of `family`.
///
/// Wedges are tested by their truncated polygons. Any iterate above the
/// truncation potential escapes within a few more steps, so the answer is
/// the same as with the full wedge test.
pub fn avoids(p: &Polynomial, family: Option<&CutFamily>, z: Complex64, max_iter: usize) -> bool {
    let r2 = p.escape_radius() * p.escape_radius();
    let wedges = family.filter(|f| f.wedges.iter().any(Option::is_some));
    let mut w = z;
    for _ in 0..max_iter.max(1) {
        if let Some(f) = wedges {
            if f.in_any_wedge_bounded(w) {
                return false;
            }
        }
        w = p.eval(w);
        if w.norm_sqr() > r2 || !w.re.is_finite() || !w.im.is_finite() {
            return false;
        }
    }
    wedges.is_none_or(|f| !f.in_any_wedge_bounded(w))
}

/// `K_P` (no family) or `A_P(Z)` sampled at pixel centers, or by majority
/// over `supersample²` sub-pixel points.
pub fn compute_mask(
    p: &Polynomial,
    family: Option<&CutFamily>,
    grid: GridSpec,
    max_iter: usize,
    supersample: usize,
) -> Mask {
    let n = grid.n;
    let ss = supersample.max(1);
    let bits: Vec<bool> = (0..n)
        .into_par_iter()
        .flat_map_iter(|row| {
            (0..n).map(move |col| {
                if ss == 1 {
                    return avoids(p, family, grid.pixel_center(row, col), max_iter);
                }
                let mut hits = 0;
                for a in 0..ss {
                    for b in 0..ss {
                        let z = grid.subpixel(
                            row,
                            col,
                            (b as f64 + 0.5) / ss as f64,
                            (a as f64 + 0.5) / ss as f64,
                        );
                        hits += avoids(p, family, z, max_iter) as usize;
                    }
                }
                2 * hits >= ss * ss
            })
        })
        .collect();
    Mask { grid, bits }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Components {
    /// Component sizes in pixels, largest first.
    pub sizes: Vec<usize>,
}

impl Components {
    pub fn count(&self) -> usize {
        self.sizes.len()
    }
}

/// 8-connected components after one closing pass of radius `closing`.
pub fn connected_components(m: &Mask, closing: usize) -> Components {
    let closed = if closing > 0 { m.close(closing) } else { m.clone() };
    label_components(&closed)
}

fn label_components(m: &Mask) -> Components {
    let n = m.n();
    let mut seen = vec![false; n * n];
    let mut sizes = Vec::new();
    let mut stack = Vec::new();
    for start in 0..n * n {
        if seen[start] || !m.bits[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let mut size = 0;
        while let Some(k) = stack.pop() {
            size += 1;
            let (r, c) = ((k / n) as isize, (k % n) as isize);
            for dr in -1..=1 {
                for dc in -1..=1 {
                    let (rr, cc) = (r + dr, c + dc);
                    if rr < 0 || cc < 0 || rr >= n as isize || cc >= n as isize {
                        continue;
                    }
                    let kk = rr as usize * n + cc as usize;
                    if m.bits[kk] && !seen[kk] {
                        seen[kk] = true;
                        stack.push(kk);
                    }
                }
            }
        }
        sizes.push(size);
    }
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    Components { sizes }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MaskComparison {
    /// Fraction of all pixels where the masks agree.
    pub agreement: f64,
    pub differing: usize,
    /// Pixels within `band` of either mask's boundary.
    pub band_pixels: usize,
    /// Differing pixels outside the band.
    pub strict_differing: usize,
    /// Agreement over the pixels outside the band.
    pub strict_agreement: f64,
}

/// Pixelwise comparison, with a boundary band excluded from the strict
/// counts. Boundary pixels sit on both sides of a mask edge, so `band`
/// pixels on each side of every edge are excluded.
pub fn compare_masks(a: &Mask, b: &Mask, band: usize) -> Result<MaskComparison> {
    if a.grid != b.grid {
        return Err(Error::GridMismatch);
    }
    let total = a.bits.len();
    let differing = a.bits.iter().zip(&b.bits).filter(|(x, y)| x != y).count();
    let excluded = if band > 0 {
        let ba = a.boundary();
        let bb = b.boundary();
        let both = Mask {
            grid: a.grid,
            bits: ba.bits.iter().zip(&bb.bits).map(|(x, y)| *x || *y).collect(),
        };
        both.dilate(band - 1)
    } else {
        Mask::filled(a.grid, false)
    };
    let band_pixels = excluded.count();
    let strict_differing = (0..total)
        .filter(|&k| !excluded.bits[k] && a.bits[k] != b.bits[k])
        .count();
    let outside = total - band_pixels;
    Ok(MaskComparison {
        agreement: 1.0 - differing as f64 / total as f64,
        differing,
        band_pixels,
        strict_differing,
        strict_agreement: if outside == 0 {
            1.0
        } else {
            1.0 - strict_differing as f64 / outside as f64
        },
    })
}

/// Fraction of set pixels whose image under `f` lands within `slack`
/// pixels of a set pixel.
pub fn forward_invariance<F>(m: &Mask, f: F, slack: usize) -> f64
where
    F: Fn(Complex64) -> Complex64 + Sync,
{
    let n = m.n();
    let (good, total) = (0..n * n)
        .into_par_iter()
        .filter(|&k| m.bits[k])
        .map(|k| {
            let w = f(m.grid.pixel_center(k / n, k % n));
            let ok = m.grid.locate(w).is_some_and(|(r, c)| m.near(r, c, slack));
            (ok as usize, 1usize)
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    if total == 0 {
        1.0
    } else {
        good as f64 / total as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> GridSpec {
        GridSpec::new(Complex64::new(0.0, 0.0), 4.0, n).unwrap()
    }

    #[test]
    fn corner_pixels() {
        let g = grid(16);
        assert_eq!(g.pixel_center(0, 0), Complex64::new(-2.0 + 0.125, 2.0 - 0.125));
        assert_eq!(g.pixel_center(15, 15), Complex64::new(2.0 - 0.125, -2.0 + 0.125));
        assert_eq!(g.locate(g.pixel_center(3, 7)), Some((3, 7)));
        assert_eq!(g.locate(Complex64::new(2.5, 0.0)), None);
    }

    #[test]
    fn two_squares_two_components() {
        let g = grid(32);
        let mut m = Mask::filled(g, false);
        for i in 2..8 {
            for j in 2..8 {
                m.set(i, j, true);
                m.set(i + 15, j + 15, true);
            }
        }
        assert_eq!(connected_components(&m, 1).count(), 2);
        assert_eq!(connected_components(&Mask::filled(g, true), 1).count(), 1);
        assert_eq!(connected_components(&Mask::filled(g, false), 1).count(), 0);
    }

    #[test]
    fn closing_bridges_single_pixel_gap() {
        let g = grid(32);
        let mut m = Mask::filled(g, false);
        for j in 2..30 {
            if j != 16 {
                m.set(10, j, true);
            }
        }
        assert_eq!(connected_components(&m, 0).count(), 2);
        assert_eq!(connected_components(&m, 1).count(), 1);
    }

    #[test]
    fn comparison_extremes() {
        let g = grid(16);
        let full = Mask::filled(g, true);
        let empty = Mask::filled(g, false);
        assert_eq!(compare_masks(&full, &full, 2).unwrap().agreement, 1.0);
        assert_eq!(compare_masks(&full, &empty, 0).unwrap().agreement, 0.0);
        let other = Mask::filled(grid(32), true);
        assert!(matches!(compare_masks(&full, &other, 0), Err(Error::GridMismatch)));
    }

    #[test]
    fn raw_roundtrip() {
        let g = grid(19);
        let mut m = Mask::filled(g, false);
        m.set(0, 0, true);
        m.set(5, 18, true);
        m.set(18, 9, true);
        let mut buf = Vec::new();
        m.write_raw(&mut buf).unwrap();
        assert_eq!(&buf[..8], b"APLMASK1");
        assert_eq!(buf.len(), 16 + 19 * 3);
        let back = Mask::read_raw(&mut buf.as_slice(), g).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn square_filled_julia_is_disk() {
        let p = Polynomial::from_real(&[0.0, 0.0, 1.0]).unwrap();
        let g = grid(128);
        let m = compute_mask(&p, None, g, 256, 1);
        let mut wrong = 0;
        for i in 0..128 {
            for j in 0..128 {
                if m.get(i, j) != (g.pixel_center(i, j).norm() <= 1.0) {
                    wrong += 1;
                }
            }
        }
        assert!(wrong < 128 * 128 / 100, "{wrong}");
    }
}
