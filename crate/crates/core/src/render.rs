//! RGB images over a [`GridSpec`] window, written as binary PPM (P6).

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::avoiding::{GridSpec, Mask};
use crate::cuts::CutFamily;
use crate::error::{Error, Result};
use crate::poly::{escape_time, Polynomial};
use crate::scene::Palette;

pub type Rgb = [u8; 3];

pub const AVOIDING: Rgb = [64, 64, 64];
pub const FILLED: Rgb = [160, 160, 160];
pub const WEDGE: Rgb = [200, 200, 255];
pub const RAY: Rgb = [0, 0, 0];
pub const CARROT: Rgb = [255, 0, 0];
pub const EXTERIOR: Rgb = [255, 255, 255];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<Rgb>,
}

impl Image {
    pub fn filled(width: usize, height: usize, c: Rgb) -> Self {
        Image {
            width,
            height,
            pixels: vec![c; width * height],
        }
    }

    pub fn get(&self, row: usize, col: usize) -> Rgb {
        self.pixels[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, c: Rgb) {
        self.pixels[row * self.width + col] = c;
    }

    /// Header `P6\n{w} {h}\n255\n`, then RGB rows from the top.
    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.reserve(3 * self.pixels.len());
        for px in &self.pixels {
            out.extend_from_slice(px);
        }
        out
    }

    pub fn write_ppm<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        w.write_all(&self.to_ppm())
    }

    pub fn from_ppm(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::InvalidArgument(format!("ppm: {m}"));
        let mut fields = Vec::new();
        let mut pos = 0;
        while fields.len() < 4 {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(bad("truncated header"));
            }
            fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("header"))?);
        }
        if fields[0] != "P6" || fields[3] != "255" {
            return Err(bad("expected P6 with maxval 255"));
        }
        let w: usize = fields[1].parse().map_err(|_| bad("width"))?;
        let h: usize = fields[2].parse().map_err(|_| bad("height"))?;
        let data = &bytes[pos + 1..];
        if data.len() != 3 * w * h {
            return Err(bad("pixel data length"));
        }
        Ok(Image {
            width: w,
            height: h,
            pixels: data.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect(),
        })
    }

    /// Draws the polyline in grid coordinates, clipped to the window.
    pub fn draw_polyline(&mut self, grid: &GridSpec, pts: &[Complex64], c: Rgb) {
        let h = grid.pixel_size();
        for seg in pts.windows(2) {
            let (a, b) = (seg[0], seg[1]);
            let steps = ((b - a).norm() / (0.5 * h)).ceil().clamp(1.0, 1e6) as usize;
            for k in 0..=steps {
                let z = a + (b - a) * (k as f64 / steps as f64);
                if let Some((r, col)) = grid.locate(z) {
                    self.set(r, col, c);
                }
            }
        }
    }
}

/// Exterior grey level from the escape step: slow escape is darker.
fn shade(steps: usize, max_iter: usize) -> Rgb {
    let t = (1.0 + steps as f64).ln() / (1.0 + max_iter as f64).ln();
    let v = (255.0 - 120.0 * t.clamp(0.0, 1.0)).round() as u8;
    [v, v, v]
}

/// Pixels of the bounded wedge polygons.
pub fn wedge_mask(family: &CutFamily, grid: GridSpec) -> Mask {
    let n = grid.n;
    let bits = (0..n * n)
        .into_par_iter()
        .map(|k| family.in_any_wedge_bounded(grid.pixel_center(k / n, k % n)))
        .collect();
    Mask::new(grid, bits).expect("grid-sized mask")
}

/// Escape step per pixel, `None` for pixels that stay bounded.
pub fn escape_steps(p: &Polynomial, grid: GridSpec, max_iter: usize) -> Vec<Option<usize>> {
    let n = grid.n;
    (0..n * n)
        .into_par_iter()
        .map(|k| {
            let r = escape_time(p, grid.pixel_center(k / n, k % n), max_iter);
            r.escaped.then_some(r.steps)
        })
        .collect()
}

/// Layers of a picture; later layers paint over earlier ones.
pub struct Picture<'a> {
    pub grid: GridSpec,
    pub palette: Palette,
    pub max_iter: usize,
    pub escape: &'a [Option<usize>],
    pub avoiding: Option<&'a Mask>,
    pub wedges: Option<&'a Mask>,
    pub rays: Vec<&'a [Complex64]>,
    pub carrots: Vec<&'a [Complex64]>,
}

impl Picture<'_> {
    pub fn render(&self) -> Image {
        let n = self.grid.n;
        let mut img = Image::filled(n, n, EXTERIOR);
        for k in 0..n * n {
            let (r, c) = (k / n, k % n);
            let px = match self.escape[k] {
                Some(s) => match self.palette {
                    Palette::Standard => shade(s, self.max_iter),
                    Palette::Flat => EXTERIOR,
                },
                None if self.avoiding.is_some_and(|a| a.get(r, c)) => AVOIDING,
                None => FILLED,
            };
            let in_wedge = self.wedges.is_some_and(|w| w.get(r, c));
            let avoiding = self.avoiding.is_some_and(|a| a.get(r, c));
            img.set(r, c, if in_wedge && !avoiding { WEDGE } else { px });
        }
        for ray in &self.rays {
            img.draw_polyline(&self.grid, ray, RAY);
        }
        for carrot in &self.carrots {
            img.draw_polyline(&self.grid, carrot, CARROT);
        }
        img
    }
}

/// Black and white image of a mask.
pub fn mask_image(m: &Mask) -> Image {
    let n = m.n();
    let mut img = Image::filled(n, n, EXTERIOR);
    for r in 0..n {
        for c in 0..n {
            if m.get(r, c) {
                img.set(r, c, AVOIDING);
            }
        }
    }
    img
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ppm_header_and_roundtrip() {
        let mut img = Image::filled(3, 2, [1, 2, 3]);
        img.set(1, 2, [9, 8, 7]);
        let bytes = img.to_ppm();
        assert!(bytes.starts_with(b"P6\n3 2\n255\n"));
        assert_eq!(bytes.len(), 11 + 18);
        assert_eq!(&bytes[bytes.len() - 3..], &[9, 8, 7]);
        assert_eq!(Image::from_ppm(&bytes).unwrap(), img);
    }

    #[test]
    fn polyline_is_clipped() {
        let grid = GridSpec::new(Complex64::new(0.0, 0.0), 2.0, 16).unwrap();
        let mut img = Image::filled(16, 16, EXTERIOR);
        img.draw_polyline(&grid, &[Complex64::new(-5.0, 0.01), Complex64::new(5.0, 0.01)], RAY);
        let black = img.pixels.iter().filter(|&&p| p == RAY).count();
        assert_eq!(black, 16);
    }
}
