//! Scene files: the polynomial, cut family, window and budgets of a run.
//!
//! Angles are strings such as `"1/3"` so that they stay exact. Errors name
//! the offending field, e.g. `cuts[1].theta_l`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::angle::Angle;
use crate::avoiding::GridSpec;
use crate::cuts::DEFAULT_G0;
use crate::error::{Error, Result};
use crate::poly::Polynomial;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCut {
    theta_r: String,
    theta_l: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    center: [f64; 2],
    width: f64,
    #[serde(default = "default_resolution")]
    resolution: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScene {
    #[serde(default = "default_name")]
    name: String,
    coeffs: Vec<[f64; 2]>,
    #[serde(default)]
    cuts: Vec<RawCut>,
    grid: RawGrid,
    #[serde(default = "default_max_iter")]
    max_iter: usize,
    #[serde(default)]
    g0: Option<f64>,
    #[serde(default)]
    rho: Option<f64>,
    #[serde(default)]
    q: Option<Vec<[f64; 2]>>,
    #[serde(default = "default_max_period")]
    max_period: usize,
    #[serde(default)]
    rays: Vec<String>,
    #[serde(default)]
    palette: Palette,
    #[serde(default = "default_seed")]
    seed: u64,
}

fn default_name() -> String {
    "scene".into()
}
fn default_resolution() -> usize {
    512
}
fn default_max_iter() -> usize {
    512
}
fn default_max_period() -> usize {
    3
}
fn default_seed() -> u64 {
    crate::surgery::DEFAULT_SEED
}

/// Colour scheme of rendered images.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Palette {
    /// Grey sets, blue wedges, red carrots, shaded exterior.
    #[default]
    Standard,
    /// Sets only, no exterior shading.
    Flat,
}

#[derive(Clone, Debug)]
pub struct Scene {
    pub name: String,
    pub polynomial: Polynomial,
    pub cuts: Vec<(Angle, Angle)>,
    pub grid: GridSpec,
    pub max_iter: usize,
    /// Potential of the outer equipotential.
    pub g0: f64,
    pub q: Option<Polynomial>,
    pub max_period: usize,
    /// Extra rays for the `ray` command.
    pub rays: Vec<Angle>,
    pub palette: Palette,
    pub seed: u64,
}

fn scene_err(path: impl Into<String>, message: impl ToString) -> Error {
    Error::Scene {
        path: path.into(),
        message: message.to_string(),
    }
}

fn coeffs(path: &str, raw: &[[f64; 2]]) -> Result<Polynomial> {
    if let Some(i) = raw.iter().position(|c| !c[0].is_finite() || !c[1].is_finite()) {
        return Err(scene_err(format!("{path}[{i}]"), "coefficient must be finite"));
    }
    match raw.last() {
        Some(&[re, im]) if re == 1.0 && im == 0.0 => {}
        Some(_) => {
            return Err(scene_err(
                format!("{path}[{}]", raw.len() - 1),
                "leading coefficient must be [1, 0]",
            ))
        }
        None => return Err(scene_err(path, "empty coefficient list")),
    }
    let c = raw.iter().map(|&[re, im]| Complex64::new(re, im)).collect();
    Polynomial::new(c).map_err(|e| scene_err(path, e))
}

fn angle(path: String, s: &str) -> Result<Angle> {
    s.parse::<Angle>().map_err(|e| scene_err(path, e))
}

impl Scene {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let raw: RawScene = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            scene_err(path, e.into_inner())
        })?;
        Self::from_raw(raw)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    fn from_raw(raw: RawScene) -> Result<Self> {
        let polynomial = coeffs("coeffs", &raw.coeffs)?;
        let cuts = raw
            .cuts
            .iter()
            .enumerate()
            .map(|(i, c)| {
                Ok((
                    angle(format!("cuts[{i}].theta_r"), &c.theta_r)?,
                    angle(format!("cuts[{i}].theta_l"), &c.theta_l)?,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        let center = Complex64::new(raw.grid.center[0], raw.grid.center[1]);
        if !center.re.is_finite() || !center.im.is_finite() {
            return Err(scene_err("grid.center", "must be finite"));
        }
        let grid = GridSpec::new(center, raw.grid.width, raw.grid.resolution).map_err(|e| scene_err("grid", e))?;
        if raw.max_iter == 0 {
            return Err(scene_err("max_iter", "must be positive"));
        }
        let g0 = match (raw.g0, raw.rho) {
            (Some(_), Some(_)) => return Err(scene_err("rho", "give either g0 or rho, not both")),
            (Some(g), None) => g,
            (None, Some(r)) => {
                if !(r > 0.0 && r < 1.0) {
                    return Err(scene_err("rho", "must lie in (0, 1)"));
                }
                -r.ln()
            }
            (None, None) => DEFAULT_G0,
        };
        if !(g0 > 0.0 && g0 < 0.25) {
            let field = if raw.rho.is_some() { "rho" } else { "g0" };
            return Err(scene_err(field, format!("outer potential {g0} must lie in (0, 0.25)")));
        }
        let q = raw.q.as_deref().map(|c| coeffs("q", c)).transpose()?;
        if raw.max_period == 0 {
            return Err(scene_err("max_period", "must be positive"));
        }
        let rays = raw
            .rays
            .iter()
            .enumerate()
            .map(|(i, s)| angle(format!("rays[{i}]"), s))
            .collect::<Result<Vec<_>>>()?;
        Ok(Scene {
            name: raw.name,
            polynomial,
            cuts,
            grid,
            max_iter: raw.max_iter,
            g0,
            q,
            max_period: raw.max_period,
            rays,
            palette: raw.palette,
            seed: raw.seed,
        })
    }

    /// `P = z(z+2)^2` with the cuts `(1/3, 2/3)` and `(0, 0)`, and the
    /// candidate `Q = z^2 - z`.
    pub fn figure1() -> Self {
        Self::from_json(FIGURE1_JSON).expect("built-in scene is valid")
    }

    /// Same scene at another resolution.
    pub fn with_resolution(mut self, n: usize) -> Result<Self> {
        self.grid = GridSpec::new(self.grid.center, self.grid.width, n)?;
        Ok(self)
    }
}

pub const FIGURE1_JSON: &str = r#"{
  "name": "figure1",
  "coeffs": [[0, 0], [4, 0], [4, 0], [1, 0]],
  "cuts": [
    {"theta_r": "1/3", "theta_l": "2/3"},
    {"theta_r": "0", "theta_l": "0"}
  ],
  "grid": {"center": [-1.5, 0], "width": 4.0, "resolution": 512},
  "max_iter": 512,
  "g0": 0.125,
  "q": [[0, 0], [-1, 0], [1, 0]],
  "max_period": 3,
  "rays": ["1/3", "2/3", "0"]
}"#;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn figure1_parses() {
        let s = Scene::figure1();
        assert_eq!(s.polynomial.degree(), 3);
        assert_eq!(s.cuts.len(), 2);
        assert_eq!(s.cuts[0].0.to_string(), "1/3");
        assert_eq!(s.q.as_ref().map(Polynomial::degree), Some(2));
    }

    fn path_of(text: &str) -> String {
        match Scene::from_json(text) {
            Err(Error::Scene { path, .. }) => path,
            other => panic!("expected scene error, got {other:?}"),
        }
    }

    #[test]
    fn errors_name_the_field() {
        let base = r#"{"coeffs": [[0,0],[0,0],[1,0]], "grid": {"center": [0,0], "width": 4}"#;
        assert_eq!(path_of(&format!(r#"{base}, "cuts": [{{"theta_r": "1/3", "theta_l": "x"}}]}}"#)), "cuts[0].theta_l");
        assert_eq!(path_of(r#"{"coeffs": [[0,0],[0,0],[2,0]], "grid": {"center": [0,0], "width": 4}}"#), "coeffs[2]");
        assert_eq!(path_of(r#"{"coeffs": [[0,0],[0,0],[1,0]], "grid": {"center": [0,0], "width": "4"}}"#), "grid.width");
        assert_eq!(path_of(&format!(r#"{base}, "rho": 1.5}}"#)), "rho");
        assert_eq!(path_of(&format!(r#"{base}, "colour": 1}}"#)), "colour");
    }
}
