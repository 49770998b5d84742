use std::path::PathBuf;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::images::load_image_dataset;
use crate::error::{Error, Result};
use crate::pde::{Field, Grid2D};
use crate::rng::Rng;

/// Closed interval `[lo, hi]` of a uniform draw.
pub type Range = [f64; 2];

/// Distribution of the inferred field.
///
/// Procedural priors draw their parameters in coordinates normalized to the
/// unit square and scale them onto the grid's box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PriorSpec {
    /// Zero background; on `[xi1, xi3] x [xi4, xi2]` the value rises linearly
    /// in `s1` from 2 to 4.
    Rectangular {
        #[serde(default = "lower")]
        xi1: Range,
        #[serde(default = "upper")]
        xi2: Range,
        #[serde(default = "upper")]
        xi3: Range,
        #[serde(default = "lower")]
        xi4: Range,
    },
    /// Flat disk of value `contrast` on a constant background.
    CircularInclusion {
        #[serde(default = "unit")]
        center: Range,
        #[serde(default = "radius")]
        radius: Range,
        #[serde(default = "contrast")]
        contrast: Range,
        #[serde(default = "one")]
        background: f64,
    },
    /// Rotated flat ellipse on a constant background.
    Ellipse {
        #[serde(default = "unit")]
        center: Range,
        #[serde(default = "radius")]
        semi_axis: Range,
        #[serde(default = "contrast")]
        contrast: Range,
        #[serde(default = "one")]
        background: f64,
    },
    /// Two independent disks; where they overlap the second wins.
    TwoCircles {
        #[serde(default = "unit")]
        center: Range,
        #[serde(default = "small_radius")]
        radius: Range,
        #[serde(default = "contrast")]
        contrast: Range,
        #[serde(default = "one")]
        background: f64,
    },
    /// Images from an IDX file or raster directory, pixel levels mapped onto `[low, high]`.
    ImageDirectory {
        path: PathBuf,
        #[serde(default)]
        low: f64,
        #[serde(default = "four")]
        high: f64,
    },
}

fn lower() -> Range {
    [0.2, 0.4]
}
fn upper() -> Range {
    [0.6, 0.8]
}
fn unit() -> Range {
    [0.0, 1.0]
}
fn radius() -> Range {
    [0.05, 0.3]
}
fn small_radius() -> Range {
    [0.05, 0.2]
}
fn contrast() -> Range {
    [2.0, 10.0]
}
fn one() -> f64 {
    1.0
}
fn four() -> f64 {
    4.0
}

fn draw(rng: &mut Rng, r: Range) -> f64 {
    if r[0] == r[1] {
        r[0]
    } else {
        rng.random_range(r[0]..=r[1])
    }
}

impl PriorSpec {
    pub fn rectangular() -> Self {
        PriorSpec::Rectangular {
            xi1: lower(),
            xi2: upper(),
            xi3: upper(),
            xi4: lower(),
        }
    }

    pub fn circular() -> Self {
        PriorSpec::CircularInclusion {
            center: unit(),
            radius: radius(),
            contrast: contrast(),
            background: 1.0,
        }
    }

    /// Short tag used in manifests and logs.
    pub fn name(&self) -> &'static str {
        match self {
            PriorSpec::Rectangular { .. } => "rectangular",
            PriorSpec::CircularInclusion { .. } => "circular_inclusion",
            PriorSpec::Ellipse { .. } => "ellipse",
            PriorSpec::TwoCircles { .. } => "two_circles",
            PriorSpec::ImageDirectory { .. } => "image_directory",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ordered = |name: &str, r: &Range| {
            if r[0] <= r[1] && r.iter().all(|v| v.is_finite()) {
                Ok(())
            } else {
                Err(Error::invalid(format!("prior range {name} = {r:?} is not ordered")))
            }
        };
        let positive = |name: &str, v: f64| {
            if v > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(format!("prior {name} must be positive, got {v}")))
            }
        };
        match self {
            PriorSpec::Rectangular { xi1, xi2, xi3, xi4 } => {
                ordered("xi1", xi1)?;
                ordered("xi2", xi2)?;
                ordered("xi3", xi3)?;
                ordered("xi4", xi4)
            }
            PriorSpec::CircularInclusion { center, radius, contrast, background }
            | PriorSpec::TwoCircles { center, radius, contrast, background }
            | PriorSpec::Ellipse { center, semi_axis: radius, contrast, background } => {
                ordered("center", center)?;
                ordered("radius", radius)?;
                ordered("contrast", contrast)?;
                positive("radius", radius[0])?;
                positive("contrast", contrast[0])?;
                positive("background", *background)
            }
            PriorSpec::ImageDirectory { low, high, .. } => {
                if low <= high {
                    Ok(())
                } else {
                    Err(Error::invalid(format!("image levels low {low} > high {high}")))
                }
            }
        }
    }

    /// Draws the normalized shape parameters of a procedural prior.
    ///
    /// Rectangular: `[xi1, xi2, xi3, xi4]`. Circle: `[c1, c2, r, contrast]`.
    /// Ellipse: `[c1, c2, a, b, angle, contrast]`. Two circles: two circle blocks.
    pub fn draw_params(&self, rng: &mut Rng) -> Result<Vec<f64>> {
        Ok(match self {
            PriorSpec::Rectangular { xi1, xi2, xi3, xi4 } => loop {
                let xi = [draw(rng, *xi1), draw(rng, *xi2), draw(rng, *xi3), draw(rng, *xi4)];
                // Disjoint default ranges make this a formality.
                if xi[2] > xi[0] && xi[1] > xi[3] {
                    break xi.to_vec();
                }
            },
            PriorSpec::CircularInclusion { center, radius, contrast, .. } => {
                vec![draw(rng, *center), draw(rng, *center), draw(rng, *radius), draw(rng, *contrast)]
            }
            PriorSpec::Ellipse { center, semi_axis, contrast, .. } => vec![
                draw(rng, *center),
                draw(rng, *center),
                draw(rng, *semi_axis),
                draw(rng, *semi_axis),
                rng.random_range(0.0..std::f64::consts::PI),
                draw(rng, *contrast),
            ],
            PriorSpec::TwoCircles { center, radius, contrast, .. } => (0..2)
                .flat_map(|_| [draw(rng, *center), draw(rng, *center), draw(rng, *radius), draw(rng, *contrast)])
                .collect(),
            PriorSpec::ImageDirectory { .. } => {
                return Err(Error::invalid("image priors have no shape parameters"))
            }
        })
    }

    /// Rasterizes a procedural prior at the given parameters. A node belongs to
    /// a shape when its position lies inside it; there is no anti-aliasing.
    pub fn rasterize(&self, p: &[f64], grid: &Grid2D) -> Result<Field> {
        let (l1, l2) = (grid.b1 - grid.a1, grid.b2 - grid.a2);
        let norm = |s: [f64; 2]| [(s[0] - grid.a1) / l1, (s[1] - grid.a2) / l2];
        let want = match self {
            PriorSpec::Rectangular { .. } => 4,
            PriorSpec::CircularInclusion { .. } => 4,
            PriorSpec::Ellipse { .. } => 6,
            PriorSpec::TwoCircles { .. } => 8,
            PriorSpec::ImageDirectory { .. } => 0,
        };
        if want == 0 || p.len() != want {
            return Err(Error::invalid(format!(
                "{} prior takes {want} parameters, got {}",
                self.name(),
                p.len()
            )));
        }
        let in_disk = |q: [f64; 2], c: &[f64]| (q[0] - c[0]).hypot(q[1] - c[1]) < c[2];
        Ok(match self {
            PriorSpec::Rectangular { .. } => grid.sample(|s| {
                let q = norm(s);
                if q[0] >= p[0] && q[0] <= p[2] && q[1] >= p[3] && q[1] <= p[1] {
                    2.0 + 2.0 * (q[0] - p[0]) / (p[2] - p[0])
                } else {
                    0.0
                }
            }),
            PriorSpec::CircularInclusion { background, .. } => {
                grid.sample(|s| if in_disk(norm(s), p) { p[3] } else { *background })
            }
            PriorSpec::Ellipse { background, .. } => grid.sample(|s| {
                let q = norm(s);
                let (dx, dy) = (q[0] - p[0], q[1] - p[1]);
                let (c, sn) = (p[4].cos(), p[4].sin());
                let u = (c * dx + sn * dy) / p[2];
                let v = (-sn * dx + c * dy) / p[3];
                if u * u + v * v < 1.0 {
                    p[5]
                } else {
                    *background
                }
            }),
            PriorSpec::TwoCircles { background, .. } => grid.sample(|s| {
                let q = norm(s);
                if in_disk(q, &p[4..]) {
                    p[7]
                } else if in_disk(q, p) {
                    p[3]
                } else {
                    *background
                }
            }),
            PriorSpec::ImageDirectory { .. } => unreachable!(),
        })
    }
}

/// A ready-to-sample prior: procedural, or a loaded image collection.
#[derive(Clone, Debug)]
pub enum Prior {
    Procedural { spec: PriorSpec, grid: Grid2D },
    Images(Vec<Field>),
}

impl Prior {
    pub fn new(spec: &PriorSpec, grid: Grid2D) -> Result<Self> {
        spec.validate()?;
        Ok(match spec {
            PriorSpec::ImageDirectory { path, low, high } => {
                Prior::Images(load_image_dataset(path, &grid, *low, *high)?)
            }
            other => Prior::Procedural {
                spec: other.clone(),
                grid,
            },
        })
    }

    /// Sample for dataset record `index`. Image priors return image `index`;
    /// procedural priors ignore it and draw from `rng`.
    pub fn sample(&self, index: usize, rng: &mut Rng) -> Result<Field> {
        match self {
            Prior::Procedural { spec, grid } => spec.rasterize(&spec.draw_params(rng)?, grid),
            Prior::Images(images) => images.get(index).cloned().ok_or_else(|| {
                Error::invalid(format!("record {index} requested from {} images", images.len()))
            }),
        }
    }

    /// Number of distinct samples available, if finite.
    pub fn capacity(&self) -> Option<usize> {
        match self {
            Prior::Procedural { .. } => None,
            Prior::Images(v) => Some(v.len()),
        }
    }
}

/// Draws one field from a procedural prior.
pub fn sample_prior(spec: &PriorSpec, grid: &Grid2D, rng: &mut Rng) -> Result<Field> {
    spec.validate()?;
    spec.rasterize(&spec.draw_params(rng)?, grid)
}

/// `clean + eta`, `eta` i.i.d. `N(0, sigma^2)` per node.
pub fn add_noise(clean: &Field, sigma: f64, rng: &mut Rng) -> Result<Field> {
    if !(sigma >= 0.0) {
        return Err(Error::invalid(format!("noise level must be non-negative, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(clean.clone());
    }
    let normal = rand_distr::Normal::new(0.0, sigma).map_err(|e| Error::invalid(e.to_string()))?;
    let values = clean.values.iter().map(|v| v + rng.sample(normal)).collect();
    Field::new(clean.grid, values)
}
