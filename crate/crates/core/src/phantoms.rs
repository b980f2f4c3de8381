//! Synthetic true sources and coefficients.
//!
//! A [`Phantom`] is a background constant plus a list of inclusions with
//! disjoint supports. Each inclusion is a [`Shape`] scaled by an amplitude,
//! so the same description drives sampling, support masks and the regions
//! used when grading a reconstruction.

use crate::error::{Error, Result};
use crate::fields::{sample_spatial, SpatialField};
use crate::grid::GridSpec;

const OMEGA_STROKES: &str = include_str!("../data/omega.txt");
const SIGMA_STROKES: &str = include_str!("../data/sigma.txt");

/// Half-width of the letter strokes.
pub const STROKE_HALF_WIDTH: f64 = 0.08;

/// The known time factor of the source, `1 + 0.2 e^{t |x|²}`.
pub fn eval_f(x: f64, y: f64, t: f64) -> f64 {
    1.0 + 0.2 * (t * (x * x + y * y)).exp()
}

/// The known coefficient of the source problem, `0.2 |x|²`.
pub fn eval_c_background(x: f64, y: f64) -> f64 {
    0.2 * (x * x + y * y)
}

/// `exp(r² / (r² - R²))` inside the disk of radius `R`, zero outside.
fn bump(r2: f64, radius: f64) -> f64 {
    let rr = radius * radius;
    if r2 < rr {
        (r2 / (r2 - rr)).exp()
    } else {
        0.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Shape {
    /// Smooth compactly supported bump with peak 1 at `center`.
    Bump { center: (f64, f64), radius: f64 },
    /// Indicator of `wx (x - cx)² + wy (y - cy)² < level`.
    Ellipse { center: (f64, f64), wx: f64, wy: f64, level: f64 },
    /// Indicator of `max(sx |x - cx|, sy |y - cy|) < half`.
    Rectangle { center: (f64, f64), sx: f64, sy: f64, half: f64 },
    /// Indicator of the union of thick polylines.
    Strokes { polylines: Vec<Vec<(f64, f64)>>, half_width: f64 },
}

impl Shape {
    pub fn disk(center: (f64, f64), radius: f64) -> Self {
        Shape::Ellipse {
            center,
            wx: 1.0,
            wy: 1.0,
            level: radius * radius,
        }
    }

    /// Profile value in `[0, 1]`.
    pub fn profile(&self, x: f64, y: f64) -> f64 {
        match self {
            Shape::Bump { center, radius } => {
                let (dx, dy) = (x - center.0, y - center.1);
                bump(dx * dx + dy * dy, *radius)
            }
            Shape::Ellipse { center, wx, wy, level } => {
                let (dx, dy) = (x - center.0, y - center.1);
                indicator(wx * dx * dx + wy * dy * dy < *level)
            }
            Shape::Rectangle { center, sx, sy, half } => {
                indicator((sx * (x - center.0).abs()).max(sy * (y - center.1).abs()) < *half)
            }
            Shape::Strokes { polylines, half_width } => {
                let hit = polylines.iter().any(|line| {
                    line.windows(2)
                        .any(|seg| segment_distance((x, y), seg[0], seg[1]) <= *half_width)
                });
                indicator(hit)
            }
        }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        self.profile(x, y) > 0.0
    }
}

fn indicator(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (abx, aby) = (b.0 - a.0, b.1 - a.1);
    let (apx, apy) = (p.0 - a.0, p.1 - a.1);
    let len2 = abx * abx + aby * aby;
    let s = if len2 == 0.0 {
        0.0
    } else {
        ((apx * abx + apy * aby) / len2).clamp(0.0, 1.0)
    };
    let (dx, dy) = (apx - s * abx, apy - s * aby);
    (dx * dx + dy * dy).sqrt()
}

/// Parses `x y` vertex lines; blank lines separate strokes and `#` starts a
/// comment.
pub fn parse_polylines(text: &str) -> Result<Vec<Vec<(f64, f64)>>> {
    let mut lines = Vec::new();
    let mut current = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            if !raw.trim_start().starts_with('#') && !current.is_empty() {
                lines.push(std::mem::take(&mut current));
            }
            continue;
        }
        let mut parts = line.split_whitespace().map(str::parse::<f64>);
        match (parts.next(), parts.next(), parts.next()) {
            (Some(Ok(x)), Some(Ok(y)), None) if x.is_finite() && y.is_finite() => current.push((x, y)),
            _ => return Err(Error::Data(format!("stroke line {}: expected `x y`, got {raw:?}", k + 1))),
        }
    }
    if !current.is_empty() {
        lines.push(current);
    }
    if lines.iter().any(|l| l.len() < 2) {
        return Err(Error::Data("every stroke needs at least two vertices".into()));
    }
    Ok(lines)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Inclusion {
    pub label: String,
    pub shape: Shape,
    pub amplitude: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Phantom {
    pub name: String,
    pub background: f64,
    pub inclusions: Vec<Inclusion>,
}

/// Grid nodes where one inclusion is graded, with its true extreme.
#[derive(Clone, Debug, PartialEq)]
pub struct Region {
    pub label: String,
    /// One flag per node in spatial order.
    pub mask: Vec<bool>,
    /// `+1` for a maximum, `-1` for a minimum.
    pub sign: f64,
    pub extreme_true: f64,
}

impl Region {
    pub fn node_count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }
}

impl Phantom {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.background
            + self
                .inclusions
                .iter()
                .map(|inc| inc.amplitude * inc.shape.profile(x, y))
                .sum::<f64>()
    }

    pub fn sample(&self, spec: GridSpec) -> Result<SpatialField> {
        sample_spatial(spec, |x, y| self.eval(x, y))
    }

    /// Supports dilated by one grid cell (8-neighbourhood).
    pub fn regions(&self, spec: GridSpec) -> Vec<Region> {
        let m = spec.nodes_per_axis();
        self.inclusions
            .iter()
            .map(|inc| {
                let inside: Vec<bool> = (1..=m)
                    .flat_map(|i| (1..=m).map(move |j| (i, j)))
                    .map(|(i, j)| inc.shape.contains(spec.x(i), spec.y(j)))
                    .collect();
                let mut mask = vec![false; m * m];
                for i in 1..=m {
                    for j in 1..=m {
                        let near = (i.saturating_sub(1).max(1)..=(i + 1).min(m)).any(|a| {
                            (j.saturating_sub(1).max(1)..=(j + 1).min(m)).any(|b| inside[spec.spatial_offset(a, b)])
                        });
                        mask[spec.spatial_offset(i, j)] = near;
                    }
                }
                let sign = if inc.amplitude >= 0.0 { 1.0 } else { -1.0 };
                Region {
                    label: inc.label.clone(),
                    mask,
                    sign,
                    extreme_true: self.background + inc.amplitude,
                }
            })
            .collect()
    }

    pub fn test1() -> Self {
        Self {
            name: "test1".into(),
            background: 0.0,
            inclusions: vec![Inclusion {
                label: "bump".into(),
                shape: Shape::Bump {
                    center: (0.3, 0.0),
                    radius: 0.5,
                },
                amplitude: 1.0,
            }],
        }
    }

    /// `scaled` doubles the negative bump so its peak is `-2`.
    pub fn test2(scaled: bool) -> Self {
        Self {
            name: "test2".into(),
            background: 0.0,
            inclusions: vec![
                Inclusion {
                    label: "positive".into(),
                    shape: Shape::Bump {
                        center: (0.4, 0.4),
                        radius: 0.5,
                    },
                    amplitude: 1.0,
                },
                Inclusion {
                    label: "negative".into(),
                    shape: Shape::Bump {
                        center: (-0.4, -0.4),
                        radius: 0.5,
                    },
                    amplitude: if scaled { -2.0 } else { -1.0 },
                },
            ],
        }
    }

    pub fn test3() -> Self {
        Self {
            name: "test3".into(),
            background: 0.0,
            inclusions: vec![
                Inclusion {
                    label: "ellipse".into(),
                    shape: Shape::Ellipse {
                        center: (-0.45, 0.0),
                        wx: 5.0,
                        wy: 1.0 / 3.0,
                        level: 0.0625,
                    },
                    amplitude: 2.0,
                },
                Inclusion {
                    label: "disk".into(),
                    shape: Shape::disk((0.45, 0.0), 0.25),
                    amplitude: -2.0,
                },
            ],
        }
    }

    pub fn test4() -> Self {
        Self {
            name: "test4".into(),
            background: 0.0,
            inclusions: vec![Inclusion {
                label: "omega".into(),
                shape: letter(OMEGA_STROKES),
                amplitude: 1.0,
            }],
        }
    }

    pub fn test5() -> Self {
        Self {
            name: "test5".into(),
            background: 1.0,
            inclusions: vec![Inclusion {
                label: "sigma".into(),
                shape: letter(SIGMA_STROKES),
                amplitude: 2.0,
            }],
        }
    }

    pub fn test6() -> Self {
        Self {
            name: "test6".into(),
            background: 1.0,
            inclusions: vec![
                Inclusion {
                    label: "horizontal".into(),
                    shape: Shape::Rectangle {
                        center: (-0.3, 0.0),
                        sx: 1.0,
                        sy: 3.0,
                        half: 0.4,
                    },
                    amplitude: 4.0,
                },
                Inclusion {
                    label: "vertical".into(),
                    shape: Shape::Rectangle {
                        center: (0.5, 0.0),
                        sx: 6.0,
                        sy: 1.0,
                        half: 0.8,
                    },
                    amplitude: 4.0,
                },
            ],
        }
    }

    /// Constant `1 + 2` on the disk of radius 0.25 at the origin, 1 elsewhere.
    pub fn centered_disk_coefficient() -> Self {
        Self {
            name: "disk".into(),
            background: 1.0,
            inclusions: vec![Inclusion {
                label: "disk".into(),
                shape: Shape::disk((0.0, 0.0), 0.25),
                amplitude: 2.0,
            }],
        }
    }

    pub fn constant(value: f64) -> Self {
        Self {
            name: "constant".into(),
            background: value,
            inclusions: Vec::new(),
        }
    }

    /// Looks up `test1` .. `test6`.
    pub fn by_name(name: &str, test2_scaled: bool) -> Result<Self> {
        Ok(match name {
            "test1" => Self::test1(),
            "test2" => Self::test2(test2_scaled),
            "test3" => Self::test3(),
            "test4" => Self::test4(),
            "test5" => Self::test5(),
            "test6" => Self::test6(),
            other => return Err(Error::Config(format!("unknown phantom `{other}`"))),
        })
    }

    /// Tests 5 and 6 are coefficients; the rest are sources.
    pub fn is_coefficient(&self) -> bool {
        matches!(self.name.as_str(), "test5" | "test6")
    }
}

fn letter(text: &str) -> Shape {
    Shape::Strokes {
        polylines: parse_polylines(text).expect("bundled stroke file is well formed"),
        half_width: STROKE_HALF_WIDTH,
    }
}

pub fn eval_test1(x: f64, y: f64) -> f64 {
    let (dx, dy) = (x - 0.3, y);
    bump(dx * dx + dy * dy, 0.5)
}

pub fn eval_test2(x: f64, y: f64) -> f64 {
    Phantom::test2(true).eval(x, y)
}

pub fn eval_test3(x: f64, y: f64) -> f64 {
    if (x - 0.45).powi(2) + y * y < 0.0625 {
        -2.0
    } else if 5.0 * (x + 0.45).powi(2) + y * y / 3.0 < 0.0625 {
        2.0
    } else {
        0.0
    }
}

pub fn eval_test4(x: f64, y: f64) -> f64 {
    Phantom::test4().eval(x, y)
}

pub fn eval_test5(x: f64, y: f64) -> f64 {
    Phantom::test5().eval(x, y)
}

pub fn eval_test6(x: f64, y: f64) -> f64 {
    let horizontal = (x + 0.3).abs().max(3.0 * y.abs()) < 0.4;
    let vertical = (6.0 * (x - 0.5).abs()).max(y.abs()) < 0.8;
    if horizontal || vertical {
        5.0
    } else {
        1.0
    }
}
