//! Parametric boundary curves and their trapezoidal discretizations.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::Vector2;

use crate::error::{Error, Result};

pub type Vec2 = Vector2<f64>;

/// A smooth, 2π-periodic, star-shaped closed curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Curve {
    /// `(cos t + 0.65 cos 2t - 0.65, 1.5 sin t)`
    Kite,
    /// `sqrt(3 cos^2 t + 1) (cos t, sin t)`
    Peanut,
    Circle {
        center: [f64; 2],
        radius: f64,
    },
}

impl Curve {
    pub fn circle(radius: f64) -> Self {
        Curve::Circle {
            center: [0.0, 0.0],
            radius,
        }
    }

    /// Point with respect to which every curve here is star-shaped.
    pub fn interior_point(&self) -> Vec2 {
        match *self {
            Curve::Kite => Vec2::new(-0.5, 0.0),
            Curve::Peanut => Vec2::zeros(),
            Curve::Circle { center, .. } => Vec2::new(center[0], center[1]),
        }
    }

    pub fn point(&self, t: f64) -> Vec2 {
        let t = t.rem_euclid(2.0 * PI);
        match *self {
            Curve::Kite => Vec2::new(t.cos() + 0.65 * (2.0 * t).cos() - 0.65, 1.5 * t.sin()),
            Curve::Peanut => {
                let c = t.cos();
                let r = (3.0 * c * c + 1.0).sqrt();
                Vec2::new(r * c, r * t.sin())
            }
            Curve::Circle { center, radius } => {
                Vec2::new(center[0] + radius * t.cos(), center[1] + radius * t.sin())
            }
        }
    }

    pub fn derivative(&self, t: f64) -> Vec2 {
        let t = t.rem_euclid(2.0 * PI);
        match *self {
            Curve::Kite => Vec2::new(-t.sin() - 1.3 * (2.0 * t).sin(), 1.5 * t.cos()),
            Curve::Peanut => {
                let (s, c) = t.sin_cos();
                let r = (3.0 * c * c + 1.0).sqrt();
                let dr = -3.0 * c * s / r;
                Vec2::new(dr * c - r * s, dr * s + r * c)
            }
            Curve::Circle { radius, .. } => Vec2::new(-radius * t.sin(), radius * t.cos()),
        }
    }

    pub fn second_derivative(&self, t: f64) -> Vec2 {
        let t = t.rem_euclid(2.0 * PI);
        match *self {
            Curve::Kite => Vec2::new(-t.cos() - 2.6 * (2.0 * t).cos(), -1.5 * t.sin()),
            Curve::Peanut => {
                // r^2 = 3 cos^2 t + 1  =>  r r' = -3 c s,  r'^2 + r r'' = -3 cos 2t
                let (s, c) = t.sin_cos();
                let r = (3.0 * c * c + 1.0).sqrt();
                let dr = -3.0 * c * s / r;
                let ddr = (-3.0 * (2.0 * t).cos() - dr * dr) / r;
                Vec2::new(
                    ddr * c - 2.0 * dr * s - r * c,
                    ddr * s + 2.0 * dr * c - r * s,
                )
            }
            Curve::Circle { radius, .. } => Vec2::new(-radius * t.cos(), -radius * t.sin()),
        }
    }

    /// Largest distance from the origin, sampled on a fine parameter grid.
    pub fn circumradius(&self) -> f64 {
        (0..4096)
            .map(|i| self.point(2.0 * PI * i as f64 / 4096.0).norm())
            .fold(0.0, f64::max)
    }

    /// Whether `p` lies inside the curve (even-odd rule on a fine polygon).
    pub fn contains(&self, p: Vec2) -> bool {
        let n = 2048;
        let poly: Vec<Vec2> = (0..n)
            .map(|i| self.point(2.0 * PI * i as f64 / n as f64))
            .collect();
        let mut inside = false;
        for i in 0..n {
            let a = poly[i];
            let b = poly[(i + 1) % n];
            if (a.y > p.y) != (b.y > p.y) {
                let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
                if p.x < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// Euclidean distance from `p` to the curve (dense sampling, then refinement).
    pub fn distance_to(&self, p: Vec2) -> f64 {
        let n = 2048;
        let h = 2.0 * PI / n as f64;
        let dist = |t: f64| (self.point(t) - p).norm();
        let (mut best_t, mut best) = (0.0, f64::INFINITY);
        for i in 0..n {
            let t = i as f64 * h;
            let d = dist(t);
            if d < best {
                best = d;
                best_t = t;
            }
        }
        // golden-section refinement on the bracketing interval
        let (mut a, mut b) = (best_t - h, best_t + h);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..80 {
            let c = b - g * (b - a);
            let d = a + g * (b - a);
            if dist(c) < dist(d) {
                b = d;
            } else {
                a = c;
            }
        }
        best.min(dist(0.5 * (a + b)))
    }
}

impl fmt::Display for Curve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Curve::Kite => write!(f, "kite"),
            Curve::Peanut => write!(f, "peanut"),
            Curve::Circle { center, radius } => {
                if center[0] == 0.0 && center[1] == 0.0 {
                    if *radius == 1.0 {
                        write!(f, "circle")
                    } else {
                        write!(f, "circle:{radius}")
                    }
                } else {
                    write!(f, "circle:{radius}@{},{}", center[0], center[1])
                }
            }
        }
    }
}

impl FromStr for Curve {
    type Err = Error;

    /// Accepts `kite`, `peanut`, `circle` (unit circle), `circle:R` and `circle:R@X,Y`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "kite" => return Ok(Curve::Kite),
            "peanut" => return Ok(Curve::Peanut),
            "circle" => return Ok(Curve::circle(1.0)),
            _ => {}
        }
        let bad = || {
            Error::config(format!(
                "unknown curve `{s}` (expected kite, peanut or circle[:R[@X,Y]])"
            ))
        };
        let rest = s.strip_prefix("circle:").ok_or_else(bad)?;
        let (r, c) = match rest.split_once('@') {
            Some((r, c)) => (r, Some(c)),
            None => (rest, None),
        };
        let radius: f64 = r.parse().map_err(|_| bad())?;
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(bad());
        }
        let center = match c {
            Some(c) => {
                let (x, y) = c.split_once(',').ok_or_else(bad)?;
                [x.parse().map_err(|_| bad())?, y.parse().map_err(|_| bad())?]
            }
            None => [0.0, 0.0],
        };
        Ok(Curve::Circle { center, radius })
    }
}

/// Trapezoidal discretization of a closed curve on `t_j = 2πj/n`.
#[derive(Debug, Clone)]
pub struct QuadratureBoundary {
    pub curve: Curve,
    pub params: Vec<f64>,
    pub points: Vec<Vec2>,
    /// Outward unit normals.
    pub normals: Vec<Vec2>,
    pub speeds: Vec<f64>,
    /// `(2π/n) |x'(t_j)|`
    pub weights: Vec<f64>,
    /// Second derivatives `x''(t_j)`, used for the diagonal of the double-layer kernel.
    pub accels: Vec<Vec2>,
}

impl QuadratureBoundary {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn length(&self) -> f64 {
        self.weights.iter().sum()
    }
}

pub fn discretize(curve: Curve, node_count: usize) -> Result<QuadratureBoundary> {
    if node_count < 8 || !node_count.is_multiple_of(2) {
        return Err(Error::config(format!(
            "quadrature node count must be even and >= 8, got {node_count}"
        )));
    }
    let h = 2.0 * PI / node_count as f64;
    let params: Vec<f64> = (0..node_count).map(|j| j as f64 * h).collect();
    let points: Vec<Vec2> = params.iter().map(|&t| curve.point(t)).collect();
    let derivs: Vec<Vec2> = params.iter().map(|&t| curve.derivative(t)).collect();
    let accels = params.iter().map(|&t| curve.second_derivative(t)).collect();
    let speeds: Vec<f64> = derivs.iter().map(|d| d.norm()).collect();
    let mut normals: Vec<Vec2> = derivs
        .iter()
        .zip(&speeds)
        .map(|(d, &s)| Vec2::new(d.y, -d.x) / s)
        .collect();

    // (x2', -x1') is outward for counterclockwise curves; flip otherwise.
    let c = curve.interior_point();
    let flux: f64 = points
        .iter()
        .zip(&normals)
        .map(|(p, n)| (p - c).dot(n))
        .sum();
    if flux < 0.0 {
        for n in normals.iter_mut() {
            *n = -*n;
        }
    }
    let weights = speeds.iter().map(|s| h * s).collect();
    Ok(QuadratureBoundary {
        curve,
        params,
        points,
        normals,
        speeds,
        weights,
        accels,
    })
}
