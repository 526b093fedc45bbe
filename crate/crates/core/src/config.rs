//! Run configuration: defaults, flat `key = value` files and flag overrides.

use std::f64::consts::PI;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geometry::Curve;
use crate::msr::DirectionGrid;
use crate::recovery::{Method, DEFAULT_ALPHA, DEFAULT_NODES, DEFAULT_RADIUS, DEFAULT_STEP};

/// Measured observation aperture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Aperture {
    /// Fraction of the full circle, in `(0, 1]`.
    Fraction(f64),
    /// Number of leading columns.
    Columns(usize),
}

impl Aperture {
    pub fn columns(&self, grid: &DirectionGrid) -> Result<usize> {
        match *self {
            Aperture::Fraction(f) => grid.columns_for_fraction(f),
            Aperture::Columns(l) => Ok(l),
        }
    }
}

impl fmt::Display for Aperture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Aperture::Fraction(x) => write!(f, "{x}"),
            Aperture::Columns(l) => write!(f, "l={l}"),
        }
    }
}

/// Parses `pi`, `pi/2`, `2pi/3`, `2*pi/3`, `π/2` or a plain number (radians).
fn parse_angle(s: &str) -> Option<f64> {
    let s: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let s = s.replace('π', "pi");
    let Some((coef, rest)) = s.split_once("pi") else {
        return s.parse().ok();
    };
    let coef = coef.trim_end_matches('*');
    let c: f64 = if coef.is_empty() {
        1.0
    } else {
        coef.parse().ok()?
    };
    let d: f64 = match rest.strip_prefix('/') {
        Some(d) => d.parse().ok()?,
        None if rest.is_empty() => 1.0,
        None => return None,
    };
    Some(c * PI / d)
}

impl FromStr for Aperture {
    type Err = Error;

    /// `0.25`, `l=75`, or an angular interval such as `(0,pi/2)`.
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let bad = || {
            Error::config(format!(
                "cannot parse aperture `{s}` (use a fraction, l=N or (0,pi/2))"
            ))
        };
        if let Some(l) = t.strip_prefix("l=") {
            let l: usize = l.trim().parse().map_err(|_| bad())?;
            if l == 0 {
                return Err(bad());
            }
            return Ok(Aperture::Columns(l));
        }
        if let Some(inner) = t.strip_prefix('(').and_then(|r| r.strip_suffix(')')) {
            let (a, b) = inner.split_once(',').ok_or_else(bad)?;
            let (a, b) = (
                parse_angle(a).ok_or_else(bad)?,
                parse_angle(b).ok_or_else(bad)?,
            );
            if a != 0.0 || !(b > 0.0 && b <= 2.0 * PI + 1e-12) {
                return Err(Error::config(format!(
                    "aperture interval must start at 0 and end in (0, 2π], got `{s}`"
                )));
            }
            return Ok(Aperture::Fraction((b / (2.0 * PI)).min(1.0)));
        }
        let f: f64 = t.parse().map_err(|_| bad())?;
        if !(f > 0.0 && f <= 1.0) {
            return Err(Error::config(format!(
                "aperture fraction must lie in (0, 1], got {f}"
            )));
        }
        Ok(Aperture::Fraction(f))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Indicator {
    Dsm,
    Fm,
}

impl FromStr for Indicator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "dsm" => Ok(Indicator::Dsm),
            "fm" => Ok(Indicator::Fm),
            _ => Err(Error::config(format!(
                "unknown indicator `{s}` (expected dsm or fm)"
            ))),
        }
    }
}

impl fmt::Display for Indicator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Indicator::Dsm => "dsm",
            Indicator::Fm => "fm",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub obstacle: Curve,
    pub k: f64,
    pub m: usize,
    pub nq: usize,
    pub aperture: Aperture,
    pub delta: f64,
    pub seed: u64,
    pub method: Method,
    pub t: usize,
    pub alpha: f64,
    pub radius: f64,
    pub grid: (usize, usize),
    pub bounds: [f64; 4],
    pub indicator: Indicator,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            obstacle: Curve::Kite,
            k: 6.0,
            m: 150,
            nq: DEFAULT_NODES,
            aperture: Aperture::Fraction(0.25),
            delta: 0.05,
            seed: 1,
            method: Method::Mgf,
            t: DEFAULT_STEP,
            alpha: DEFAULT_ALPHA,
            radius: DEFAULT_RADIUS,
            grid: (121, 121),
            bounds: [-6.0, 6.0, -6.0, 6.0],
            indicator: Indicator::Dsm,
            out: PathBuf::from("out"),
        }
    }
}

/// Keys accepted in config files; each is also a long flag.
pub const KEYS: &[&str] = &[
    "obstacle",
    "k",
    "m",
    "nq",
    "aperture",
    "delta",
    "seed",
    "method",
    "t",
    "alpha",
    "radius",
    "grid",
    "bounds",
    "indicator",
    "out",
];

fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::config(format!("invalid value `{value}` for `{key}`")))
}

impl RunConfig {
    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "obstacle" => self.obstacle = v.parse()?,
            "k" => self.k = num(key, v)?,
            "m" => self.m = num(key, v)?,
            "nq" => self.nq = num(key, v)?,
            "aperture" => self.aperture = v.parse()?,
            "delta" => self.delta = num(key, v)?,
            "seed" => self.seed = num(key, v)?,
            "method" => self.method = v.parse()?,
            "t" => self.t = num(key, v)?,
            "alpha" => self.alpha = num(key, v)?,
            "radius" => self.radius = num(key, v)?,
            "grid" => {
                let (a, b) = v.split_once(['x', 'X']).ok_or_else(|| {
                    Error::config(format!("grid must look like 121x121, got `{v}`"))
                })?;
                self.grid = (num(key, a)?, num(key, b)?);
            }
            "bounds" => {
                let parts: Vec<f64> = v.split(',').map(|p| num(key, p)).collect::<Result<_>>()?;
                let b: [f64; 4] = parts.try_into().map_err(|_| {
                    Error::config(format!(
                        "bounds needs four numbers x_min,x_max,y_min,y_max, got `{v}`"
                    ))
                })?;
                self.bounds = b;
            }
            "indicator" => self.indicator = v.parse()?,
            "out" => self.out = PathBuf::from(v),
            _ => return Err(Error::config(format!("unknown configuration key `{key}`"))),
        }
        Ok(())
    }

    /// Applies a flat `key = value` document (`#` starts a comment).
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {}: expected `key = value`", n + 1)))?;
            self.set(key.trim(), value).map_err(|e| match e {
                Error::Config(msg) => Error::config(format!("line {}: {msg}", n + 1)),
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        self.apply_text(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(format!("`{name}` must be positive, got {v}")))
            }
        };
        positive("k", self.k)?;
        positive("alpha", self.alpha)?;
        positive("radius", self.radius)?;
        if self.m == 0 {
            return Err(Error::config("`m` must be >= 1"));
        }
        if self.nq < 8 || !self.nq.is_multiple_of(2) {
            return Err(Error::config(format!(
                "`nq` must be even and >= 8, got {}",
                self.nq
            )));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(Error::config(format!(
                "`delta` must be >= 0, got {}",
                self.delta
            )));
        }
        if self.t == 0 {
            return Err(Error::config("`t` must be >= 1"));
        }
        if self.grid.0 == 0 || self.grid.1 == 0 {
            return Err(Error::config("grid dimensions must be positive"));
        }
        let [a, b, c, d] = self.bounds;
        if !(a < b && c < d) {
            return Err(Error::config(format!(
                "bounds must satisfy x_min < x_max, y_min < y_max: {:?}",
                self.bounds
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_mirror_the_experiments() {
        let c = RunConfig::default();
        assert_eq!(
            (c.k, c.m, c.nq, c.delta, c.radius, c.alpha),
            (6.0, 150, 256, 0.05, 5.0, 1e-2)
        );
        assert_eq!(c.grid, (121, 121));
        assert_eq!(c.bounds, [-6.0, 6.0, -6.0, 6.0]);
        c.validate().unwrap();
    }

    #[test]
    fn aperture_keywords() {
        let g = DirectionGrid::new(150).unwrap();
        let cols = |s: &str| s.parse::<Aperture>().unwrap().columns(&g).unwrap();
        assert_eq!(cols("(0,pi/2)"), 75);
        assert_eq!(cols("(0, 2pi/3)"), 100);
        assert_eq!(cols("(0,2*pi/3)"), 100);
        assert_eq!(cols("(0,π)"), 150);
        assert_eq!(cols("0.25"), 75);
        assert_eq!(cols("l=42"), 42);
        assert!("(1,pi)".parse::<Aperture>().is_err());
        assert!("l=0".parse::<Aperture>().is_err());
        assert!("1.5".parse::<Aperture>().is_err());
        assert!("wide".parse::<Aperture>().is_err());
    }

    #[test]
    fn file_then_override() {
        let mut c = RunConfig::default();
        c.apply_text("# experiment\nobstacle = peanut\nk = 3.5\n\ngrid = 41x31  # small\nbounds = -2,2,-1,1\nmethod = mslp\n")
            .unwrap();
        assert_eq!(c.obstacle, Curve::Peanut);
        assert_eq!(c.k, 3.5);
        assert_eq!(c.grid, (41, 31));
        assert_eq!(c.bounds, [-2.0, 2.0, -1.0, 1.0]);
        assert_eq!(c.method, Method::Mslp);
        c.set("k", "6").unwrap();
        assert_eq!(c.k, 6.0);
    }

    #[test]
    fn unknown_keys_fail_loudly() {
        let mut c = RunConfig::default();
        assert!(c.apply_text("wavenumber = 6").is_err());
        assert!(c.apply_text("k 6").is_err());
        assert!(c.set("obstacle", "triangle").is_err());
        assert!(c.set("bounds", "1,2,3").is_err());
    }

    #[test]
    fn validation() {
        let mut c = RunConfig::default();
        c.nq = 33;
        assert!(c.validate().is_err());
        let mut c = RunConfig::default();
        c.k = -1.0;
        assert!(c.validate().is_err());
        let mut c = RunConfig::default();
        c.bounds = [1.0, -1.0, 0.0, 1.0];
        assert!(c.validate().is_err());
    }
}
