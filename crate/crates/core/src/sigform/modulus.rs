//! Continuity moduli as monotone piecewise-linear maps on the positive reals.
//!
//! A modulus is stored as a list of breakpoints `(x, y)` with `x` strictly
//! increasing and `y` nondecreasing and positive. It passes through the
//! origin before the first breakpoint and continues with `tail_slope` after
//! the last one, so `id` is "no breakpoints, slope 1" and `z/c` is "no
//! breakpoints, slope 1/c".

use std::fmt;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::real::{format_rational, rational_to_f64, Rational};
use crate::Error;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Modulus {
    points: Vec<(Rational, Rational)>,
    tail_slope: Rational,
}

impl Modulus {
    pub fn id() -> Self {
        Modulus {
            points: Vec::new(),
            tail_slope: Rational::one(),
        }
    }

    /// `z ↦ z / c`.
    pub fn scale(c: Rational) -> Result<Self, Error> {
        if !c.is_positive() {
            return Err(Error::InvalidModulus(format!(
                "scale factor must be positive, got {}",
                format_rational(&c)
            )));
        }
        Ok(Modulus {
            points: Vec::new(),
            tail_slope: c.recip(),
        })
    }

    /// Breakpoint form with a flat tail after the last point.
    pub fn from_breakpoints(points: Vec<(Rational, Rational)>) -> Result<Self, Error> {
        Self::with_tail(points, Rational::zero())
    }

    pub fn with_tail(points: Vec<(Rational, Rational)>, tail_slope: Rational) -> Result<Self, Error> {
        let mut prev_x = Rational::zero();
        let mut prev_y = Rational::zero();
        for (x, y) in points.iter() {
            if *x <= prev_x {
                return Err(Error::InvalidModulus(
                    "breakpoint abscissae must be positive and strictly increasing".into(),
                ));
            }
            if !y.is_positive() || *y < prev_y {
                return Err(Error::InvalidModulus("modulus values must be positive and nondecreasing".into()));
            }
            prev_x = *x;
            prev_y = *y;
        }
        if tail_slope.is_negative() {
            return Err(Error::InvalidModulus("tail slope must be nonnegative".into()));
        }
        if points.is_empty() && tail_slope.is_zero() {
            return Err(Error::InvalidModulus("modulus must be positive on positive inputs".into()));
        }
        Ok(Modulus { points, tail_slope }.simplified())
    }

    pub fn is_id(&self) -> bool {
        self.points.is_empty() && self.tail_slope.is_one()
    }

    /// `Some(c)` when the modulus is exactly `z ↦ z / c`.
    pub fn as_scale(&self) -> Option<Rational> {
        if self.points.is_empty() {
            Some(self.tail_slope.recip())
        } else {
            None
        }
    }

    pub fn breakpoints(&self) -> &[(Rational, Rational)] {
        &self.points
    }

    pub fn tail_slope(&self) -> Rational {
        self.tail_slope
    }

    pub fn apply(&self, x: Rational) -> Rational {
        if x <= Rational::zero() {
            return Rational::zero();
        }
        let mut prev = (Rational::zero(), Rational::zero());
        for &(px, py) in &self.points {
            if x <= px {
                return prev.1 + (py - prev.1) * (x - prev.0) / (px - prev.0);
            }
            prev = (px, py);
        }
        prev.1 + self.tail_slope * (x - prev.0)
    }

    pub fn apply_f64(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let mut prev = (0.0, 0.0);
        for (px, py) in &self.points {
            let (px, py) = (rational_to_f64(px), rational_to_f64(py));
            if x <= px {
                return prev.1 + (py - prev.1) * (x - prev.0) / (px - prev.0);
            }
            prev = (px, py);
        }
        prev.1 + rational_to_f64(&self.tail_slope) * (x - prev.0)
    }

    /// Right slope at `x` (the slope of the piece starting at `x`).
    fn slope_after(&self, x: Rational) -> Rational {
        let mut prev = (Rational::zero(), Rational::zero());
        for &(px, py) in &self.points {
            if x < px {
                return (py - prev.1) / (px - prev.0);
            }
            prev = (px, py);
        }
        self.tail_slope
    }

    fn xs(&self) -> impl Iterator<Item = Rational> + '_ {
        self.points.iter().map(|p| p.0)
    }

    fn from_samples(mut xs: Vec<Rational>, f: impl Fn(Rational) -> Rational, tail_slope: Rational) -> Modulus {
        xs.retain(|x| x.is_positive());
        xs.sort();
        xs.dedup();
        let points = xs.into_iter().map(|x| (x, f(x))).collect();
        Modulus { points, tail_slope }.simplified()
    }

    /// Drops breakpoints that lie on the line through their neighbours.
    fn simplified(mut self) -> Modulus {
        let mut i = 0;
        while i < self.points.len() {
            let (x, y) = self.points[i];
            let (x0, y0) = if i == 0 {
                (Rational::zero(), Rational::zero())
            } else {
                self.points[i - 1]
            };
            let left = (y - y0) / (x - x0);
            let right = if i + 1 < self.points.len() {
                let (x1, y1) = self.points[i + 1];
                (y1 - y) / (x1 - x)
            } else {
                self.tail_slope
            };
            if left == right {
                self.points.remove(i);
                i = i.saturating_sub(1);
            } else {
                i += 1;
            }
        }
        self
    }

    /// Pointwise minimum.
    pub fn min(&self, other: &Modulus) -> Modulus {
        let mut xs: Vec<Rational> = self.xs().chain(other.xs()).collect();
        xs.push(Rational::zero());
        xs.sort();
        xs.dedup();
        let mut crossings = Vec::new();
        for w in xs.windows(2) {
            let (a, b) = (w[0], w[1]);
            let (fa, fb) = (self.apply(a), self.apply(b));
            let (ga, gb) = (other.apply(a), other.apply(b));
            let (da, db) = (fa - ga, fb - gb);
            if (da.is_positive() && db.is_negative()) || (da.is_negative() && db.is_positive()) {
                crossings.push(a + (b - a) * da / (da - db));
            }
        }
        let last = *xs.last().expect("origin always present");
        let (fl, gl) = (self.apply(last), other.apply(last));
        let (sf, sg) = (self.slope_after(last), other.slope_after(last));
        if sf != sg {
            let t = (gl - fl) / (sf - sg);
            if t.is_positive() {
                crossings.push(last + t);
            }
        }
        let far = xs.iter().chain(crossings.iter()).copied().max().unwrap_or_else(Rational::zero);
        let (ff, gf) = (self.apply(far), other.apply(far));
        let (sf, sg) = (self.slope_after(far), other.slope_after(far));
        let tail = if ff < gf || (ff == gf && sf <= sg) { sf } else { sg };
        xs.extend(crossings);
        Modulus::from_samples(xs, |x| self.apply(x).min(other.apply(x)), tail)
    }

    /// `x ↦ self(inner(x))`.
    pub fn compose(&self, inner: &Modulus) -> Modulus {
        let mut xs: Vec<Rational> = inner.xs().collect();
        xs.push(Rational::zero());
        xs.sort();
        xs.dedup();
        let mut preimages = Vec::new();
        for p in self.xs() {
            // inner is continuous and nondecreasing from 0; find one x with inner(x) = p
            let mut found = false;
            for w in xs.windows(2) {
                let (a, b) = (w[0], w[1]);
                let (ia, ib) = (inner.apply(a), inner.apply(b));
                if ia < p && p <= ib {
                    preimages.push(a + (b - a) * (p - ia) / (ib - ia));
                    found = true;
                    break;
                }
            }
            if !found {
                let last = *xs.last().expect("origin always present");
                let il = inner.apply(last);
                if il < p && inner.tail_slope.is_positive() {
                    preimages.push(last + (p - il) / inner.tail_slope);
                }
            }
        }
        xs.extend(preimages);
        let far = xs.iter().copied().max().unwrap_or_else(Rational::zero);
        let tail = self.slope_after(inner.apply(far)) * inner.slope_after(far);
        Modulus::from_samples(xs, |x| self.apply(inner.apply(x)), tail)
    }

    /// `x ↦ self(x / p)`, the modulus to use when `p` occurrences share a budget.
    pub fn split(&self, p: usize) -> Modulus {
        if p <= 1 {
            return self.clone();
        }
        let divide = Modulus {
            points: Vec::new(),
            tail_slope: Rational::new(1, p as i64),
        };
        self.compose(&divide)
    }
}

impl fmt::Display for Modulus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_id() {
            return f.write_str("id");
        }
        if let Some(c) = self.as_scale() {
            return write!(f, "z/{}", format_rational(&c));
        }
        f.write_str("pl[")?;
        for (i, (x, y)) in self.points.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "({}, {})", format_rational(x), format_rational(y))?;
        }
        write!(f, "; tail {}]", format_rational(&self.tail_slope))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ModulusRepr {
    Tag(String),
    Scale {
        scale: RationalText,
    },
    Breakpoints {
        breakpoints: Vec<(RationalText, RationalText)>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tail_slope: Option<RationalText>,
    },
}

/// Rational accepted from JSON as a number, or as text like `"3/2"`.
#[derive(Clone, Copy, Debug)]
pub struct RationalText(pub Rational);

impl Serialize for RationalText {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0.is_integer() {
            s.serialize_i64(self.0.to_integer())
        } else {
            s.serialize_str(&format_rational(&self.0))
        }
    }
}

impl<'de> Deserialize<'de> for RationalText {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = serde_json::Value::deserialize(d)?;
        let text = match &v {
            serde_json::Value::Number(n) => n.to_string(),
            serde_json::Value::String(s) => s.clone(),
            _ => return Err(serde::de::Error::custom("expected a rational number")),
        };
        crate::real::parse_rational(&text)
            .map(RationalText)
            .ok_or_else(|| serde::de::Error::custom(format!("not an exact rational: {text}")))
    }
}

impl Serialize for Modulus {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let repr = if self.is_id() {
            ModulusRepr::Tag("id".into())
        } else if let Some(c) = self.as_scale() {
            ModulusRepr::Scale { scale: RationalText(c) }
        } else {
            ModulusRepr::Breakpoints {
                breakpoints: self.points.iter().map(|&(x, y)| (RationalText(x), RationalText(y))).collect(),
                tail_slope: (!self.tail_slope.is_zero()).then_some(RationalText(self.tail_slope)),
            }
        };
        repr.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Modulus {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error as _;
        match ModulusRepr::deserialize(d)? {
            ModulusRepr::Tag(t) if t == "id" => Ok(Modulus::id()),
            ModulusRepr::Tag(t) => Err(D::Error::custom(format!("unknown modulus tag `{t}`"))),
            ModulusRepr::Scale { scale } => Modulus::scale(scale.0).map_err(D::Error::custom),
            ModulusRepr::Breakpoints { breakpoints, tail_slope } => Modulus::with_tail(
                breakpoints.into_iter().map(|(x, y)| (x.0, y.0)).collect(),
                tail_slope.map(|t| t.0).unwrap_or_else(Rational::zero),
            )
            .map_err(D::Error::custom),
        }
    }
}
