//! Special functions and Grünwald–Letnikov fractional derivatives.
//!
//! Everything here is a pure function of its arguments.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A real, finite differentiation order.
///
/// Negative values are legal (fractional integrals) for oracle evaluation;
/// the trainer's order policies only ever produce nonnegative orders.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct FractionalOrder(f64);

impl FractionalOrder {
    pub const ZERO: FractionalOrder = FractionalOrder(0.0);
    pub const ONE: FractionalOrder = FractionalOrder(1.0);

    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() {
            Ok(FractionalOrder(value))
        } else {
            Err(Error::Domain(format!(
                "fractional order must be finite, got {value}"
            )))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    /// The order as a nonnegative integer, if it is one.
    pub fn as_integer(self) -> Option<u32> {
        if self.0 >= 0.0 && self.0.fract() == 0.0 && self.0 <= u32::MAX as f64 {
            Some(self.0 as u32)
        } else {
            None
        }
    }
}

impl TryFrom<f64> for FractionalOrder {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        FractionalOrder::new(value)
    }
}

impl From<FractionalOrder> for f64 {
    fn from(v: FractionalOrder) -> f64 {
        v.0
    }
}

impl fmt::Display for FractionalOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

const LANCZOS_G: f64 = 7.0;
#[allow(clippy::excessive_precision)]
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

// FACTORIAL[n] = n!, exact in f64 through 22!.
const FACTORIAL: [f64; 23] = [
    1.0,
    1.0,
    2.0,
    6.0,
    24.0,
    120.0,
    720.0,
    5040.0,
    40320.0,
    362880.0,
    3628800.0,
    39916800.0,
    479001600.0,
    6227020800.0,
    87178291200.0,
    1307674368000.0,
    20922789888000.0,
    355687428096000.0,
    6402373705728000.0,
    121645100408832000.0,
    2432902008176640000.0,
    51090942171709440000.0,
    1124000727777607680000.0,
];

fn is_pole(x: f64) -> bool {
    x <= 0.0 && x.fract() == 0.0
}

/// sin(πx) with the argument reduced to [-1, 1] first, so that values near
/// integers keep their relative precision.
fn sin_pi(x: f64) -> f64 {
    let r = x - 2.0 * (x / 2.0).round();
    (PI * r).sin()
}

fn lanczos(x: f64) -> f64 {
    // valid for x >= 0.5
    let z = x - 1.0;
    let mut acc = LANCZOS_COEF[0];
    for (k, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        acc += c / (z + k as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    (2.0 * PI).sqrt() * t.powf(z + 0.5) * (-t).exp() * acc
}

/// The gamma function Γ(x).
///
/// Lanczos approximation (g = 7, 9 terms) with the reflection formula
/// below 0.5; positive integers up to 23 come from an exact factorial table.
/// Non-positive integers are poles and yield a domain error.
pub fn gamma(x: f64) -> Result<f64> {
    if x.is_nan() {
        return Err(Error::Domain("gamma of NaN".into()));
    }
    if is_pole(x) {
        return Err(Error::Domain(format!("gamma has a pole at x = {x}")));
    }
    if x.fract() == 0.0 && x <= FACTORIAL.len() as f64 {
        return Ok(FACTORIAL[x as usize - 1]);
    }
    if x < 0.5 {
        Ok(PI / (sin_pi(x) * lanczos(1.0 - x)))
    } else {
        Ok(lanczos(x))
    }
}

/// 1/Γ(x), extended continuously by zero at the poles of Γ.
pub fn recip_gamma(x: f64) -> f64 {
    if is_pole(x) {
        return 0.0;
    }
    match gamma(x) {
        Ok(g) => 1.0 / g,
        Err(_) => f64::NAN,
    }
}

/// Generalized binomial coefficient C(v, n) = v(v−1)…(v−n+1)/n!.
///
/// Evaluated as a falling-factorial product, so integer `v` needs no special
/// casing: C(m, n) is exactly zero for integers 0 ≤ m < n.
pub fn frac_binomial(v: FractionalOrder, n: u32) -> f64 {
    let v = v.value();
    let mut acc = 1.0;
    for k in 0..n {
        let k = k as f64;
        acc *= (v - k) / (k + 1.0);
    }
    acc
}

/// `base^exponent` for a strictly positive base, as exp(exponent · ln base).
///
/// The base is a distance `parameter − lower_bound`; a non-positive base
/// means the parameter has reached its lower bound.
pub fn power_term(base: f64, exponent: f64) -> Result<f64> {
    if !(base > 0.0) {
        return Err(Error::Domain(format!(
            "parameter at or below its lower bound (distance {base})"
        )));
    }
    Ok((exponent * base.ln()).exp())
}

/// Partition of the interval [a, x] used by the Grünwald–Letnikov sum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GlGrid {
    lower: f64,
    point: f64,
    partitions: usize,
}

impl GlGrid {
    pub fn new(lower: f64, point: f64, partitions: usize) -> Result<Self> {
        if !(lower.is_finite() && point.is_finite()) {
            return Err(Error::Domain("grid endpoints must be finite".into()));
        }
        if !(point > lower) {
            return Err(Error::Domain(format!(
                "evaluation point {point} must exceed lower bound {lower}"
            )));
        }
        if partitions < 2 {
            return Err(Error::Domain(format!(
                "need at least 2 partitions, got {partitions}"
            )));
        }
        Ok(GlGrid {
            lower,
            point,
            partitions,
        })
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn point(&self) -> f64 {
        self.point
    }

    pub fn partitions(&self) -> usize {
        self.partitions
    }

    pub fn step(&self) -> f64 {
        (self.point - self.lower) / self.partitions as f64
    }
}

/// Numeric Grünwald–Letnikov derivative of order `v` at a finite partition
/// count:
///
/// h^(−v) · Σ_{k=0}^{N−1} c_k · f(x − k·h),  h = (x − a)/N,
///
/// with c_k = Γ(k−v)/(Γ(−v)Γ(k+1)) generated by the recurrence
/// c_0 = 1, c_k = c_{k−1}·(k−1−v)/k. Order 0 returns f(x) exactly; a
/// positive integer order n returns the n-th backward difference quotient
/// (the recurrence terminates after n+1 terms there).
pub fn gl_derivative_numeric<F>(f: F, grid: &GlGrid, v: FractionalOrder) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let x = grid.point;
    if v.value() == 0.0 {
        return Ok(f(x));
    }
    let h = grid.step();
    let terms = match v.as_integer() {
        Some(n) => (n as usize + 1).min(grid.partitions),
        None => grid.partitions,
    };
    let order = v.value();
    let mut coef = 1.0;
    let mut sum = 0.0;
    for k in 0..terms {
        if k > 0 {
            let kf = k as f64;
            coef *= (kf - 1.0 - order) / kf;
        }
        sum += coef * f(x - k as f64 * h);
    }
    let value = power_term(h, -order)? * sum;
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Numeric(format!(
            "Grünwald–Letnikov sum overflowed (order {order}, N = {})",
            grid.partitions
        )))
    }
}
