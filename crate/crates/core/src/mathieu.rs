//! Stability of the one-dimensional Mathieu equation
//!
//! ```text
//! q'' + (U + 2V cos 2t) q = 0
//! ```
//!
//! Two independent classifiers are provided. The primary one evaluates the
//! truncated Hill determinant `Δ(0)` and the characteristic exponent `w` from
//!
//! ```text
//! cos(π w) = 1 − Δ(0) (1 − cos π√U)
//! ```
//!
//! with `√U` taken as a complex square root, so that `cos π√U = cosh π√|U|`
//! for `U < 0`. Solutions are bounded exactly when this right-hand side lies
//! in `[-1, 1]`. The secondary classifier integrates two fundamental solutions
//! over one drive period and inspects the monodromy trace.

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::{Error, Result};

/// Default truncation order `N`; the determinant has `2N + 1` rows.
pub const DEFAULT_TRUNCATION: usize = 25;
/// Half-width of the band around each pole `U = r²` in which the Hill
/// determinant is not evaluated.
pub const POLE_TOL: f64 = 1e-4;
/// Slack on `|cos(πw)| ≤ 1` (and `|trace| ≤ 2`) that still counts as stable.
pub const STABILITY_TOL: f64 = 1e-9;
/// RK4 steps per drive period used by the Floquet classifier.
pub const DEFAULT_FLOQUET_STEPS: usize = 2048;
/// Default upper end of the boundary-curve tabulation.
pub const DEFAULT_V_MAX: f64 = 2.0;
/// Default number of tabulation knots, uniform on `[0, V_max]`.
pub const DEFAULT_KNOTS: usize = 400;
/// Bisection resolution in `U` for boundary location.
pub const BOUNDARY_RESOLUTION: f64 = 1e-6;

// Below this V the boundary curves are evaluated from their power series; the
// a1/b1 tongue is then narrower than the stability tolerance can resolve.
const SERIES_V_LIMIT: f64 = 1e-3;

/// A point `(U, V)` of the Mathieu parameter plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MathieuParams {
    /// Static coefficient.
    pub u: f64,
    /// RF coefficient.
    pub v: f64,
}

impl MathieuParams {
    pub fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityResult {
    pub stable: bool,
    /// Characteristic exponent (principal branch of `acos(cos_arg)/π`,
    /// except at `V = 0` where `w = √U`).
    pub w: Complex64,
    /// `Δ(0)`, or `None` when the point fell in a pole band and the verdict
    /// came from the Floquet classifier.
    pub hill_det: Option<f64>,
    /// `cos(πw)`. Taken from half the monodromy trace inside pole bands.
    pub cos_arg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FloquetResult {
    pub monodromy_trace: f64,
    pub stable: bool,
}

/// Determinant of the `(2N+1)`-row truncation of the Hill matrix at `w = 0`.
///
/// Row `r` (even, `|r| ≤ 2N`) has unit diagonal and both off-diagonal entries
/// equal to `ζ_r = V / (r² − U)`; the determinant follows from the standard
/// three-term recurrence for tridiagonal matrices, times a correction for the
/// rows beyond the truncation.
pub fn hill_determinant(p: MathieuParams, truncation: usize) -> Result<f64> {
    if truncation < 5 {
        return Err(Error::InvalidArgument(format!(
            "truncation order must be at least 5, got {truncation}"
        )));
    }
    if !p.u.is_finite() || !p.v.is_finite() {
        return Err(Error::InvalidArgument("non-finite Mathieu parameters".into()));
    }
    let n = truncation as i64;
    for k in 0..=n {
        let pole = (4 * k * k) as f64;
        if (p.u - pole).abs() < POLE_TOL {
            return Err(Error::PoleProximity { u: p.u, pole, tol: POLE_TOL });
        }
    }

    let zeta = |r: i64| p.v / ((r * r) as f64 - p.u);
    let mut prev = 1.0; // D_{k-2}
    let mut cur = 1.0; // D_{k-1}
    let mut zeta_prev = 0.0;
    for i in -n..=n {
        let z = zeta(2 * i);
        let next = cur - zeta_prev * z * prev;
        prev = cur;
        cur = next;
        zeta_prev = z;
    }
    Ok(cur * truncation_tail(p, n))
}

/// Rows beyond the truncation multiply the determinant by approximately
/// `Π_{k>N} (1 − ζ_{2k−2} ζ_{2k})²` (both ends); without this factor the
/// truncated determinant converges only like `N⁻³`. The product is summed
/// explicitly for 200 further rows and closed with its asymptotic integral.
fn truncation_tail(p: MathieuParams, n: i64) -> f64 {
    const EXTRA: i64 = 200;
    if p.v == 0.0 {
        return 1.0;
    }
    let v2 = p.v * p.v;
    let mut log = 0.0;
    for k in n + 1..=n + EXTRA {
        let (a, b) = ((4 * k * k) as f64 - p.u, (4 * (k - 1) * (k - 1)) as f64 - p.u);
        log += (-v2 / (a * b)).ln_1p();
    }
    let m = (n + EXTRA) as f64 + 0.5;
    log -= v2 / 16.0 * (1.0 / (3.0 * m.powi(3)) + 0.5 / m.powi(4));
    (2.0 * log).exp()
}

/// Stability verdict and characteristic exponent at `p`.
///
/// Inside a pole band the Hill route is ill-conditioned; the verdict then
/// comes from [`floquet_stable`] and `hill_det` is `None`.
pub fn characteristic_exponent(p: MathieuParams) -> StabilityResult {
    let v = p.v.abs();
    let sqrt_u = Complex64::new(p.u, 0.0).sqrt();

    if v == 0.0 {
        let cos_arg = (sqrt_u * PI).cos().re;
        // A free particle (U = 0) drifts linearly, so only U > 0 is bounded.
        return StabilityResult { stable: p.u > 0.0, w: sqrt_u, hill_det: Some(1.0), cos_arg };
    }

    match hill_determinant(MathieuParams::new(p.u, v), DEFAULT_TRUNCATION) {
        Ok(det) => {
            let cos_arg = 1.0 - det * (1.0 - (sqrt_u * PI).cos().re);
            StabilityResult {
                stable: cos_in_band(cos_arg),
                w: exponent_from_cos(cos_arg),
                hill_det: Some(det),
                cos_arg,
            }
        }
        Err(_) => {
            let fl = floquet_stable(MathieuParams::new(p.u, v), DEFAULT_FLOQUET_STEPS);
            let cos_arg = 0.5 * fl.monodromy_trace;
            StabilityResult {
                stable: fl.stable,
                w: exponent_from_cos(cos_arg),
                hill_det: None,
                cos_arg,
            }
        }
    }
}

/// Shorthand for `characteristic_exponent(p).stable`.
pub fn is_stable(u: f64, v: f64) -> bool {
    characteristic_exponent(MathieuParams::new(u, v)).stable
}

fn cos_in_band(c: f64) -> bool {
    c.is_finite() && (-1.0 - STABILITY_TOL..=1.0 + STABILITY_TOL).contains(&c)
}

fn exponent_from_cos(c: f64) -> Complex64 {
    let w = Complex64::new(c, 0.0).acos() / PI;
    if cos_in_band(c) {
        Complex64::new(w.re, 0.0)
    } else {
        w
    }
}

/// Monodromy-trace stability test over one drive period `[0, π]`.
///
/// Step counts below 64 are raised to 64.
pub fn floquet_stable(p: MathieuParams, steps: usize) -> FloquetResult {
    let steps = steps.max(64);
    let h = PI / steps as f64;
    let accel = |t: f64, q: f64| -(p.u + 2.0 * p.v * (2.0 * t).cos()) * q;

    // Two solutions advanced together; state is (q, q') for each.
    let mut a = [1.0, 0.0];
    let mut b = [0.0, 1.0];
    for i in 0..steps {
        let t = i as f64 * h;
        a = rk4_linear(a, t, h, &accel);
        b = rk4_linear(b, t, h, &accel);
    }
    let trace = a[0] + b[1];
    FloquetResult {
        monodromy_trace: trace,
        stable: trace.is_finite() && trace.abs() <= 2.0 + STABILITY_TOL,
    }
}

fn rk4_linear(s: [f64; 2], t: f64, h: f64, accel: &impl Fn(f64, f64) -> f64) -> [f64; 2] {
    let f = |t: f64, s: [f64; 2]| [s[1], accel(t, s[0])];
    let k1 = f(t, s);
    let k2 = f(t + 0.5 * h, [s[0] + 0.5 * h * k1[0], s[1] + 0.5 * h * k1[1]]);
    let k3 = f(t + 0.5 * h, [s[0] + 0.5 * h * k2[0], s[1] + 0.5 * h * k2[1]]);
    let k4 = f(t + h, [s[0] + h * k3[0], s[1] + h * k3[1]]);
    [
        s[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        s[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
    ]
}

/// The three boundary curves of the stable set that matter for junctions.
///
/// `a0` is the lower edge of the first stability band; `b1` (upper edge of
/// the first band) and `a1` (lower edge of the second band) both start at
/// `U = 1` and are labelled so that `b1 ≤ a1` for `V ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Curve {
    A0,
    A1,
    B1,
}

impl Curve {
    pub const ALL: [Curve; 3] = [Curve::A0, Curve::A1, Curve::B1];

    pub fn name(self) -> &'static str {
        match self {
            Curve::A0 => "a0",
            Curve::A1 => "a1",
            Curve::B1 => "b1",
        }
    }
}

impl std::str::FromStr for Curve {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "a0" => Ok(Curve::A0),
            "a1" => Ok(Curve::A1),
            "b1" => Ok(Curve::B1),
            other => Err(Error::InvalidArgument(format!("unknown curve {other:?}"))),
        }
    }
}

/// Locates `curve(V)` by bisection on stability verdicts along `U`.
pub fn boundary_curve(curve: Curve, v: f64) -> Result<f64> {
    boundary_curve_in(curve, v, DEFAULT_V_MAX)
}

fn boundary_curve_in(curve: Curve, v: f64, v_max: f64) -> Result<f64> {
    if !(0.0..=v_max).contains(&v) {
        return Err(Error::OutOfTabulation { v, v_max });
    }
    if v < SERIES_V_LIMIT {
        return Ok(boundary_series(curve, v));
    }
    let stable = |u: f64| is_stable(u, v);
    let u = match curve {
        Curve::A0 | Curve::B1 => {
            // Walk down from U = 1 (inside the a1/b1 tongue) to the first
            // stable point; it lies between a0 and b1.
            let mut inside = 1.0 - 0.5 * SERIES_V_LIMIT;
            while !stable(inside) {
                inside -= 0.01;
                if inside < -2.0 * v - 2.0 {
                    return Err(Error::InvalidArgument(format!(
                        "no first stability band found at V = {v}"
                    )));
                }
            }
            match curve {
                Curve::A0 => bisect(-2.0 * v - 2.0, inside, |u| !stable(u)),
                _ => bisect(inside, 1.0, |u| stable(u)),
            }
        }
        Curve::A1 => {
            let mut above = 1.01;
            while !stable(above) {
                above += 0.01;
                if above > 4.0 {
                    return Err(Error::InvalidArgument(format!(
                        "no second stability band found at V = {v}"
                    )));
                }
            }
            bisect(1.0, above, |u| !stable(u))
        }
    };
    Ok(u)
}

/// Bisection for the transition between `lo` (where `below(lo)` holds) and
/// `hi` (where it does not).
fn bisect(mut lo: f64, mut hi: f64, below: impl Fn(f64) -> bool) -> f64 {
    while hi - lo > 0.1 * BOUNDARY_RESOLUTION {
        let mid = 0.5 * (lo + hi);
        if below(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Small-`V` power series; truncation error is `O(V⁴)`.
fn boundary_series(curve: Curve, v: f64) -> f64 {
    let v2 = v * v;
    match curve {
        Curve::A0 => -0.5 * v2 + 7.0 / 128.0 * v2 * v2,
        Curve::A1 => 1.0 + v - v2 / 8.0 - v2 * v / 64.0,
        Curve::B1 => 1.0 - v - v2 / 8.0 + v2 * v / 64.0,
    }
}

/// Boundary curves tabulated on uniform knots with linear interpolation.
#[derive(Debug, Clone)]
pub struct BoundaryCurves {
    v_max: f64,
    knots: Vec<f64>,
    a0: Vec<f64>,
    a1: Vec<f64>,
    b1: Vec<f64>,
    a0_slope: Vec<f64>,
}

impl BoundaryCurves {
    pub fn tabulate(v_max: f64, knots: usize) -> Result<Self> {
        if !(v_max > 0.0) || knots < 3 {
            return Err(Error::InvalidArgument("tabulation needs V_max > 0 and 3+ knots".into()));
        }
        let step = v_max / (knots - 1) as f64;
        let vs: Vec<f64> = (0..knots).map(|i| i as f64 * step).collect();
        let rows = vs
            .par_iter()
            .map(|&v| {
                Ok([
                    boundary_curve_in(Curve::A0, v, v_max)?,
                    boundary_curve_in(Curve::A1, v, v_max)?,
                    boundary_curve_in(Curve::B1, v, v_max)?,
                ])
            })
            .collect::<Result<Vec<_>>>()?;
        let a0: Vec<f64> = rows.iter().map(|r| r[0]).collect();
        let a0_slope = (0..knots)
            .map(|i| match i {
                0 => 0.0, // a0 is even in V
                i if i == knots - 1 => (a0[i] - a0[i - 1]) / step,
                i => (a0[i + 1] - a0[i - 1]) / (2.0 * step),
            })
            .collect();
        Ok(Self {
            v_max,
            knots: vs,
            a1: rows.iter().map(|r| r[1]).collect(),
            b1: rows.iter().map(|r| r[2]).collect(),
            a0,
            a0_slope,
        })
    }

    /// Process-wide default tabulation (`V ∈ [0, 2]`, 400 knots), built on
    /// first use.
    pub fn shared() -> &'static BoundaryCurves {
        static CURVES: OnceLock<BoundaryCurves> = OnceLock::new();
        CURVES.get_or_init(|| {
            BoundaryCurves::tabulate(DEFAULT_V_MAX, DEFAULT_KNOTS)
                .expect("default boundary tabulation")
        })
    }

    pub fn v_max(&self) -> f64 {
        self.v_max
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self, curve: Curve) -> &[f64] {
        match curve {
            Curve::A0 => &self.a0,
            Curve::A1 => &self.a1,
            Curve::B1 => &self.b1,
        }
    }

    pub fn eval(&self, curve: Curve, v: f64) -> Result<f64> {
        self.interp(self.values(curve), v)
    }

    pub fn a0(&self, v: f64) -> Result<f64> {
        self.eval(Curve::A0, v)
    }

    pub fn a1(&self, v: f64) -> Result<f64> {
        self.eval(Curve::A1, v)
    }

    pub fn b1(&self, v: f64) -> Result<f64> {
        self.eval(Curve::B1, v)
    }

    /// Central-difference derivative `a0'(V)`, linearly interpolated.
    pub fn a0_slope(&self, v: f64) -> Result<f64> {
        self.interp(&self.a0_slope, v)
    }

    fn interp(&self, values: &[f64], v: f64) -> Result<f64> {
        let v = v.abs();
        if v > self.v_max * (1.0 + 1e-12) {
            return Err(Error::OutOfTabulation { v, v_max: self.v_max });
        }
        let step = self.knots[1];
        let x = (v / step).min((values.len() - 1) as f64);
        let i = (x.floor() as usize).min(values.len() - 2);
        let frac = x - i as f64;
        Ok(values[i] + frac * (values[i + 1] - values[i]))
    }
}
