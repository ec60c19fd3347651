//! Stability of a linear trap and of the two-layer transfer.
//!
//! For the idealised quadratic junction each axis obeys its own Mathieu
//! equation. A single linear trap is stable when `(α, 0)`, `(β, μ)` and
//! `(−α−β, μ)` all lie in the stable set `S`. During a transfer the vertical
//! pair stays `(−α−β, μ)` while the pair seen along `x` moves on the segment
//! `(tβ + (1−t)α, tμ)`, `t ∈ [0, 1]`; the transfer is stable when the whole
//! segment lies in `S`.

use rayon::prelude::*;

use crate::mathieu::{is_stable, BoundaryCurves};
use crate::{Error, Result};

/// Path sampling density used when callers do not choose one.
pub const DEFAULT_PATH_SAMPLES: usize = 256;
/// Resolution in `t` of the first-failure refinement.
pub const FAILURE_T_RESOLUTION: f64 = 1e-4;
// |a0'| below this cannot locate the tangency point.
const SLOPE_FLOOR: f64 = 1e-10;

/// `(μ, β, α)`; the vertical coefficient `γ = −α − β` is always derived.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JunctionParams {
    pub mu: f64,
    pub beta: f64,
    pub alpha: f64,
}

impl JunctionParams {
    pub fn new(mu: f64, beta: f64, alpha: f64) -> Result<Self> {
        if !(mu.is_finite() && beta.is_finite() && alpha.is_finite()) {
            return Err(Error::InvalidArgument("junction parameters must be finite".into()));
        }
        Ok(Self { mu, beta, alpha })
    }

    pub fn gamma(&self) -> f64 {
        -self.alpha - self.beta
    }

    /// `(U, V)` seen along `x` at path parameter `t`.
    pub fn path_point(&self, t: f64) -> (f64, f64) {
        (t * self.beta + (1.0 - t) * self.alpha, t * self.mu.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimpleStabilityReport {
    /// `(α, 0) ∈ S`.
    pub axial: bool,
    /// `(β, μ) ∈ S`.
    pub transverse: bool,
    /// `(−α−β, μ) ∈ S`.
    pub vertical: bool,
    pub alpha_positive: bool,
    pub stable: bool,
}

pub fn simple_trap_stable(jp: &JunctionParams) -> SimpleStabilityReport {
    let mu = jp.mu.abs();
    let axial = is_stable(jp.alpha, 0.0);
    let transverse = is_stable(jp.beta, mu);
    let vertical = is_stable(jp.gamma(), mu);
    let alpha_positive = jp.alpha > 0.0;
    SimpleStabilityReport {
        axial,
        transverse,
        vertical,
        alpha_positive,
        stable: axial && transverse && vertical && alpha_positive,
    }
}

/// Which of the two transfer families failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathFamily {
    /// The moving pair `(tβ + (1−t)α, tμ)`.
    Moving,
    /// The static vertical pair `(−α−β, μ)`.
    Vertical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureMechanism {
    /// The pair dropped below `a0` (escape along the static-repulsive axis).
    BelowA0,
    /// The pair entered the unstable tongue between `b1` and `a1`.
    AboveA1B1,
    /// `α ≤ 0`: nothing holds the ion along the trap axis.
    AxialUnconfined,
}

impl FailureMechanism {
    pub fn name(self) -> &'static str {
        match self {
            FailureMechanism::BelowA0 => "below_a0",
            FailureMechanism::AboveA1B1 => "above_a1b1",
            FailureMechanism::AxialUnconfined => "axial_unconfined",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferStabilityReport {
    pub stable: bool,
    pub first_failure_t: Option<f64>,
    pub failing_pair: Option<PathFamily>,
    pub mechanism: Option<FailureMechanism>,
    /// Whether any unstable part of the moving path lies below `a0`, even if
    /// an earlier failure had another cause.
    pub crosses_below_a0: bool,
    /// First failure of the moving pair with its mechanism, reported even
    /// when the vertical pair already fails.
    pub moving_failure: Option<(f64, FailureMechanism)>,
}

impl TransferStabilityReport {
    fn stable() -> Self {
        Self {
            stable: true,
            first_failure_t: None,
            failing_pair: None,
            mechanism: None,
            crosses_below_a0: false,
            moving_failure: None,
        }
    }
}

/// Coarse position of `(U, V)` relative to the tabulated boundary curves.
/// Bands 0 and 2 are unstable, 1 and 3 stable (for `U` below `b2`).
fn band(curves: &BoundaryCurves, u: f64, v: f64) -> u8 {
    let a0 = curves.a0(v).unwrap_or(f64::NEG_INFINITY);
    let b1 = curves.b1(v).unwrap_or(f64::INFINITY);
    let a1 = curves.a1(v).unwrap_or(f64::INFINITY);
    match u {
        u if u < a0 => 0,
        u if u <= b1 => 1,
        u if u < a1 => 2,
        _ => 3,
    }
}

fn mechanism_at(curves: &BoundaryCurves, u: f64, v: f64) -> FailureMechanism {
    if v == 0.0 && u <= 0.0 {
        return FailureMechanism::AxialUnconfined;
    }
    let below = curves.a0(v).map(|a0| u < a0).unwrap_or(false);
    if below {
        FailureMechanism::BelowA0
    } else {
        FailureMechanism::AboveA1B1
    }
}

/// Samples the moving pair at `samples` uniform values of `t` and checks the
/// static vertical pair. Sign changes are refined by bisection to
/// [`FAILURE_T_RESOLUTION`]; a change of stability band between two stable
/// samples also counts as a crossing, so refining `samples` can only reveal
/// failures, never hide them.
pub fn transfer_stable(jp: &JunctionParams, samples: usize) -> TransferStabilityReport {
    transfer_stable_with(jp, samples, BoundaryCurves::shared())
}

pub fn transfer_stable_with(
    jp: &JunctionParams,
    samples: usize,
    curves: &BoundaryCurves,
) -> TransferStabilityReport {
    let samples = samples.max(64);
    let mu = jp.mu.abs();
    let mut report = TransferStabilityReport::stable();

    if !is_stable(jp.gamma(), mu) {
        report.stable = false;
        report.first_failure_t = Some(0.0);
        report.failing_pair = Some(PathFamily::Vertical);
        report.mechanism = Some(mechanism_at(curves, jp.gamma(), mu));
    }

    let stable_at = |t: f64| {
        let (u, v) = jp.path_point(t);
        is_stable(u, v)
    };

    let mut ts: Vec<f64> = (0..samples).map(|i| i as f64 / (samples - 1) as f64).collect();
    // The deepest point of a dip below a0 is always examined, so a dip
    // narrower than the sample spacing is not missed.
    if let Some(tt) = tangency_t(jp, curves) {
        ts.push(tt);
        ts.sort_by(f64::total_cmp);
    }

    let mut prev: Option<(f64, bool, u8)> = None;
    for (i, &t) in ts.iter().enumerate() {
        let (u, v) = jp.path_point(t);
        let ok = is_stable(u, v);
        let b = band(curves, u, v);

        let failure = match prev {
            _ if !ok && i == 0 => Some(0.0),
            Some((tp, true, _)) if !ok => Some(refine(tp, t, &stable_at)),
            Some((tp, true, bp)) if ok && matches!((bp, b), (1, 3) | (3, 1)) => {
                // Jumped across an unstable band between two stable samples.
                Some(refine_band(jp, curves, tp, t, bp))
            }
            _ => None,
        };

        if let Some(tf) = failure {
            let (uf, vf) = jp.path_point(tf);
            let mech = if !ok { mechanism_at(curves, u, v) } else { mechanism_at(curves, uf, vf) };
            if mech == FailureMechanism::BelowA0 {
                report.crosses_below_a0 = true;
            }
            if report.moving_failure.is_none() {
                report.moving_failure = Some((tf, mech));
            }
            if report.failing_pair != Some(PathFamily::Vertical) && report.first_failure_t.is_none() {
                report.stable = false;
                report.first_failure_t = Some(tf);
                report.failing_pair = Some(PathFamily::Moving);
                report.mechanism = Some(mech);
            }
        } else if !ok && mechanism_at(curves, u, v) == FailureMechanism::BelowA0 {
            report.crosses_below_a0 = true;
        }
        prev = Some((t, ok, b));
    }
    report
}

/// Path parameter of the tangency point `a0'(m) = (β − α)/μ`, if it lies on
/// the segment.
fn tangency_t(jp: &JunctionParams, curves: &BoundaryCurves) -> Option<f64> {
    let mu = jp.mu.abs();
    if mu == 0.0 || mu > curves.v_max() {
        return None;
    }
    let k = (jp.beta - jp.alpha) / mu;
    if k >= 0.0 || curves.a0_slope(mu).ok()? >= k {
        return None;
    }
    let (mut lo, mut hi) = (0.0, mu);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if curves.a0_slope(mid).ok()? > k {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi) / mu)
}

/// First unstable `t` in `(lo, hi]` given a stable `lo` and unstable `hi`.
fn refine(mut lo: f64, mut hi: f64, stable_at: &impl Fn(f64) -> bool) -> f64 {
    while hi - lo > FAILURE_T_RESOLUTION {
        let mid = 0.5 * (lo + hi);
        if stable_at(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Locates where the path leaves band `start_band` between `lo` and `hi`.
fn refine_band(jp: &JunctionParams, curves: &BoundaryCurves, mut lo: f64, mut hi: f64, start_band: u8) -> f64 {
    while hi - lo > FAILURE_T_RESOLUTION {
        let mid = 0.5 * (lo + hi);
        let (u, v) = jp.path_point(mid);
        if band(curves, u, v) == start_band {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Closed-form test for the moving pair dipping below `a0`.
///
/// In the `(U, V)` plane the path is the line `U = α + kV`, `k = (β − α)/μ`,
/// for `V ∈ [0, μ]`. Because `a0` is concave, `U − a0(V)` is convex and its
/// minimum sits either at an end point or at the tangency point `m` where
/// `a0'(m) = k`. Returns `true` when the path is banned.
pub fn banned_region_tangency(jp: &JunctionParams) -> Result<bool> {
    banned_region_tangency_with(jp, BoundaryCurves::shared())
}

pub fn banned_region_tangency_with(jp: &JunctionParams, curves: &BoundaryCurves) -> Result<bool> {
    let mu = jp.mu.abs();
    if mu == 0.0 {
        return Err(Error::InvalidArgument("tangency test needs mu > 0".into()));
    }
    if mu > curves.v_max() {
        return Err(Error::OutOfTabulation { v: mu, v_max: curves.v_max() });
    }
    let k = (jp.beta - jp.alpha) / mu;
    if jp.alpha < 0.0 {
        return Ok(true);
    }
    if k >= 0.0 {
        return Ok(false);
    }
    if k.abs() < SLOPE_FLOOR {
        return Err(Error::DegenerateSlope { slope: k });
    }
    if curves.a0_slope(mu)? >= k {
        // Slope never reaches k on [0, μ]: the minimum is at the far end.
        return Ok(jp.beta < curves.a0(mu)?);
    }
    // a0' is decreasing; bisect a0'(m) = k on [0, μ].
    let (mut lo, mut hi) = (0.0, mu);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if curves.a0_slope(mid)? > k {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let m = 0.5 * (lo + hi);
    let slope = curves.a0_slope(m)?;
    if slope.abs() < SLOPE_FLOOR {
        return Err(Error::DegenerateSlope { slope });
    }
    Ok(curves.a0(m)? > k * m + jp.alpha)
}

/// One axis of a region-map grid: cell centres on `[min, max]`, or a single
/// fixed value when `cells == 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisSpec {
    pub min: f64,
    pub max: f64,
    pub cells: usize,
}

impl AxisSpec {
    pub fn new(min: f64, max: f64, cells: usize) -> Result<Self> {
        let a = Self { min, max, cells };
        a.validate()?;
        Ok(a)
    }

    pub fn fixed(value: f64) -> Self {
        Self { min: value, max: value, cells: 1 }
    }

    fn validate(&self) -> Result<()> {
        if !(self.min.is_finite() && self.max.is_finite()) {
            return Err(Error::InvalidArgument("axis range must be finite".into()));
        }
        match self.cells {
            1 if self.min == self.max => Ok(()),
            c if c >= 8 && self.max > self.min => Ok(()),
            _ => Err(Error::InvalidArgument(format!(
                "axis needs max > min and at least 8 cells (or a single fixed value), got [{}, {}] x {}",
                self.min, self.max, self.cells
            ))),
        }
    }

    pub fn center(&self, i: usize) -> f64 {
        if self.cells == 1 {
            return self.min;
        }
        self.min + (i as f64 + 0.5) * (self.max - self.min) / self.cells as f64
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.cells).map(|i| self.center(i)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionCell {
    pub params: JunctionParams,
    pub simple_stable: bool,
    pub transfer_stable: bool,
    pub mechanism: Option<FailureMechanism>,
}

impl RegionCell {
    /// Stable as a single trap but not through the transfer.
    pub fn banned(&self) -> bool {
        self.simple_stable && !self.transfer_stable
    }
}

/// Per-cell verdicts over a `(μ, β, α)` grid, `μ` slowest.
#[derive(Debug, Clone)]
pub struct RegionMap3D {
    pub mu: AxisSpec,
    pub beta: AxisSpec,
    pub alpha: AxisSpec,
    pub cells: Vec<RegionCell>,
}

impl RegionMap3D {
    pub fn index(&self, i_mu: usize, i_beta: usize, i_alpha: usize) -> usize {
        (i_mu * self.beta.cells + i_beta) * self.alpha.cells + i_alpha
    }

    pub fn cell(&self, i_mu: usize, i_beta: usize, i_alpha: usize) -> &RegionCell {
        &self.cells[self.index(i_mu, i_beta, i_alpha)]
    }

    pub fn banned_count(&self) -> usize {
        self.cells.iter().filter(|c| c.banned()).count()
    }
}

/// Fills the map with [`simple_trap_stable`] and [`transfer_stable`] at each
/// cell centre. Cells are evaluated in parallel; the result is deterministic.
pub fn region_map(mu: AxisSpec, beta: AxisSpec, alpha: AxisSpec, samples: usize) -> Result<RegionMap3D> {
    for a in [&mu, &beta, &alpha] {
        a.validate()?;
    }
    let curves = BoundaryCurves::shared();
    let n = mu.cells * beta.cells * alpha.cells;
    let cells = (0..n)
        .into_par_iter()
        .map(|idx| {
            let ia = idx % alpha.cells;
            let ib = (idx / alpha.cells) % beta.cells;
            let im = idx / (alpha.cells * beta.cells);
            let params = JunctionParams { mu: mu.center(im), beta: beta.center(ib), alpha: alpha.center(ia) };
            let simple = simple_trap_stable(&params);
            let transfer = transfer_stable_with(&params, samples, curves);
            RegionCell {
                params,
                simple_stable: simple.stable,
                transfer_stable: simple.stable && transfer.stable,
                mechanism: transfer.mechanism,
            }
        })
        .collect();
    Ok(RegionMap3D { mu, beta, alpha, cells })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn jp(mu: f64, beta: f64, alpha: f64) -> JunctionParams {
        JunctionParams::new(mu, beta, alpha).unwrap()
    }

    #[test]
    fn simple_examples() {
        assert!(simple_trap_stable(&jp(0.75, 0.0, 0.2)).stable);
        let a = simple_trap_stable(&jp(0.75, 0.0, 0.0));
        assert!(!a.stable && !a.axial && !a.alpha_positive);
        assert!(!simple_trap_stable(&jp(0.0, 0.0, 0.0)).stable);
    }

    #[test]
    fn transfer_examples() {
        assert!(transfer_stable(&jp(0.75, 0.0, 0.2), 256).stable);
        assert!(transfer_stable(&jp(0.75, -0.15, 0.29), 256).stable);

        // The moving pair dips below a0 mid-transfer, but the vertical pair
        // (0.399, 1.0) already sits in the unstable band between b1 and a1.
        let params = jp(1.0, -0.4, 1e-3);
        let simple = simple_trap_stable(&params);
        assert!(!simple.stable && !simple.vertical && simple.transverse && simple.axial);
        let r = transfer_stable(&params, 256);
        assert!(!r.stable);
        assert_eq!(r.failing_pair, Some(PathFamily::Vertical));
        assert_eq!(r.mechanism, Some(FailureMechanism::AboveA1B1));
        assert!(r.crosses_below_a0);
        let (t, mech) = r.moving_failure.unwrap();
        assert_eq!(mech, FailureMechanism::BelowA0);
        // a0 ≈ −V²/2 near V = 0, so with α = 1e−3 the path leaves S almost
        // at once; the deepest point of the dip lies mid-transfer.
        assert!(t < 0.01, "t = {t}");
        let deepest = tangency_t(&params, BoundaryCurves::shared()).unwrap();
        assert!((0.3..0.7).contains(&deepest), "tangency t = {deepest}");
    }

    #[test]
    fn vertical_pair_failure() {
        // (γ, μ) = (−0.29, 0.75) sits below a0(0.75) ≈ −0.266.
        let r = transfer_stable(&jp(0.75, 0.0, 0.29), 256);
        assert!(!r.stable);
        assert_eq!(r.failing_pair, Some(PathFamily::Vertical));
        assert_eq!(r.mechanism, Some(FailureMechanism::BelowA0));
    }

    #[test]
    fn axial_failure_at_alpha_zero() {
        let r = transfer_stable(&jp(0.75, 0.0, 0.0), 256);
        assert_eq!(r.first_failure_t, Some(0.0));
        assert_eq!(r.mechanism, Some(FailureMechanism::AxialUnconfined));
    }

    #[test]
    fn tangency_examples() {
        assert!(banned_region_tangency(&jp(1.0, -0.4, 1e-3)).unwrap());
        assert!(!banned_region_tangency(&jp(0.75, 0.0, 0.2)).unwrap());
        assert!(!banned_region_tangency(&jp(0.25, 0.0, 0.01)).unwrap());
        assert!(banned_region_tangency(&jp(0.0, 0.0, 0.1)).is_err());
        assert!(matches!(
            banned_region_tangency(&jp(0.5, 0.1 - 1e-12, 0.1)),
            Err(Error::DegenerateSlope { .. })
        ));
    }

    #[test]
    fn a0_is_concave() {
        let c = BoundaryCurves::shared();
        let slopes: Vec<f64> = c.knots().iter().map(|&v| c.a0_slope(v).unwrap()).collect();
        assert!(slopes.windows(2).all(|w| w[1] <= w[0] + 1e-9));
    }

    #[test]
    fn axis_validation() {
        assert!(AxisSpec::new(0.0, 1.0, 4).is_err());
        assert!(AxisSpec::new(1.0, 0.0, 16).is_err());
        assert!(AxisSpec::new(0.0, 1.0, 16).is_ok());
        assert_eq!(AxisSpec::fixed(0.5).centers(), vec![0.5]);
    }
}
