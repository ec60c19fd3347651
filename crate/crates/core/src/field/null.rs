//! RF null location on a sampled grid.

use super::grid::FieldGrid;
use super::layout::{Layer, Role};
use crate::{Error, Result, Vec3};

/// Layer and role of a grid electrode, inferred from its name: names
/// starting with `rf` are RF electrodes, names ending in `_top` belong to the
/// upper layer.
pub fn classify_electrode(name: &str) -> (Layer, Role) {
    let layer = if name.ends_with("_top") { Layer::Top } else { Layer::Bottom };
    let role = if name.starts_with("rf") { Role::Rf } else { Role::Control };
    (layer, role)
}

/// Unit-volt sum of every RF electrode of `layer`.
pub fn rf_sum(grid: &FieldGrid, layer: Layer) -> Vec<f64> {
    let mut sum = vec![0.0; grid.spec().len()];
    for (e, name) in grid.names().iter().enumerate() {
        if classify_electrode(name) == (layer, Role::Rf) {
            sum.iter_mut().zip(grid.values(e)).for_each(|(a, v)| *a += v);
        }
    }
    sum
}

#[derive(Debug, Clone, PartialEq)]
pub struct NullReport {
    pub layer: Layer,
    pub position: Vec3,
    /// Distance from the layer's electrode plane (µm).
    pub height: f64,
    /// `|∇φ|` at the located point, per RF volt.
    pub gradient_norm: f64,
    /// `|∇φ|` at the null divided by its median over the search plane.
    pub contrast: f64,
    /// Curvature `½ ∂²φ/∂z²` at the null, per RF volt (V/µm²).
    pub kappa_z: f64,
    /// True when no isolated field minimum was found.
    pub degenerate: bool,
}

const SCAN: usize = 41;
const REFINE: usize = 11;
const DEGENERATE_CONTRAST: f64 = 0.05;

/// Locates the RF null of `layer` by minimising `|∇φ_RF|²` over the plane
/// transverse to that layer's trap axis through the grid centre. The bottom
/// trap runs along `x`, the top trap along `y`.
pub fn find_rf_null(grid: &FieldGrid, layer: Layer, plane_half_separation: f64) -> Result<NullReport> {
    let rf = rf_sum(grid, layer);
    if rf.iter().all(|&v| v == 0.0) {
        return Err(Error::InvalidArgument(format!("grid has no {layer:?} RF electrode")));
    }
    let (min, max) = grid.sampling_domain();
    let center = 0.5 * (grid.spec().origin + grid.spec().max_corner());
    // lateral search axis: y for the bottom trap, x for the top trap
    let lat = match layer {
        Layer::Bottom => 1,
        Layer::Top => 0,
    };
    if !(min.iter().zip(max.iter()).all(|(a, b)| a < b)) {
        return Err(Error::InvalidArgument("grid too small to sample".into()));
    }
    let point = |l: f64, z: f64| {
        let mut p = center;
        p[lat] = l;
        p.z = z;
        p
    };
    let cost = |l: f64, z: f64| -> Result<f64> { Ok(grid.interpolate(&rf, &point(l, z))?.gradient.norm_squared()) };

    let (l0, l1, z0, z1) = (min[lat], max[lat], min.z, max.z);
    let mut costs = Vec::with_capacity(SCAN * SCAN);
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for i in 0..SCAN {
        let l = l0 + (l1 - l0) * i as f64 / (SCAN - 1) as f64;
        for k in 0..SCAN {
            let z = z0 + (z1 - z0) * k as f64 / (SCAN - 1) as f64;
            let c = cost(l, z)?;
            costs.push(c.sqrt());
            if c < best.0 {
                best = (c, l, z);
            }
        }
    }
    costs.sort_by(f64::total_cmp);
    let median = costs[costs.len() / 2];

    let (mut hl, mut hz) = ((l1 - l0) / (SCAN - 1) as f64, (z1 - z0) / (SCAN - 1) as f64);
    for _ in 0..14 {
        let (_, bl, bz) = best;
        for i in 0..REFINE {
            let l = (bl + hl * (i as f64 / (REFINE - 1) as f64 * 2.0 - 1.0)).clamp(l0, l1);
            for k in 0..REFINE {
                let z = (bz + hz * (k as f64 / (REFINE - 1) as f64 * 2.0 - 1.0)).clamp(z0, z1);
                let c = cost(l, z)?;
                if c < best.0 {
                    best = (c, l, z);
                }
            }
        }
        hl *= 0.35;
        hz *= 0.35;
    }

    let (c, l, z) = best;
    let position = point(l, z);
    let gradient_norm = c.sqrt();
    let contrast = if median > 0.0 { gradient_norm / median } else { 1.0 };
    let edge_tol = 1e-6 * (z1 - z0);
    let at_edge = (z - z0).abs() < edge_tol || (z1 - z).abs() < edge_tol;
    let step = 0.25 * grid.spec().spacing.z;
    let above = grid.interpolate(&rf, &(position + Vec3::new(0.0, 0.0, step)));
    let below = grid.interpolate(&rf, &(position - Vec3::new(0.0, 0.0, step)));
    let kappa_z = match (above, below) {
        (Ok(a), Ok(b)) => 0.25 * (a.gradient.z - b.gradient.z) / step,
        _ => 0.0,
    };
    let height = match layer {
        Layer::Bottom => z + plane_half_separation,
        Layer::Top => plane_half_separation - z,
    };
    Ok(NullReport {
        layer,
        position,
        height,
        gradient_norm,
        contrast,
        kappa_z,
        degenerate: at_edge || contrast > DEGENERATE_CONTRAST || kappa_z.abs() < 1e-12,
    })
}
