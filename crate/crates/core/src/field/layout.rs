//! Analytic gapless-plane electrode model.
//!
//! Electrodes are rectangles tiling one of two parallel planes at
//! `z = −s` (bottom layer) and `z = +s` (top layer); everything not covered
//! by an electrode is grounded. A rectangle held at one volt in an otherwise
//! grounded plane produces, in the half-space above it, the solid-angle
//! potential
//!
//! ```text
//! φ(x, y, h) = (1/2π) Σ ± atan( X·Y / (h √(X² + Y² + h²)) )
//! ```
//!
//! summed over the four corners. The opposite plane is grounded by an image
//! series in the slab of thickness `d = 2s`,
//!
//! ```text
//! φ_slab(h) = Σₙ [ φ(h + 2nd) − φ(2(n+1)d − h) ],
//! ```
//!
//! truncated after `N` image pairs. The remaining pairs are replaced by their
//! midpoint-rule integral `(1/2d) ∫ φ` over one image period; this tail makes
//! the series exact for an electrode covering the whole plane and accelerates
//! it for large finite electrodes.

use std::f64::consts::PI;

use rayon::prelude::*;

use super::grid::{FieldGrid, GridSpec};
use crate::{Error, Result, Vec3};

/// Number of image pairs summed before the tail correction.
pub const DEFAULT_IMAGE_ORDER: usize = 20;

const GAUSS_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683,
    0.0,
    0.538_469_310_105_683,
    0.906_179_845_938_664,
];
const GAUSS_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189,
    0.478_628_670_499_366,
    0.568_888_888_888_889,
    0.478_628_670_499_366,
    0.236_926_885_056_189,
];

/// Axis-aligned rectangle in a layer plane; edges may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Result<Self> {
        if !(x0 < x1 && y0 < y1) {
            return Err(Error::Geometry(format!("degenerate rectangle [{x0}, {x1}] x [{y0}, {y1}]")));
        }
        Ok(Self { x0, x1, y0, y1 })
    }

    pub fn whole_plane() -> Self {
        Self { x0: f64::NEG_INFINITY, x1: f64::INFINITY, y0: f64::NEG_INFINITY, y1: f64::INFINITY }
    }

    /// Image under the lateral part of the layer map `(x, y) → (−y, x)`,
    /// i.e. the top-layer counterpart of a bottom-layer rectangle.
    pub fn rotoreflect(&self) -> Self {
        Self { x0: -self.y1, x1: -self.y0, y0: self.x0, y1: self.x1 }
    }

    fn overlaps(&self, o: &Rect) -> bool {
        self.x0.max(o.x0) < self.x1.min(o.x1) && self.y0.max(o.y0) < self.y1.min(o.y1)
    }
}

/// Potential at height `h > 0` above a unit-volt rectangle in a grounded
/// plane, evaluated at lateral position `(x, y)`.
pub fn half_space_rect_potential(r: &Rect, x: f64, y: f64, h: f64) -> f64 {
    let corner = |cx: f64, cy: f64| {
        let (dx, dy) = (cx - x, cy - y);
        match (dx.is_finite(), dy.is_finite()) {
            (true, true) => (dx * dy).atan2(h * (dx * dx + dy * dy + h * h).sqrt()),
            (false, true) => (dx.signum() * dy / h).atan(),
            (true, false) => (dy.signum() * dx / h).atan(),
            (false, false) => dx.signum() * dy.signum() * 0.5 * PI,
        }
    };
    (corner(r.x1, r.y1) - corner(r.x0, r.y1) - corner(r.x1, r.y0) + corner(r.x0, r.y0)) / (2.0 * PI)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Layer {
    Bottom,
    Top,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Rf,
    Control,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Electrode {
    pub name: String,
    pub layer: Layer,
    pub role: Role,
    /// Rectangles in global lateral coordinates.
    pub rects: Vec<Rect>,
}

impl Electrode {
    pub fn new(name: impl Into<String>, layer: Layer, role: Role, rects: Vec<Rect>) -> Self {
        Self { name: name.into(), layer, role, rects }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElectrodeLayout {
    /// Half the distance between the two electrode planes (µm).
    pub plane_half_separation: f64,
    pub electrodes: Vec<Electrode>,
    pub image_order: usize,
}

impl ElectrodeLayout {
    pub fn new(plane_half_separation: f64, electrodes: Vec<Electrode>) -> Result<Self> {
        let layout = Self { plane_half_separation, electrodes, image_order: DEFAULT_IMAGE_ORDER };
        layout.validate()?;
        Ok(layout)
    }

    pub fn with_image_order(mut self, order: usize) -> Self {
        self.image_order = order;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.plane_half_separation > 0.0 && self.plane_half_separation.is_finite()) {
            return Err(Error::Geometry("plane half-separation must be positive".into()));
        }
        let mut names = std::collections::HashSet::new();
        for e in &self.electrodes {
            if !names.insert(e.name.as_str()) {
                return Err(Error::Geometry(format!("duplicate electrode name {:?}", e.name)));
            }
        }
        for layer in [Layer::Bottom, Layer::Top] {
            let rects: Vec<(&str, &Rect)> = self
                .electrodes
                .iter()
                .filter(|e| e.layer == layer)
                .flat_map(|e| e.rects.iter().map(move |r| (e.name.as_str(), r)))
                .collect();
            for (i, (na, a)) in rects.iter().enumerate() {
                for (nb, b) in &rects[i + 1..] {
                    if a.overlaps(b) {
                        return Err(Error::Geometry(format!("electrodes {na:?} and {nb:?} overlap")));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn electrode(&self, name: &str) -> Option<&Electrode> {
        self.electrodes.iter().find(|e| e.name == name)
    }

    /// Unit-volt potential of electrode `index` at `p` with `order` image pairs.
    pub fn potential_with_order(&self, index: usize, p: &Vec3, order: usize) -> Result<f64> {
        let e = &self.electrodes[index];
        let s = self.plane_half_separation;
        let h = match e.layer {
            Layer::Bottom => p.z + s,
            Layer::Top => s - p.z,
        };
        let d = 2.0 * s;
        if !(h > 0.0 && h < d) {
            return Err(Error::Geometry(format!("point z = {} is not strictly between the planes", p.z)));
        }
        let half = |z: f64| e.rects.iter().map(|r| half_space_rect_potential(r, p.x, p.y, z)).sum::<f64>();
        let mut sum = 0.0;
        for n in 0..=order {
            let n = n as f64;
            sum += half(h + 2.0 * n * d) - half(2.0 * (n + 1.0) * d - h);
        }
        let start = h + 2.0 * d * (order as f64 + 0.5);
        let width = 2.0 * (d - h);
        let tail: f64 = GAUSS_NODES
            .iter()
            .zip(GAUSS_WEIGHTS)
            .map(|(&x, w)| w * half(start + 0.5 * width * (x + 1.0)))
            .sum::<f64>()
            * 0.5
            * width;
        Ok(sum + tail / (2.0 * d))
    }

    pub fn potential(&self, index: usize, p: &Vec3) -> Result<f64> {
        self.potential_with_order(index, p, self.image_order)
    }

    /// Central-difference gradient of the analytic potential.
    pub fn gradient(&self, index: usize, p: &Vec3, step: f64) -> Result<Vec3> {
        let mut g = Vec3::zeros();
        for a in 0..3 {
            let mut hi = *p;
            let mut lo = *p;
            hi[a] += step;
            lo[a] -= step;
            g[a] = (self.potential(index, &hi)? - self.potential(index, &lo)?) / (2.0 * step);
        }
        Ok(g)
    }

    /// Central-difference Hessian of the analytic potential.
    pub fn hessian(&self, index: usize, p: &Vec3, step: f64) -> Result<nalgebra::Matrix3<f64>> {
        let mut h = nalgebra::Matrix3::zeros();
        let f0 = self.potential(index, p)?;
        for a in 0..3 {
            for b in a..3 {
                let val = if a == b {
                    let mut hi = *p;
                    let mut lo = *p;
                    hi[a] += step;
                    lo[a] -= step;
                    (self.potential(index, &hi)? - 2.0 * f0 + self.potential(index, &lo)?) / (step * step)
                } else {
                    let mut acc = 0.0;
                    for (sa, sb, sign) in [(1.0, 1.0, 1.0), (1.0, -1.0, -1.0), (-1.0, 1.0, -1.0), (-1.0, -1.0, 1.0)] {
                        let mut q = *p;
                        q[a] += sa * step;
                        q[b] += sb * step;
                        acc += sign * self.potential(index, &q)?;
                    }
                    acc / (4.0 * step * step)
                };
                h[(a, b)] = val;
                h[(b, a)] = val;
            }
        }
        Ok(h)
    }
}

/// Outcome of grid generation.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationReport {
    pub image_order: usize,
    /// Largest change, over probe points and electrodes, between evaluating
    /// with `image_order` and with half as many image pairs.
    pub image_convergence: f64,
}

/// Samples every electrode of `layout` on `spec`.
pub fn generate_rect_electrode_grid(layout: &ElectrodeLayout, spec: &GridSpec) -> Result<(FieldGrid, GenerationReport)> {
    layout.validate()?;
    spec.validate()?;
    let s = layout.plane_half_separation;
    let zmin = spec.origin.z;
    let zmax = spec.max_corner().z;
    if !(zmin > -s && zmax < s) {
        return Err(Error::Geometry(format!(
            "grid z range [{zmin}, {zmax}] must lie strictly between the planes at ±{s}"
        )));
    }

    let [nx, ny, nz] = spec.dims;
    let mut electrodes = Vec::with_capacity(layout.electrodes.len());
    for (e, electrode) in layout.electrodes.iter().enumerate() {
        let values = (0..nx * ny)
            .into_par_iter()
            .map(|ij| {
                let (i, j) = (ij / ny, ij % ny);
                (0..nz)
                    .map(|k| layout.potential(e, &spec.node(i, j, k)))
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<Vec<Vec<f64>>>>()?
            .concat();
        electrodes.push((electrode.name.clone(), values));
    }

    let probes = [
        spec.node(nx / 2, ny / 2, nz / 2),
        spec.node(0, 0, 0),
        spec.node(nx - 1, ny - 1, nz - 1),
        spec.node(nx / 2, ny / 2, 0),
        spec.node(nx / 2, ny / 2, nz - 1),
    ];
    let mut convergence: f64 = 0.0;
    for e in 0..layout.electrodes.len() {
        for p in &probes {
            let full = layout.potential_with_order(e, p, layout.image_order)?;
            let half = layout.potential_with_order(e, p, layout.image_order / 2)?;
            convergence = convergence.max((full - half).abs());
        }
    }

    let grid = FieldGrid::new(*spec, electrodes)?;
    Ok((grid, GenerationReport { image_order: layout.image_order, image_convergence: convergence }))
}

/// Bundled electrode layouts.
pub mod presets {
    use super::*;

    /// Inner edge of the RF rails (µm from the trap axis).
    pub const RF_INNER: f64 = 40.0;
    /// Outer edge of the RF rails; `RF_INNER · RF_OUTER = 72²` puts the
    /// single-layer RF null 72 µm above the surface.
    pub const RF_OUTER: f64 = 5184.0 / RF_INNER;
    /// Outer edge of the outer control electrodes.
    pub const CONTROL_OUTER: f64 = RF_OUTER + 150.0;
    /// Half-length of all electrodes along the trap axis.
    pub const RAIL_HALF_LENGTH: f64 = 1500.0;
    /// Width of the axially segmented control electrodes.
    pub const SEGMENT_WIDTH: f64 = 70.0;
    /// Half the separation of the two electrode planes.
    pub const PLANE_HALF_SEPARATION: f64 = 25.0;

    /// Bottom-layer electrodes of a linear surface trap along `x`: two RF
    /// rails, a centre control electrode split in three along `x`, and two
    /// outer control rows of five segments each.
    pub fn linear_trap_layer() -> Vec<Electrode> {
        let l = RAIL_HALF_LENGTH;
        let w = SEGMENT_WIDTH;
        let rect = |x0, x1, y0, y1| Rect { x0, x1, y0, y1 };
        let mut out = vec![Electrode::new(
            "rf",
            Layer::Bottom,
            Role::Rf,
            vec![rect(-l, l, RF_INNER, RF_OUTER), rect(-l, l, -RF_OUTER, -RF_INNER)],
        )];
        let center_edges = [-l, -0.5 * w, 0.5 * w, l];
        for (i, win) in center_edges.windows(2).enumerate() {
            out.push(Electrode::new(
                format!("dc_c{i}"),
                Layer::Bottom,
                Role::Control,
                vec![rect(win[0], win[1], -RF_INNER, RF_INNER)],
            ));
        }
        let outer_edges = [-l, -1.5 * w, -0.5 * w, 0.5 * w, 1.5 * w, l];
        for (side, (y0, y1)) in [("n", (RF_OUTER, CONTROL_OUTER)), ("s", (-CONTROL_OUTER, -RF_OUTER))] {
            for (i, win) in outer_edges.windows(2).enumerate() {
                out.push(Electrode::new(
                    format!("dc_{side}{i}"),
                    Layer::Bottom,
                    Role::Control,
                    vec![rect(win[0], win[1], y0, y1)],
                ));
            }
        }
        out
    }

    /// Two copies of [`linear_trap_layer`], the upper one rotoreflected.
    /// Top-layer electrodes carry a `_top` suffix and appear in the same
    /// order as their bottom counterparts.
    pub fn two_layer() -> ElectrodeLayout {
        let bottom = linear_trap_layer();
        let top: Vec<Electrode> = bottom
            .iter()
            .map(|e| Electrode {
                name: format!("{}_top", e.name),
                layer: Layer::Top,
                role: e.role,
                rects: e.rects.iter().map(Rect::rotoreflect).collect(),
            })
            .collect();
        ElectrodeLayout::new(PLANE_HALF_SEPARATION, bottom.into_iter().chain(top).collect())
            .expect("two-layer preset is valid")
    }

    /// Only the bottom trap; the upper plane is bare ground.
    pub fn single_layer() -> ElectrodeLayout {
        ElectrodeLayout::new(PLANE_HALF_SEPARATION, linear_trap_layer()).expect("single-layer preset is valid")
    }

    /// One RF electrode covering the entire lower plane.
    pub fn parallel_plate() -> ElectrodeLayout {
        ElectrodeLayout::new(
            PLANE_HALF_SEPARATION,
            vec![Electrode::new("rf", Layer::Bottom, Role::Rf, vec![Rect::whole_plane()])],
        )
        .expect("parallel-plate preset is valid")
    }

    pub fn by_name(name: &str) -> Result<ElectrodeLayout> {
        match name {
            "peregrine" | "two-layer" => Ok(two_layer()),
            "single-layer" => Ok(single_layer()),
            "parallel-plate" => Ok(parallel_plate()),
            other => Err(Error::Config(format!("unknown layout preset {other:?}"))),
        }
    }
}
