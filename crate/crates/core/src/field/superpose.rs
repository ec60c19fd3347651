use super::grid::{FieldGrid, SampledField};
use super::layout::{ElectrodeLayout, Layer, Role};
use crate::{Error, Result, Vec3};

/// One electrode and the voltage applied to it. RF electrodes receive
/// `voltage · cos 2τ`; control electrodes hold `voltage`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElectrodeDrive {
    /// Index into the grid list passed to [`superpose`].
    pub grid: usize,
    /// Electrode index within that grid.
    pub electrode: usize,
    pub layer: Layer,
    pub role: Role,
    pub voltage: f64,
}

impl ElectrodeDrive {
    /// Drives for every electrode of `layout` sampled into a single grid in
    /// layout order. `voltage` maps an electrode index to its voltage.
    pub fn from_layout(layout: &ElectrodeLayout, voltage: impl Fn(usize) -> f64) -> Vec<Self> {
        layout
            .electrodes
            .iter()
            .enumerate()
            .map(|(i, e)| Self { grid: 0, electrode: i, layer: e.layer, role: e.role, voltage: voltage(i) })
            .collect()
    }
}

/// Weighted sum of electrode potentials, pre-combined per layer and role.
#[derive(Debug, Clone)]
pub struct SuperposedField {
    grid: FieldGrid,
    // bottom rf, bottom control, top rf, top control
    parts: [Vec<f64>; 4],
}

fn part(layer: Layer, role: Role) -> usize {
    match (layer, role) {
        (Layer::Bottom, Role::Rf) => 0,
        (Layer::Bottom, Role::Control) => 1,
        (Layer::Top, Role::Rf) => 2,
        (Layer::Top, Role::Control) => 3,
    }
}

/// Combines `drives` over `grids`, which must share one grid placement.
pub fn superpose(grids: &[&FieldGrid], drives: &[ElectrodeDrive]) -> Result<SuperposedField> {
    let first = grids.first().ok_or_else(|| Error::InvalidArgument("no grids to superpose".into()))?;
    if grids.iter().any(|g| !g.compatible(first)) {
        return Err(Error::GridMismatch);
    }
    let n = first.spec().len();
    let mut parts: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; n]);
    for d in drives {
        let g = grids
            .get(d.grid)
            .ok_or_else(|| Error::InvalidArgument(format!("drive refers to missing grid {}", d.grid)))?;
        if d.electrode >= g.electrode_count() {
            return Err(Error::InvalidArgument(format!("grid {} has no electrode {}", d.grid, d.electrode)));
        }
        if d.voltage == 0.0 {
            continue;
        }
        for (acc, v) in parts[part(d.layer, d.role)].iter_mut().zip(g.values(d.electrode)) {
            *acc += d.voltage * v;
        }
    }
    // keep only the placement and stencil; the electrode data is folded into `parts`
    let grid = FieldGrid::new(*first.spec(), Vec::new())?.with_stencil(first.stencil());
    Ok(SuperposedField { grid, parts })
}

impl SuperposedField {
    /// Placement of the combined samples (carries no electrodes).
    pub fn grid(&self) -> &FieldGrid {
        &self.grid
    }

    /// Potential (volts) and gradient at `point`, RF phase `t` and blend `f`.
    pub fn sample(&self, point: &Vec3, t: f64, f: f64) -> Result<SampledField> {
        let cos = (2.0 * t).cos();
        let weights = [(1.0 - f) * cos, 1.0 - f, f * cos, f];
        let mut out = SampledField::zero();
        for (w, values) in weights.iter().zip(&self.parts) {
            if *w != 0.0 {
                out += self.grid.interpolate(values, point)? * *w;
            }
        }
        Ok(out)
    }

    /// Contribution of one layer and role at unit weight.
    pub fn sample_part(&self, layer: Layer, role: Role, point: &Vec3) -> Result<SampledField> {
        self.grid.interpolate(&self.parts[part(layer, role)], point)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::GridSpec;
    use approx::assert_abs_diff_eq;

    fn grids() -> (FieldGrid, Vec<ElectrodeDrive>) {
        let spec = GridSpec::centered(Vec3::zeros(), Vec3::new(4.0, 4.0, 4.0), [9, 9, 9]).unwrap();
        let g = FieldGrid::from_fn(spec, &["rf_b", "dc_b", "rf_t", "dc_t"], |e, p| match e {
            0 => p.z * p.z - p.y * p.y,
            1 => p.x,
            2 => p.z * p.z - p.x * p.x,
            _ => p.y,
        })
        .unwrap();
        let drives = [(Layer::Bottom, Role::Rf), (Layer::Bottom, Role::Control), (Layer::Top, Role::Rf), (Layer::Top, Role::Control)]
            .iter()
            .enumerate()
            .map(|(i, &(layer, role))| ElectrodeDrive { grid: 0, electrode: i, layer, role, voltage: 1.0 + i as f64 })
            .collect();
        (g, drives)
    }

    #[test]
    fn zero_voltages_zero_field() {
        let (g, mut drives) = grids();
        drives.iter_mut().for_each(|d| d.voltage = 0.0);
        let s = superpose(&[&g], &drives).unwrap().sample(&Vec3::new(0.3, -0.2, 0.1), 0.4, 0.5).unwrap();
        assert_eq!(s.potential, 0.0);
        assert_eq!(s.gradient, Vec3::zeros());
    }

    #[test]
    fn f_zero_is_bottom_only() {
        let (g, drives) = grids();
        let field = superpose(&[&g], &drives).unwrap();
        let p = Vec3::new(0.3, -0.2, 0.1);
        let t = 0.4;
        let s = field.sample(&p, t, 0.0).unwrap();
        let expect = (2.0 * t).cos() * (p.z * p.z - p.y * p.y) + 2.0 * p.x;
        assert_abs_diff_eq!(s.potential, expect, epsilon = 1e-12);
    }

    #[test]
    fn mismatched_grids_rejected() {
        let (g, drives) = grids();
        let spec = GridSpec::centered(Vec3::zeros(), Vec3::new(4.0, 4.0, 5.0), [9, 9, 9]).unwrap();
        let other = FieldGrid::from_fn(spec, &["x"], |_, p| p.x).unwrap();
        assert!(matches!(superpose(&[&g, &other], &drives), Err(Error::GridMismatch)));
    }
}
