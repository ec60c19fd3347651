use nalgebra::{DMatrix, DVector, Matrix3};

use super::Bounds;
use crate::field::{
    classify_electrode, find_rf_null, superpose, ElectrodeDrive, FieldGrid, Layer, NullReport, Role, SuperposedField,
};
use crate::junction::JunctionParams;
use crate::potential::{physical_to_dimensionless, DimensionlessScales, JunctionPotential, PhysicalTrapSpec, TwoLayerGeometry};
use crate::{Error, Result, Vec3};

/// A dimensionless potential `Φ(p, τ, f)`.
pub trait FieldModel: Send + Sync {
    fn gradient(&self, p: &Vec3, t: f64, f: f64) -> Result<Vec3>;

    fn potential(&self, p: &Vec3, t: f64, f: f64) -> Result<f64>;

    /// RF null at blend `f`.
    fn null(&self, f: f64) -> Vec3;

    /// Region where the model is defined, if limited.
    fn bounds(&self) -> Option<Bounds> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticModel {
    potential: JunctionPotential,
    geometry: TwoLayerGeometry,
}

impl QuadraticModel {
    pub fn new(geometry: TwoLayerGeometry, params: JunctionParams) -> Self {
        Self { potential: JunctionPotential::new(geometry, params), geometry }
    }
}

impl FieldModel for QuadraticModel {
    fn gradient(&self, p: &Vec3, t: f64, f: f64) -> Result<Vec3> {
        Ok(self.potential.gradient(p, t, f))
    }

    fn potential(&self, p: &Vec3, t: f64, f: f64) -> Result<f64> {
        Ok(self.potential.value(p, t, f))
    }

    fn null(&self, f: f64) -> Vec3 {
        Vec3::new(0.0, 0.0, self.geometry.null_height(f))
    }
}

/// Distance kept between the loss box and the edge of the sampled region.
const DOMAIN_MARGIN: f64 = 0.5;

/// Electrode grids with the RF amplitude calibrated to a requested `μ` and
/// control voltages solved to realise `(α, β, γ)` at each layer's null.
#[derive(Debug, Clone)]
pub struct GridTrap {
    grid: FieldGrid,
    scales: DimensionlessScales,
    bottom_null: NullReport,
    top_null: Option<NullReport>,
    /// Volts per unit `α` and per unit `β`, indexed by electrode; top-layer
    /// controls copy their bottom counterparts.
    basis_alpha: Vec<f64>,
    basis_beta: Vec<f64>,
    control_residual: f64,
}

impl GridTrap {
    /// Prepares `grid` for the ion and drive described by `spec`. The
    /// `spec.rf_amplitude` is not used for driving; see [`GridTrap::implied_mu`].
    pub fn new(grid: FieldGrid, spec: &PhysicalTrapSpec, plane_half_separation: f64) -> Result<Self> {
        let scales = physical_to_dimensionless(spec)?;
        let bottom_null = find_rf_null(&grid, Layer::Bottom, plane_half_separation)?;
        if bottom_null.degenerate {
            return Err(Error::Geometry("bottom layer has no isolated RF null".into()));
        }
        let has_top = grid.names().iter().any(|n| classify_electrode(n) == (Layer::Top, Role::Rf));
        let top_null = if has_top { Some(find_rf_null(&grid, Layer::Top, plane_half_separation)?) } else { None };

        let controls: Vec<usize> = (0..grid.electrode_count())
            .filter(|&e| classify_electrode(&grid.names()[e]) == (Layer::Bottom, Role::Control))
            .collect();
        if controls.is_empty() {
            return Err(Error::Geometry("grid has no bottom-layer control electrodes".into()));
        }
        let p = bottom_null.position;
        let step = 0.5 * grid.spec().spacing.min();
        let mut a = DMatrix::<f64>::zeros(9, controls.len());
        for (col, &e) in controls.iter().enumerate() {
            let g = grid.sample(e, &p)?.gradient;
            let h = sampled_hessian(&grid, e, &p, step)?;
            let row = [g.x, g.y, g.z, h[(0, 0)], h[(1, 1)], h[(2, 2)], h[(0, 1)], h[(1, 2)], h[(2, 0)]];
            a.column_mut(col).copy_from_slice(&row);
        }
        let s = scales.potential_scale;
        let target_alpha = DVector::from_row_slice(&[0.0, 0.0, 0.0, 2.0 / s, 0.0, -2.0 / s, 0.0, 0.0, 0.0]);
        let target_beta = DVector::from_row_slice(&[0.0, 0.0, 0.0, 0.0, 2.0 / s, -2.0 / s, 0.0, 0.0, 0.0]);
        let svd = a.clone().svd(true, true);
        let eps = 1e-9 * svd.singular_values.max();
        let va = svd.solve(&target_alpha, eps).map_err(|e| Error::Geometry(e.to_string()))?;
        let vb = svd.solve(&target_beta, eps).map_err(|e| Error::Geometry(e.to_string()))?;
        let residual = ((&a * &va - &target_alpha).norm() / target_alpha.norm())
            .max((&a * &vb - &target_beta).norm() / target_beta.norm());

        let mut basis_alpha = vec![0.0; grid.electrode_count()];
        let mut basis_beta = vec![0.0; grid.electrode_count()];
        for (col, &e) in controls.iter().enumerate() {
            basis_alpha[e] = va[col];
            basis_beta[e] = vb[col];
            if let Some(t) = grid.electrode_index(&format!("{}_top", grid.names()[e])) {
                basis_alpha[t] = va[col];
                basis_beta[t] = vb[col];
            }
        }
        Ok(Self { grid, scales, bottom_null, top_null, basis_alpha, basis_beta, control_residual: residual })
    }

    pub fn grid(&self) -> &FieldGrid {
        &self.grid
    }

    pub fn scales(&self) -> &DimensionlessScales {
        &self.scales
    }

    pub fn bottom_null(&self) -> &NullReport {
        &self.bottom_null
    }

    pub fn top_null(&self) -> Option<&NullReport> {
        self.top_null.as_ref()
    }

    /// Relative least-squares residual of the control solution.
    pub fn control_residual(&self) -> f64 {
        self.control_residual
    }

    /// RF amplitude (V) that produces `mu` at the bottom null. Its sign
    /// follows the curvature so that the grid RF matches `+2μZ² cos 2τ`.
    pub fn rf_amplitude_for(&self, mu: f64) -> f64 {
        2.0 * mu / (self.scales.potential_scale * self.bottom_null.kappa_z)
    }

    /// `μ` produced at the bottom null by `rf_amplitude` volts.
    pub fn implied_mu(&self, rf_amplitude: f64) -> f64 {
        self.scales.mu_from_curvature(rf_amplitude, self.bottom_null.kappa_z)
    }

    /// Control voltages for `(α, β)`, indexed by electrode (zero for RF).
    pub fn control_voltages(&self, alpha: f64, beta: f64) -> Vec<f64> {
        self.basis_alpha.iter().zip(&self.basis_beta).map(|(a, b)| alpha * a + beta * b).collect()
    }

    pub fn field(&self, params: &JunctionParams) -> Result<GridField> {
        let rf = self.rf_amplitude_for(params.mu);
        let controls = self.control_voltages(params.alpha, params.beta);
        let drives: Vec<ElectrodeDrive> = self
            .grid
            .names()
            .iter()
            .enumerate()
            .map(|(e, name)| {
                let (layer, role) = classify_electrode(name);
                let voltage = match role {
                    Role::Rf => rf,
                    Role::Control => controls[e],
                };
                ElectrodeDrive { grid: 0, electrode: e, layer, role, voltage }
            })
            .collect();
        let field = superpose(&[&self.grid], &drives)?;
        let (min, max) = self.grid.sampling_domain();
        let m = Vec3::repeat(DOMAIN_MARGIN);
        let bounds = Bounds::new(min + m, max - m)?;
        let bottom = self.bottom_null.position;
        let top = self.top_null.as_ref().map_or(bottom, |n| n.position);
        Ok(GridField { field, scale: self.scales.potential_scale, bottom, top, bounds })
    }
}

fn sampled_hessian(grid: &FieldGrid, e: usize, p: &Vec3, step: f64) -> Result<Matrix3<f64>> {
    let mut h = Matrix3::zeros();
    for a in 0..3 {
        let mut hi = *p;
        let mut lo = *p;
        hi[a] += step;
        lo[a] -= step;
        let d = (grid.sample(e, &hi)?.gradient - grid.sample(e, &lo)?.gradient) / (2.0 * step);
        h.set_column(a, &d);
    }
    Ok(0.5 * (h + h.transpose()))
}

/// Superposed grid potential in model units.
#[derive(Debug, Clone)]
pub struct GridField {
    field: SuperposedField,
    scale: f64,
    bottom: Vec3,
    top: Vec3,
    bounds: Bounds,
}

impl GridField {
    pub fn superposed(&self) -> &SuperposedField {
        &self.field
    }
}

impl FieldModel for GridField {
    fn gradient(&self, p: &Vec3, t: f64, f: f64) -> Result<Vec3> {
        Ok(self.scale * self.field.sample(p, t, f)?.gradient)
    }

    fn potential(&self, p: &Vec3, t: f64, f: f64) -> Result<f64> {
        Ok(self.scale * self.field.sample(p, t, f)?.potential)
    }

    /// Linear blend of the two layer nulls; exact only at `f = 0` and `f = 1`.
    fn null(&self, f: f64) -> Vec3 {
        (1.0 - f) * self.bottom + f * self.top
    }

    fn bounds(&self) -> Option<Bounds> {
        Some(self.bounds)
    }
}
