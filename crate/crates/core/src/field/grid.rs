use crate::{Error, Result, Vec3};

/// Placement of a regular grid: node `(i, j, k)` sits at
/// `origin + (i·dx, j·dy, k·dz)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub origin: Vec3,
    pub spacing: Vec3,
    pub dims: [usize; 3],
}

impl GridSpec {
    pub fn new(origin: Vec3, spacing: Vec3, dims: [usize; 3]) -> Result<Self> {
        let spec = Self { origin, spacing, dims };
        spec.validate()?;
        Ok(spec)
    }

    /// Grid of `dims` nodes spanning `extent` and centred on `center`.
    pub fn centered(center: Vec3, extent: Vec3, dims: [usize; 3]) -> Result<Self> {
        if dims.iter().any(|&d| d < 2) {
            return Err(Error::InvalidArgument("grid needs at least 2 nodes per axis".into()));
        }
        let spacing = Vec3::new(
            extent.x / (dims[0] - 1) as f64,
            extent.y / (dims[1] - 1) as f64,
            extent.z / (dims[2] - 1) as f64,
        );
        Self::new(center - 0.5 * extent, spacing, dims)
    }

    /// 81×81×41 nodes over 200×200×48 µm centred on the junction.
    pub fn junction_default() -> Self {
        Self::centered(Vec3::zeros(), Vec3::new(200.0, 200.0, 48.0), [81, 81, 41])
            .expect("default grid spec")
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.iter().any(|&d| d < 4) {
            return Err(Error::InvalidArgument(format!(
                "grid needs at least 4 nodes per axis, got {:?}",
                self.dims
            )));
        }
        if !(self.spacing.iter().all(|&h| h > 0.0 && h.is_finite()) && self.origin.iter().all(|o| o.is_finite())) {
            return Err(Error::InvalidArgument("grid spacing must be positive and finite".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major index with `x` slowest and `z` fastest.
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.dims[1] + j) * self.dims[2] + k
    }

    pub fn node(&self, i: usize, j: usize, k: usize) -> Vec3 {
        self.origin + Vec3::new(i as f64 * self.spacing.x, j as f64 * self.spacing.y, k as f64 * self.spacing.z)
    }

    pub fn max_corner(&self) -> Vec3 {
        self.node(self.dims[0] - 1, self.dims[1] - 1, self.dims[2] - 1)
    }
}

/// Interpolation stencil along each axis. Both are cubic Hermite splines in
/// each cell with node tangents from finite differences of the samples, so
/// both are C¹ across cell faces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Stencil {
    /// Classic Catmull-Rom: tangents `(f₊₁ − f₋₁)/2`, 4-point stencil,
    /// exact for quadratics.
    Classic,
    /// Catmull-Rom with fourth-order tangents
    /// `(f₋₂ − 8f₋₁ + 8f₊₁ − f₊₂)/12`, 6-point stencil, exact for cubics.
    #[default]
    FourthOrder,
}

impl Stencil {
    /// Nodes needed below and above the cell's lower node.
    fn reach(self) -> (usize, usize) {
        match self {
            Stencil::Classic => (1, 2),
            Stencil::FourthOrder => (2, 3),
        }
    }

    /// Value and derivative weights on offsets `-2..=3` (unused entries zero).
    fn weights(self, t: f64) -> ([f64; 6], [f64; 6]) {
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        let d00 = 6.0 * t2 - 6.0 * t;
        let d10 = 3.0 * t2 - 4.0 * t + 1.0;
        let d01 = -6.0 * t2 + 6.0 * t;
        let d11 = 3.0 * t2 - 2.0 * t;
        let mix = |a00: f64, a10: f64, a01: f64, a11: f64| match self {
            Stencil::Classic => [0.0, -0.5 * a10, a00 - 0.5 * a11, a01 + 0.5 * a10, 0.5 * a11, 0.0],
            Stencil::FourthOrder => {
                let c = 1.0 / 12.0;
                [
                    c * a10,
                    -8.0 * c * a10 + c * a11,
                    a00 - 8.0 * c * a11,
                    a01 + 8.0 * c * a10,
                    -c * a10 + 8.0 * c * a11,
                    -c * a11,
                ]
            }
        };
        (mix(h00, h10, h01, h11), mix(d00, d10, d01, d11))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampledField {
    pub potential: f64,
    /// Exact gradient of the interpolant.
    pub gradient: Vec3,
}

impl SampledField {
    pub fn zero() -> Self {
        Self { potential: 0.0, gradient: Vec3::zeros() }
    }
}

impl std::ops::AddAssign for SampledField {
    fn add_assign(&mut self, rhs: Self) {
        self.potential += rhs.potential;
        self.gradient += rhs.gradient;
    }
}

impl std::ops::Mul<f64> for SampledField {
    type Output = SampledField;
    fn mul(self, k: f64) -> Self {
        SampledField { potential: self.potential * k, gradient: self.gradient * k }
    }
}

/// Per-electrode unit-voltage potentials on a shared regular grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrid {
    spec: GridSpec,
    names: Vec<String>,
    data: Vec<Vec<f64>>,
    stencil: Stencil,
}

impl FieldGrid {
    pub fn new(spec: GridSpec, electrodes: Vec<(String, Vec<f64>)>) -> Result<Self> {
        spec.validate()?;
        let n = spec.len();
        let mut names = Vec::with_capacity(electrodes.len());
        let mut data = Vec::with_capacity(electrodes.len());
        for (name, values) in electrodes {
            if values.len() != n {
                return Err(Error::InvalidArgument(format!(
                    "electrode {name:?} has {} samples, grid needs {n}",
                    values.len()
                )));
            }
            names.push(name);
            data.push(values);
        }
        Ok(Self { spec, names, data, stencil: Stencil::default() })
    }

    /// Samples `f(node)` for every electrode function on `spec`.
    pub fn from_fn(spec: GridSpec, names: &[&str], f: impl Fn(usize, &Vec3) -> f64) -> Result<Self> {
        let mut electrodes = Vec::new();
        for (e, name) in names.iter().enumerate() {
            let mut values = vec![0.0; spec.len()];
            for i in 0..spec.dims[0] {
                for j in 0..spec.dims[1] {
                    for k in 0..spec.dims[2] {
                        values[spec.index(i, j, k)] = f(e, &spec.node(i, j, k));
                    }
                }
            }
            electrodes.push((name.to_string(), values));
        }
        Self::new(spec, electrodes)
    }

    pub fn with_stencil(mut self, stencil: Stencil) -> Self {
        self.stencil = stencil;
        self
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn stencil(&self) -> Stencil {
        self.stencil
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn electrode_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn values(&self, electrode: usize) -> &[f64] {
        &self.data[electrode]
    }

    pub fn electrode_count(&self) -> usize {
        self.data.len()
    }

    pub fn compatible(&self, other: &FieldGrid) -> bool {
        self.spec == other.spec
    }

    /// Axis-aligned box in which the full stencil stays on the grid.
    pub fn sampling_domain(&self) -> (Vec3, Vec3) {
        let (lo, hi) = self.stencil.reach();
        let s = &self.spec;
        let mut min = Vec3::zeros();
        let mut max = Vec3::zeros();
        for a in 0..3 {
            min[a] = s.origin[a] + lo as f64 * s.spacing[a];
            max[a] = s.origin[a] + (s.dims[a] - hi) as f64 * s.spacing[a];
        }
        (min, max)
    }

    pub fn sample(&self, electrode: usize, point: &Vec3) -> Result<SampledField> {
        self.interpolate(&self.data[electrode], point)
    }

    /// Interpolates an arbitrary sample array laid out on this grid.
    pub(crate) fn interpolate(&self, values: &[f64], point: &Vec3) -> Result<SampledField> {
        let mut cell = [0usize; 3];
        let mut frac = [0.0; 3];
        let (lo, hi) = self.stencil.reach();
        for a in 0..3 {
            let last = (self.spec.dims[a] - hi) as f64;
            // absorb rounding when a point sits exactly on the domain edge
            let u = (point[a] - self.spec.origin[a]) / self.spec.spacing[a];
            let u = if (u - last).abs() < 1e-10 { last } else if (u - lo as f64).abs() < 1e-10 { lo as f64 } else { u };
            if !(u >= lo as f64 && u <= last) {
                return Err(Error::OutOfDomain { axis: ['x', 'y', 'z'][a] });
            }
            let mut i = u.floor();
            if i == last {
                i -= 1.0;
            }
            cell[a] = i as usize;
            frac[a] = u - i;
        }
        Ok(self.interpolate_cell(values, cell, frac))
    }

    pub(crate) fn interpolate_cell(&self, values: &[f64], cell: [usize; 3], frac: [f64; 3]) -> SampledField {
        let (wx, dx) = self.stencil.weights(frac[0]);
        let (wy, dy) = self.stencil.weights(frac[1]);
        let (wz, dz) = self.stencil.weights(frac[2]);
        let (lo, hi) = self.stencil.reach();
        let span = lo + hi + 1;
        let skip = 2 - lo;
        let [_, ny, nz] = self.spec.dims;

        let mut value = 0.0;
        let mut grad = [0.0; 3];
        for a in 0..span {
            let i = cell[0] + a - lo;
            let (wxa, dxa) = (wx[skip + a], dx[skip + a]);
            for b in 0..span {
                let j = cell[1] + b - lo;
                let (wyb, dyb) = (wy[skip + b], dy[skip + b]);
                let row = (i * ny + j) * nz;
                // Innermost z sums for value and z-derivative.
                let mut sv = 0.0;
                let mut sd = 0.0;
                for c in 0..span {
                    let f = values[row + cell[2] + c - lo];
                    sv += wz[skip + c] * f;
                    sd += dz[skip + c] * f;
                }
                value += wxa * wyb * sv;
                grad[0] += dxa * wyb * sv;
                grad[1] += wxa * dyb * sv;
                grad[2] += wxa * wyb * sd;
            }
        }
        let h = &self.spec.spacing;
        SampledField {
            potential: value,
            gradient: Vec3::new(grad[0] / h.x, grad[1] / h.y, grad[2] / h.z),
        }
    }
}
