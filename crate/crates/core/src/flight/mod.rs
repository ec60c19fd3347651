//! Ion trajectories through static and transfer scenarios.
//!
//! All integration happens in model units: positions in µm, time in `τ`
//! (RF period `π`) and potentials in the dimensionless `Φ`. A unit ion has
//! charge 1 and mass 2, so its acceleration is `−½ ∇Φ`.

mod experiments;
mod model;
mod secular;

use std::sync::Arc;

pub use experiments::{
    alpha_sweep, experiment_from_config, reference_config, reference_experiment, midplane_experiment, post_transfer_drift, preset,
    write_trajectory_csv, z_center_offset, AlphaSweep, ReferenceCase, ResolvedRun, REFERENCE_MU, REFERENCE_SPEED, REFERENCE_TRANSFER_TIME,
    PRESET_NAMES, TRAJECTORY_FORMAT_TAG,
};
pub use model::{FieldModel, GridField, GridTrap, QuadraticModel};
pub use secular::measure_secular_frequency;

use std::f64::consts::PI;

use crate::junction::JunctionParams;
use crate::potential::{TransferProfile, TwoLayerGeometry};
use crate::{Error, Result, Vec3};

/// RF period in `τ`.
pub const RF_PERIOD: f64 = PI;
/// Default step: 256 steps per RF period.
pub const DEFAULT_DT: f64 = PI / 256.0;
/// Half-separation of the electrode planes used for the default loss box.
pub const DEFAULT_PLANE_HALF_SEPARATION: f64 = 25.0;
/// Lateral half-width of the default loss box.
pub const DEFAULT_LATERAL_BOUND: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IonState {
    pub charge: f64,
    pub mass: f64,
    pub position: Vec3,
    pub velocity: Vec3,
    pub time: f64,
}

impl IonState {
    pub fn new(charge: f64, mass: f64, position: Vec3, velocity: Vec3, time: f64) -> Result<Self> {
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::InvalidArgument(format!("mass must be positive, got {mass}")));
        }
        Ok(Self { charge, mass, position, velocity, time })
    }

    /// Dimensionless unit ion at `t = 0`.
    pub fn unit(position: Vec3, velocity: Vec3) -> Self {
        Self { charge: 1.0, mass: 2.0, position, velocity, time: 0.0 }
    }
}

/// One classical RK4 step of `p' = v`, `v' = −(c/m) ∇Φ(p, t)`.
pub fn rk4_step<F>(state: &IonState, gradient: F, dt: f64) -> Result<IonState>
where
    F: Fn(&Vec3, f64) -> Result<Vec3>,
{
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    let k = -state.charge / state.mass;
    let (p, v, t) = (state.position, state.velocity, state.time);
    let h = 0.5 * dt;

    let a1 = k * gradient(&p, t)?;
    let (p2, v2) = (p + h * v, v + h * a1);
    let a2 = k * gradient(&p2, t + h)?;
    let (p3, v3) = (p + h * v2, v + h * a2);
    let a3 = k * gradient(&p3, t + h)?;
    let (p4, v4) = (p + dt * v3, v + dt * a3);
    let a4 = k * gradient(&p4, t + dt)?;

    Ok(IonState {
        position: p + dt / 6.0 * (v + 2.0 * v2 + 2.0 * v3 + v4),
        velocity: v + dt / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4),
        time: t + dt,
        ..*state
    })
}

/// Layer blend `f(t)` over a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Schedule {
    Static(f64),
    Transfer(TransferProfile),
}

impl Schedule {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Schedule::Static(f) => *f,
            Schedule::Transfer(p) => p.eval(t),
        }
    }
}

/// Axis-aligned loss box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub min: Vec3,
    pub max: Vec3,
}

impl Bounds {
    pub fn new(min: Vec3, max: Vec3) -> Result<Self> {
        if !(0..3).all(|a| min[a] < max[a]) {
            return Err(Error::InvalidArgument("loss box is empty".into()));
        }
        Ok(Self { min, max })
    }

    pub fn symmetric(half: Vec3) -> Result<Self> {
        Self::new(-half, half)
    }

    /// `|x|, |y| ≤ 100 µm`, `|z| ≤ 25 µm`.
    pub fn junction_default() -> Self {
        let l = DEFAULT_LATERAL_BOUND;
        Self::symmetric(Vec3::new(l, l, DEFAULT_PLANE_HALF_SEPARATION)).expect("default box")
    }

    /// First axis on which `p` lies outside the box.
    pub fn violated_axis(&self, p: &Vec3) -> Option<char> {
        (0..3).find(|&a| !(p[a] >= self.min[a] && p[a] <= self.max[a])).map(|a| ['x', 'y', 'z'][a])
    }

    pub fn intersect(&self, other: &Bounds) -> Result<Bounds> {
        Bounds::new(self.min.sup(&other.min), self.max.inf(&other.max))
    }
}

/// Which potential drives the ion.
#[derive(Debug, Clone)]
pub enum FieldSource {
    /// Ideal quadratic junction potential.
    Quadratic,
    /// Superposed electrode grids with calibrated voltages.
    Grid(Arc<GridTrap>),
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    /// Step in `τ`; at most one 64th of an RF period.
    pub dt: f64,
    /// Run length in `τ`.
    pub duration: f64,
    pub bounds: Bounds,
    /// Record every `record_stride`-th step.
    pub record_stride: usize,
    pub source: FieldSource,
}

impl SimConfig {
    pub fn new(duration: f64) -> Self {
        Self {
            dt: DEFAULT_DT,
            duration,
            bounds: Bounds::junction_default(),
            record_stride: 1,
            source: FieldSource::Quadratic,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt <= RF_PERIOD / 64.0 * (1.0 + 1e-12)) {
            return Err(Error::Config(format!("dt = {} must be in (0, π/64]", self.dt)));
        }
        if !(self.duration >= 0.0 && self.duration.is_finite()) {
            return Err(Error::Config(format!("duration must be non-negative, got {}", self.duration)));
        }
        if self.record_stride == 0 {
            return Err(Error::Config("record stride must be at least 1".into()));
        }
        Bounds::new(self.bounds.min, self.bounds.max).map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }
}

/// Parameters, blend schedule and initial state of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferExperiment {
    pub params: JunctionParams,
    pub geometry: TwoLayerGeometry,
    pub schedule: Schedule,
    pub initial: IonState,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub time: f64,
    pub position: Vec3,
    pub velocity: Vec3,
    pub f: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Outcome {
    Confined,
    Lost { axis: char, time: f64 },
}

impl Outcome {
    pub fn confined(&self) -> bool {
        matches!(self, Outcome::Confined)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub samples: Vec<Sample>,
    pub outcome: Outcome,
    /// Time between regularly recorded samples. A lost run also records the
    /// final out-of-bounds state, which may fall off this spacing.
    pub sample_interval: f64,
}

/// Runs `exp` under `cfg`.
pub fn simulate(exp: &TransferExperiment, cfg: &SimConfig) -> Result<TrajectoryRecord> {
    cfg.validate()?;
    match &cfg.source {
        FieldSource::Quadratic => {
            let model = QuadraticModel::new(exp.geometry, exp.params);
            simulate_in(&model, exp, cfg)
        }
        FieldSource::Grid(trap) => {
            let model = trap.field(&exp.params)?;
            simulate_in(&model, exp, cfg)
        }
    }
}

/// Runs `exp` in an explicit field model; the loss box is the intersection of
/// `cfg.bounds` and the model's own bounds.
pub fn simulate_in(model: &dyn FieldModel, exp: &TransferExperiment, cfg: &SimConfig) -> Result<TrajectoryRecord> {
    cfg.validate()?;
    let bounds = match model.bounds() {
        Some(b) => cfg.bounds.intersect(&b)?,
        None => cfg.bounds,
    };
    let steps = (cfg.duration / cfg.dt).round() as usize;
    let schedule = exp.schedule;
    let grad = |p: &Vec3, t: f64| model.gradient(p, t, schedule.eval(t));

    let mut state = exp.initial;
    let record = |s: &IonState| Sample {
        time: s.time,
        position: s.position,
        velocity: s.velocity,
        f: schedule.eval(s.time),
    };
    let mut samples = Vec::with_capacity(steps / cfg.record_stride + 2);
    samples.push(record(&state));
    if let Some(axis) = bounds.violated_axis(&state.position) {
        return Ok(TrajectoryRecord {
            samples,
            outcome: Outcome::Lost { axis, time: state.time },
            sample_interval: cfg.dt * cfg.record_stride as f64,
        });
    }
    let mut outcome = Outcome::Confined;
    for n in 1..=steps {
        state = rk4_step(&state, grad, cfg.dt)?;
        // keep time on the exact step lattice
        state.time = n as f64 * cfg.dt + exp.initial.time;
        if let Some(axis) = bounds.violated_axis(&state.position) {
            samples.push(record(&state));
            outcome = Outcome::Lost { axis, time: state.time };
            break;
        }
        if n % cfg.record_stride == 0 {
            samples.push(record(&state));
        }
    }
    Ok(TrajectoryRecord { samples, outcome, sample_interval: cfg.dt * cfg.record_stride as f64 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn free_flight_is_exact() {
        let s = IonState::unit(Vec3::zeros(), Vec3::new(1.0, 0.0, 0.0));
        let h = 0.125;
        let next = rk4_step(&s, |_, _| Ok(Vec3::zeros()), h).unwrap();
        assert_eq!(next.position, Vec3::new(h, 0.0, 0.0));
        assert_eq!(next.velocity, s.velocity);
        assert_eq!(next.charge, s.charge);
    }

    #[test]
    fn harmonic_energy_drift() {
        // Φ = ω² r² gives r'' = −ω² r for the unit ion.
        let omega: f64 = 0.7;
        let grad = |p: &Vec3, _t: f64| Ok(2.0 * omega * omega * p);
        let energy = |s: &IonState| 0.5 * s.velocity.norm_squared() + 0.5 * omega * omega * s.position.norm_squared();
        let period = 2.0 * PI / omega;
        let dt = period / 256.0;
        let mut s = IonState::unit(Vec3::new(1.0, -0.5, 0.25), Vec3::new(0.0, 0.3, 0.0));
        let e0 = energy(&s);
        for _ in 0..256 {
            s = rk4_step(&s, grad, dt).unwrap();
        }
        assert!(((energy(&s) - e0) / e0).abs() < 1e-8);
    }

    #[test]
    fn ion_at_null_stays() {
        let params = JunctionParams::new(0.25, 0.1, 0.1).unwrap();
        let g = TwoLayerGeometry::default();
        let exp = TransferExperiment {
            params,
            geometry: g,
            schedule: Schedule::Static(0.0),
            initial: IonState::unit(Vec3::new(0.0, 0.0, -g.s()), Vec3::zeros()),
        };
        let rec = simulate(&exp, &SimConfig::new(200.0)).unwrap();
        assert!(rec.outcome.confined());
        for s in &rec.samples {
            assert!((s.position - Vec3::new(0.0, 0.0, -g.s())).norm() < 1e-12);
        }
    }

    #[test]
    fn loss_is_detected_and_recorded() {
        let g = TwoLayerGeometry::default();
        let exp = TransferExperiment {
            params: JunctionParams::new(0.25, 0.1, 0.0).unwrap(),
            geometry: g,
            schedule: Schedule::Static(0.0),
            initial: IonState::unit(Vec3::new(0.0, 0.0, -g.s()), Vec3::new(2.0, 0.0, 0.0)),
        };
        let mut cfg = SimConfig::new(200.0);
        cfg.record_stride = 16;
        let rec = simulate(&exp, &cfg).unwrap();
        match rec.outcome {
            Outcome::Lost { axis, time } => {
                assert_eq!(axis, 'x');
                assert_relative_eq!(time, 50.0, epsilon = 0.05);
                assert!(rec.samples.last().unwrap().position.x > 100.0);
            }
            Outcome::Confined => panic!("free axial drift must be lost"),
        }
    }

    #[test]
    fn config_validation() {
        let mut cfg = SimConfig::new(1.0);
        cfg.dt = PI / 32.0;
        assert!(cfg.validate().is_err());
        cfg.dt = DEFAULT_DT;
        cfg.record_stride = 0;
        assert!(cfg.validate().is_err());
        assert!(Bounds::new(Vec3::zeros(), Vec3::new(1.0, 0.0, 1.0)).is_err());
    }
}
