use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;

use rayon::prelude::*;

use super::{
    simulate, Bounds, FieldModel, FieldSource, GridTrap, IonState, Outcome, QuadraticModel, Schedule, SimConfig,
    TrajectoryRecord, TransferExperiment, DEFAULT_LATERAL_BOUND, DEFAULT_PLANE_HALF_SEPARATION,
};
use crate::config::KeyValues;
use crate::field::read_grid;
use crate::junction::JunctionParams;
use crate::potential::{
    physical_to_dimensionless, DimensionlessScales, PhysicalTrapSpec, ProfileKind, TransferProfile, TwoLayerGeometry,
    ELEMENTARY_CHARGE, REFERENCE_NULL_HALF_SEPARATION, YB171_MASS,
};
use crate::{Error, Result, Vec3};

/// The four bundled reference transfers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReferenceCase {
    A,
    B,
    C,
    D,
}

impl ReferenceCase {
    pub const ALL: [ReferenceCase; 4] = [ReferenceCase::A, ReferenceCase::B, ReferenceCase::C, ReferenceCase::D];

    /// `(α, β)`.
    pub fn alpha_beta(self) -> (f64, f64) {
        match self {
            ReferenceCase::A => (0.0, 0.0),
            ReferenceCase::B => (0.2, 0.0),
            ReferenceCase::C => (0.29, 0.0),
            ReferenceCase::D => (0.29, -0.15),
        }
    }

    pub fn preset_name(self) -> &'static str {
        match self {
            ReferenceCase::A => "transfer-a",
            ReferenceCase::B => "transfer-b",
            ReferenceCase::C => "transfer-c",
            ReferenceCase::D => "transfer-d",
        }
    }
}

pub const REFERENCE_MU: f64 = 0.75;
/// Total transfer time in seconds.
pub const REFERENCE_TRANSFER_TIME: f64 = 2.9e-6;
/// Initial speed per axis in m/s.
pub const REFERENCE_SPEED: f64 = 5.0;

pub const PRESET_NAMES: [&str; 5] = ["transfer-a", "transfer-b", "transfer-c", "transfer-d", "midplane"];

/// Configuration keys of a bundled preset.
pub fn preset(name: &str) -> Result<KeyValues> {
    let mut kv = KeyValues::new();
    kv.set("mass", YB171_MASS);
    kv.set("charge", ELEMENTARY_CHARGE);
    kv.set("drive_frequency", 31e6);
    kv.set("mu", REFERENCE_MU);
    kv.set("s", REFERENCE_NULL_HALF_SEPARATION);
    let case = ReferenceCase::ALL.into_iter().find(|c| c.preset_name() == name);
    match (case, name) {
        (Some(case), _) => {
            let (alpha, beta) = case.alpha_beta();
            kv.set("alpha", alpha);
            kv.set("beta", beta);
            kv.set("profile", ProfileKind::ThreePhase);
            kv.set("transfer_time", REFERENCE_TRANSFER_TIME);
            kv.set("duration", REFERENCE_TRANSFER_TIME);
            kv.set("velocity", format!("{REFERENCE_SPEED}, {REFERENCE_SPEED}, {REFERENCE_SPEED}"));
        }
        (None, "midplane") => {
            kv.set("alpha", 0.2);
            kv.set("beta", 0.0);
            kv.set("static_f", 0.5);
            // 1001 RF periods at 31 MHz
            kv.set("duration", 1001.0 / 31e6);
            kv.set("velocity", format!("{REFERENCE_SPEED}, {REFERENCE_SPEED}, {REFERENCE_SPEED}"));
        }
        _ => return Err(Error::Config(format!("unknown preset {name:?}; known: {}", PRESET_NAMES.join(", ")))),
    }
    Ok(kv)
}

/// A configuration resolved into a runnable experiment.
#[derive(Debug, Clone)]
pub struct ResolvedRun {
    pub experiment: TransferExperiment,
    pub config: SimConfig,
    pub spec: PhysicalTrapSpec,
    pub scales: DimensionlessScales,
    /// Every setting after defaults and preset values were applied.
    pub settings: KeyValues,
    pub grid_file: Option<PathBuf>,
}

fn vec3(kv: &KeyValues, key: &str) -> Result<Option<Vec3>> {
    match kv.get_list(key)? {
        None => Ok(None),
        Some(v) if v.len() == 3 => Ok(Some(Vec3::new(v[0], v[1], v[2]))),
        Some(_) => Err(Error::Config(format!("{key} needs three comma-separated values"))),
    }
}

/// Resolves a configuration into an experiment.
///
/// Keys: `preset`, `mass` (kg), `charge` (C), `drive_frequency` (Hz), `mu`,
/// `alpha`, `beta`, `s` (µm), `profile`, `transfer_time` (s), `static_f`,
/// `duration` (s), `velocity` (m/s, `vx, vy, vz`), `offset` (µm from the
/// initial null), `dt_fraction` (of an RF period), `record_stride`,
/// `model` (`quadratic` or `grid`), `grid_file`, `plane_half_separation` (µm),
/// `bound_lateral` and `bound_vertical` (µm).
pub fn experiment_from_config(input: &KeyValues) -> Result<ResolvedRun> {
    let mut kv = input.clone();
    if let Some(name) = input.raw("preset") {
        for (k, v) in preset(name)?.iter() {
            kv.set_default(k, v);
        }
    }

    let spec = PhysicalTrapSpec {
        drive_frequency: kv.require("drive_frequency")?,
        rf_amplitude: kv.get("rf_amplitude")?.unwrap_or(PhysicalTrapSpec::reference().rf_amplitude),
        ion_mass: kv.require("mass")?,
        ion_charge: kv.require("charge")?,
        separation: 2e-6 * kv.get("plane_half_separation")?.unwrap_or(DEFAULT_PLANE_HALF_SEPARATION),
        mu: kv.require("mu")?,
    };
    let scales = physical_to_dimensionless(&spec).map_err(|e| Error::Config(e.to_string()))?;
    let params = JunctionParams::new(spec.mu, kv.require("beta")?, kv.require("alpha")?)
        .map_err(|e| Error::Config(e.to_string()))?;
    let geometry = TwoLayerGeometry::new(kv.get("s")?.unwrap_or(REFERENCE_NULL_HALF_SEPARATION))
        .map_err(|e| Error::Config(e.to_string()))?;

    let schedule = match kv.get::<f64>("static_f")? {
        Some(f) if (0.0..=1.0).contains(&f) => Schedule::Static(f),
        Some(f) => return Err(Error::Config(format!("static_f = {f} outside [0, 1]"))),
        None => {
            let kind: ProfileKind = kv.get("profile")?.unwrap_or(ProfileKind::ThreePhase);
            let t: f64 = kv.require("transfer_time")?;
            let profile =
                TransferProfile::new(kind, scales.time_to_model(t)).map_err(|e| Error::Config(e.to_string()))?;
            kv.set_default("profile", kind);
            Schedule::Transfer(profile)
        }
    };
    let duration_s: f64 = match (kv.get("duration")?, schedule) {
        (Some(d), _) => d,
        (None, Schedule::Transfer(_)) => kv.require("transfer_time")?,
        (None, Schedule::Static(_)) => return Err(Error::Config("static runs need a duration".into())),
    };

    let lateral = kv.get("bound_lateral")?.unwrap_or(DEFAULT_LATERAL_BOUND);
    let vertical = kv.get("bound_vertical")?.unwrap_or(DEFAULT_PLANE_HALF_SEPARATION);
    let bounds = Bounds::symmetric(Vec3::new(lateral, lateral, vertical)).map_err(|e| Error::Config(e.to_string()))?;
    let dt_fraction: f64 = kv.get("dt_fraction")?.unwrap_or(1.0 / 256.0);
    let model = kv.raw("model").unwrap_or("quadratic").to_string();
    let (source, grid_file) = match model.as_str() {
        "quadratic" => (FieldSource::Quadratic, None),
        "grid" => {
            let path = PathBuf::from(kv.require::<String>("grid_file")?);
            let file = std::fs::File::open(&path)?;
            let grid = read_grid(std::io::BufReader::new(file))?;
            let half = kv.get("plane_half_separation")?.unwrap_or(DEFAULT_PLANE_HALF_SEPARATION);
            (FieldSource::Grid(Arc::new(GridTrap::new(grid, &spec, half)?)), Some(path))
        }
        other => return Err(Error::Config(format!("unknown model {other:?}"))),
    };
    let config = SimConfig {
        dt: std::f64::consts::PI * dt_fraction,
        duration: scales.time_to_model(duration_s),
        bounds,
        record_stride: kv.get("record_stride")?.unwrap_or(1),
        source,
    };
    config.validate()?;

    let f0 = schedule.eval(0.0);
    let null = match &config.source {
        FieldSource::Quadratic => QuadraticModel::new(geometry, params).null(f0),
        FieldSource::Grid(trap) => trap.field(&params)?.null(f0),
    };
    let offset = vec3(&kv, "offset")?.unwrap_or_else(Vec3::zeros);
    let velocity = vec3(&kv, "velocity")?.unwrap_or_else(Vec3::zeros);
    let initial = IonState::unit(null + offset, velocity.map(|v| scales.velocity_to_model(v)));

    for (key, value) in [
        ("s", geometry.s().to_string()),
        ("duration", duration_s.to_string()),
        ("dt_fraction", dt_fraction.to_string()),
        ("record_stride", config.record_stride.to_string()),
        ("model", model),
        ("bound_lateral", lateral.to_string()),
        ("bound_vertical", vertical.to_string()),
        ("rf_amplitude", spec.rf_amplitude.to_string()),
        ("velocity", format!("{}, {}, {}", velocity.x, velocity.y, velocity.z)),
        ("offset", format!("{}, {}, {}", offset.x, offset.y, offset.z)),
    ] {
        kv.set_default(key, value);
    }
    Ok(ResolvedRun {
        experiment: TransferExperiment { params, geometry, schedule, initial },
        config,
        spec,
        scales,
        settings: kv,
        grid_file,
    })
}

/// One reference transfer in the quadratic model.
pub fn reference_experiment(case: ReferenceCase) -> TransferExperiment {
    let mut kv = preset(case.preset_name()).expect("bundled preset");
    kv.set("model", "quadratic");
    experiment_from_config(&kv).expect("bundled preset resolves").experiment
}

/// Quadratic-model configuration for the reference transfers.
pub fn reference_config() -> SimConfig {
    experiment_from_config(&preset("transfer-b").expect("bundled preset")).expect("bundled preset resolves").config
}

/// Ion held between the layers at `f = 1/2`.
pub fn midplane_experiment() -> (TransferExperiment, SimConfig) {
    let run = experiment_from_config(&preset("midplane").expect("bundled preset")).expect("bundled preset resolves");
    (run.experiment, run.config)
}

/// Mean `|z − z_null(f)|` over samples with `time ≥ from`.
pub fn z_center_offset(traj: &TrajectoryRecord, model: &dyn FieldModel, from: f64) -> f64 {
    let (sum, count) = traj
        .samples
        .iter()
        .filter(|s| s.time >= from)
        .fold((0.0, 0usize), |(sum, n), s| (sum + (s.position.z - model.null(s.f).z).abs(), n + 1));
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// Mean velocity along `axis` over samples with `f = 1`, provided the
/// position moves monotonically there; `None` when the ion turns around.
pub fn post_transfer_drift(traj: &TrajectoryRecord, axis: usize) -> Option<f64> {
    let tail: Vec<_> = traj.samples.iter().filter(|s| s.f >= 1.0).collect();
    if tail.len() < 3 {
        return None;
    }
    let steps: Vec<f64> = tail.windows(2).map(|w| w[1].position[axis] - w[0].position[axis]).collect();
    let monotone = steps.iter().all(|&d| d > 0.0) || steps.iter().all(|&d| d < 0.0);
    if !monotone {
        return None;
    }
    let span = tail.last().unwrap().time - tail[0].time;
    Some((tail.last().unwrap().position[axis] - tail[0].position[axis]) / span)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlphaSweep {
    pub alphas: Vec<f64>,
    pub outcomes: Vec<Outcome>,
}

impl AlphaSweep {
    /// Largest `α` below the first loss.
    pub fn last_confined(&self) -> Option<f64> {
        self.alphas.iter().zip(&self.outcomes).take_while(|(_, o)| o.confined()).map(|(a, _)| *a).last()
    }

    pub fn first_lost(&self) -> Option<f64> {
        self.alphas.iter().zip(&self.outcomes).find(|(_, o)| !o.confined()).map(|(a, _)| *a)
    }
}

/// Runs `base` once per `α`, keeping `μ` and `β`.
pub fn alpha_sweep(base: &TransferExperiment, cfg: &SimConfig, alphas: &[f64]) -> Result<AlphaSweep> {
    if alphas.is_empty() || alphas.windows(2).any(|w| !(w[0] < w[1])) || alphas[0] <= 0.0 {
        return Err(Error::InvalidArgument("alpha values must be positive and ascending".into()));
    }
    let outcomes = alphas
        .par_iter()
        .map(|&alpha| {
            let mut exp = base.clone();
            exp.params = JunctionParams::new(base.params.mu, base.params.beta, alpha)?;
            Ok(simulate(&exp, cfg)?.outcome)
        })
        .collect::<Result<Vec<Outcome>>>()?;
    Ok(AlphaSweep { alphas: alphas.to_vec(), outcomes })
}

pub const TRAJECTORY_FORMAT_TAG: &str = "# ionjunction trajectory v1";

/// Writes `time, x, y, z, vx, vy, vz, f` rows followed by an outcome line.
pub fn write_trajectory_csv(traj: &TrajectoryRecord, mut out: impl Write) -> Result<()> {
    let mut text = String::with_capacity(64 * traj.samples.len() + 128);
    text.push_str(TRAJECTORY_FORMAT_TAG);
    text.push_str("\ntime,x,y,z,vx,vy,vz,f\n");
    for s in &traj.samples {
        let (p, v) = (s.position, s.velocity);
        text.push_str(&format!("{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}\n", s.time, p.x, p.y, p.z, v.x, v.y, v.z, s.f));
    }
    match traj.outcome {
        Outcome::Confined => text.push_str("# outcome confined\n"),
        Outcome::Lost { axis, time } => text.push_str(&format!("# outcome lost {axis} {time:e}\n")),
    }
    out.write_all(text.as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_resolve() {
        for name in PRESET_NAMES {
            let run = experiment_from_config(&preset(name).unwrap()).unwrap();
            assert_eq!(run.experiment.params.mu, REFERENCE_MU);
            let manifest = KeyValues::parse(&run.settings.to_manifest()).unwrap();
            let again = experiment_from_config(&manifest).unwrap();
            assert_eq!(again.experiment, run.experiment);
        }
        assert!(preset("fig7").is_err());
    }

    #[test]
    fn reference_timing_and_velocity() {
        let exp = reference_experiment(ReferenceCase::B);
        match exp.schedule {
            Schedule::Transfer(p) => assert!((p.duration() - 282.4).abs() < 0.1),
            Schedule::Static(_) => panic!("transfer expected"),
        }
        assert!((exp.initial.velocity.x - 0.0513).abs() < 1e-3);
        assert_eq!(exp.initial.position, Vec3::new(0.0, 0.0, -REFERENCE_NULL_HALF_SEPARATION));
    }

    #[test]
    fn missing_mass_is_config_error() {
        let mut kv = KeyValues::new();
        for (k, v) in preset("transfer-b").unwrap().iter().filter(|(k, _)| *k != "mass") {
            kv.set(k, v);
        }
        assert!(matches!(experiment_from_config(&kv), Err(Error::Config(_))));
    }

    #[test]
    fn sweep_rejects_unsorted() {
        let exp = reference_experiment(ReferenceCase::B);
        assert!(alpha_sweep(&exp, &reference_config(), &[0.2, 0.1]).is_err());
    }
}
