//! Stability analysis and ion flight simulation for a two-layer Paul-trap
//! junction built from two perpendicularly rotoreflected linear traps.
//!
//! The crate is organised bottom-up:
//!
//! * [`mathieu`] classifies the one-dimensional Mathieu equation
//!   `q'' + (U + 2V cos 2t) q = 0` via the Hill determinant, with an
//!   independent Floquet (monodromy) oracle, and tabulates the boundary
//!   curves `a0`, `a1`, `b1` of the stable set.
//! * [`junction`] lifts that classifier to the three coupled axes of a
//!   linear trap and to the time-parametrised transfer path between the two
//!   layers.
//! * [`potential`] evaluates the idealised quadratic potentials, transfer
//!   profiles and the physical/dimensionless parameter mapping.
//! * [`field`] holds gridded per-electrode potentials, their smooth
//!   interpolation and an analytic gapless-plane electrode model.
//! * [`flight`] integrates ion trajectories with RK4 and measures secular
//!   frequencies.
//!
//! Internally all dynamics run on the dimensionless clock `τ` in which the RF
//! drive is `cos 2τ` (period `π`); lengths are in micrometres.

pub mod config;
pub mod error;
pub mod field;
pub mod flight;
pub mod junction;
pub mod mathieu;
pub mod potential;

pub use error::{Error, Result};
pub use field::{ElectrodeLayout, FieldGrid, GridSpec, SampledField};
pub use flight::{IonState, SimConfig, TrajectoryRecord, TransferExperiment};
pub use junction::{JunctionParams, RegionMap3D, SimpleStabilityReport, TransferStabilityReport};
pub use mathieu::{BoundaryCurves, FloquetResult, MathieuParams, StabilityResult};
pub use potential::{PhysicalTrapSpec, QuadraticCoefficients, TransferProfile, TwoLayerGeometry};

/// Three-vector used for positions, velocities and gradients.
pub type Vec3 = nalgebra::Vector3<f64>;
