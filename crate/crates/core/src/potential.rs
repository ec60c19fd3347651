//! Idealised quadratic junction potentials, transfer profiles and the
//! physical ↔ dimensionless parameter mapping.
//!
//! Dimensionless conventions: time is `τ` with RF drive `cos 2τ`, and the
//! potential `Φ` is normalised so that a unit ion obeys `r'' = −½ ∇Φ`. With
//! this normalisation each axis of `Φ = αx² + βy² + γZ² + cos 2τ (2μZ² − 2μy²)`
//! is exactly the Mathieu equation with `(U, V) = (α, 0)`, `(β, μ)` and
//! `(γ, μ)`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::junction::JunctionParams;
use crate::{Error, Result, Vec3};

/// Elementary charge in coulombs.
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
/// Mass of a ¹⁷¹Yb⁺ ion in kilograms.
pub const YB171_MASS: f64 = 2.839e-25;
/// Half the vertical separation of the two RF nulls in the reference
/// two-layer geometry (nulls 23.7 µm above 50 µm-separated planes), µm.
pub const REFERENCE_NULL_HALF_SEPARATION: f64 = 1.3;

/// Coefficients of `ax + by + cZ + dxy + eyZ + fZx + αx² + βy² + γZ²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticCoefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
    pub f: f64,
    alpha: f64,
    beta: f64,
    gamma: f64,
}

impl QuadraticCoefficients {
    /// Full form; fails unless `α + β + γ = 0` (charge-free region).
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        linear: [f64; 3],
        cross: [f64; 3],
        alpha: f64,
        beta: f64,
        gamma: f64,
    ) -> Result<Self> {
        let scale = alpha.abs().max(beta.abs()).max(gamma.abs()).max(1.0);
        if (alpha + beta + gamma).abs() > 1e-12 * scale {
            return Err(Error::InvalidArgument(format!(
                "alpha + beta + gamma = {} violates Laplace",
                alpha + beta + gamma
            )));
        }
        let [a, b, c] = linear;
        let [d, e, f] = cross;
        Ok(Self { a, b, c, d, e, f, alpha, beta, gamma })
    }

    /// The idealised junction form: only `α`, `β` and `γ = −α − β`.
    pub fn diagonal(alpha: f64, beta: f64) -> Self {
        Self {
            a: 0.0,
            b: 0.0,
            c: 0.0,
            d: 0.0,
            e: 0.0,
            f: 0.0,
            alpha,
            beta,
            gamma: -alpha - beta,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Value at `(x, y, Z)` in the trap's local frame.
    pub fn value(&self, p: &Vec3) -> f64 {
        let (x, y, z) = (p.x, p.y, p.z);
        self.a * x
            + self.b * y
            + self.c * z
            + self.d * x * y
            + self.e * y * z
            + self.f * z * x
            + self.alpha * x * x
            + self.beta * y * y
            + self.gamma * z * z
    }

    pub fn gradient(&self, p: &Vec3) -> Vec3 {
        let (x, y, z) = (p.x, p.y, p.z);
        Vec3::new(
            self.a + self.d * y + self.f * z + 2.0 * self.alpha * x,
            self.b + self.d * x + self.e * z + 2.0 * self.beta * y,
            self.c + self.e * y + self.f * x + 2.0 * self.gamma * z,
        )
    }

    /// Trace of the Hessian; zero by construction.
    pub fn laplacian(&self) -> f64 {
        2.0 * (self.alpha + self.beta + self.gamma)
    }
}

/// Control potential `αx² + βy² + γZ²` (plus any linear/cross terms).
pub fn control_potential(q: &QuadraticCoefficients, point: &Vec3) -> f64 {
    q.value(point)
}

/// RF potential `cos(2τ) · 2μ (Z² − y²)` in the trap's local frame.
pub fn rf_potential(mu: f64, point: &Vec3, t: f64) -> f64 {
    (2.0 * t).cos() * 2.0 * mu * (point.z * point.z - point.y * point.y)
}

/// Vertical placement of the two trapping nulls.
///
/// The lower trap's null sits at `z = −s` and the upper trap's at `z = +s`.
/// The upper trap is the lower one mapped by `(x, y, z) → (y, −x, −z)`, so a
/// potential `φ₀` of the lower trap induces `φ₁(x, y, z) = φ₀(y, −x, −z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoLayerGeometry {
    s: f64,
}

impl TwoLayerGeometry {
    pub fn new(s: f64) -> Result<Self> {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::InvalidArgument(format!("null half-separation must be positive, got {s}")));
        }
        Ok(Self { s })
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    /// Rotoreflection taking the lower layer onto the upper one.
    pub fn rotoreflect(p: &Vec3) -> Vec3 {
        Vec3::new(p.y, -p.x, -p.z)
    }

    /// Height of the instantaneous null of the blended potential.
    pub fn null_height(&self, f: f64) -> f64 {
        self.s * (2.0 * f - 1.0)
    }
}

impl Default for TwoLayerGeometry {
    fn default() -> Self {
        Self { s: REFERENCE_NULL_HALF_SEPARATION }
    }
}

/// The blended potential `Φ = (1 − f) φ₀ + f φ₁` for the idealised junction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JunctionPotential {
    pub geometry: TwoLayerGeometry,
    pub params: JunctionParams,
}

impl JunctionPotential {
    pub fn new(geometry: TwoLayerGeometry, params: JunctionParams) -> Self {
        Self { geometry, params }
    }

    /// Per-axis static and RF curvature coefficients at blend `f`:
    /// returns `([cx, cy, cz], [rx, ry, rz])` such that
    /// `Φ = Σ c_i u_i² + cos 2τ Σ r_i u_i²` about the centre `(0, 0, z_c)`.
    fn coefficients(&self, f: f64) -> ([f64; 3], [f64; 3]) {
        let JunctionParams { mu, beta, alpha } = self.params;
        let gamma = self.params.gamma();
        let g = 1.0 - f;
        (
            [g * alpha + f * beta, g * beta + f * alpha, gamma],
            [-2.0 * mu * f, -2.0 * mu * g, 2.0 * mu],
        )
    }

    pub fn value(&self, p: &Vec3, t: f64, f: f64) -> f64 {
        let JunctionParams { mu, beta, alpha } = self.params;
        let gamma = self.params.gamma();
        let s = self.geometry.s;
        let g = 1.0 - f;
        let (x2, y2) = (p.x * p.x, p.y * p.y);
        let lo = (p.z + s) * (p.z + s);
        let hi = (s - p.z) * (s - p.z);
        let control = (g * alpha + f * beta) * x2 + (g * beta + f * alpha) * y2 + g * gamma * lo + f * gamma * hi;
        let rf = -f * 2.0 * mu * x2 - g * 2.0 * mu * y2 + g * 2.0 * mu * lo + f * 2.0 * mu * hi;
        control + (2.0 * t).cos() * rf
    }

    pub fn gradient(&self, p: &Vec3, t: f64, f: f64) -> Vec3 {
        let (c, r) = self.coefficients(f);
        let cos = (2.0 * t).cos();
        let zc = self.geometry.null_height(f);
        Vec3::new(
            2.0 * (c[0] + cos * r[0]) * p.x,
            2.0 * (c[1] + cos * r[1]) * p.y,
            2.0 * (c[2] + cos * r[2]) * (p.z - zc),
        )
    }

    /// Diagonal of the (diagonal) Hessian.
    pub fn hessian_diagonal(&self, t: f64, f: f64) -> Vec3 {
        let (c, r) = self.coefficients(f);
        let cos = (2.0 * t).cos();
        Vec3::new(2.0 * (c[0] + cos * r[0]), 2.0 * (c[1] + cos * r[1]), 2.0 * (c[2] + cos * r[2]))
    }
}

/// Total potential at `point` and dimensionless time `t` with the blend taken
/// from `prof`.
pub fn total_potential(
    g: &TwoLayerGeometry,
    jp: &JunctionParams,
    prof: &TransferProfile,
    point: &Vec3,
    t: f64,
) -> f64 {
    JunctionPotential::new(*g, *jp).value(point, t, prof.eval(t))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProfileKind {
    /// Instantaneous switch at `T/2`.
    Heaviside,
    /// `t / T`.
    Linear,
    /// Hold at 0 until `T/3`, ramp linearly to 1 at `2T/3`, hold at 1.
    ThreePhase,
    /// `3u² − 2u³` with `u = t/T`.
    Smoothstep,
}

impl ProfileKind {
    pub const ALL: [ProfileKind; 4] =
        [ProfileKind::Heaviside, ProfileKind::Linear, ProfileKind::ThreePhase, ProfileKind::Smoothstep];
}

impl fmt::Display for ProfileKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProfileKind::Heaviside => "heaviside",
            ProfileKind::Linear => "linear",
            ProfileKind::ThreePhase => "three_phase",
            ProfileKind::Smoothstep => "smoothstep",
        })
    }
}

impl FromStr for ProfileKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "heaviside" => Ok(ProfileKind::Heaviside),
            "linear" => Ok(ProfileKind::Linear),
            "three_phase" => Ok(ProfileKind::ThreePhase),
            "smoothstep" => Ok(ProfileKind::Smoothstep),
            other => Err(Error::Config(format!("unknown profile kind {other:?}"))),
        }
    }
}

/// The blend function `f(t)`, monotone from `f(0) = 0` to `f(T) = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferProfile {
    pub kind: ProfileKind,
    duration: f64,
}

impl TransferProfile {
    pub fn new(kind: ProfileKind, duration: f64) -> Result<Self> {
        if !(duration > 0.0 && duration.is_finite()) {
            return Err(Error::InvalidArgument(format!("profile duration must be positive, got {duration}")));
        }
        Ok(Self { kind, duration })
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    /// `f(t)`; times outside `[0, T]` are clamped.
    pub fn eval(&self, t: f64) -> f64 {
        let u = (t / self.duration).clamp(0.0, 1.0);
        match self.kind {
            ProfileKind::Heaviside => {
                if u < 0.5 {
                    0.0
                } else {
                    1.0
                }
            }
            ProfileKind::Linear => u,
            ProfileKind::ThreePhase => (3.0 * u - 1.0).clamp(0.0, 1.0),
            ProfileKind::Smoothstep => u * u * (3.0 - 2.0 * u),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalTrapSpec {
    /// `Ω / 2π` in hertz.
    pub drive_frequency: f64,
    /// RF amplitude in volts.
    pub rf_amplitude: f64,
    pub ion_mass: f64,
    pub ion_charge: f64,
    /// Separation of the two electrode planes in metres.
    pub separation: f64,
    /// Dimensionless RF strength (the Mathieu `V` of the radial axes).
    pub mu: f64,
}

impl PhysicalTrapSpec {
    /// 31 MHz, 56 V, ¹⁷¹Yb⁺, 50 µm planes, `μ = 0.25`.
    pub fn reference() -> Self {
        Self {
            drive_frequency: 31e6,
            rf_amplitude: 56.0,
            ion_mass: YB171_MASS,
            ion_charge: ELEMENTARY_CHARGE,
            separation: 50e-6,
            mu: 0.25,
        }
    }

    pub fn with_mu(self, mu: f64) -> Self {
        Self { mu, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("drive_frequency", self.drive_frequency),
            ("rf_amplitude", self.rf_amplitude),
            ("ion_mass", self.ion_mass),
            ("ion_charge", self.ion_charge),
            ("separation", self.separation),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return Err(Error::InvalidArgument(format!("mu must be non-negative, got {}", self.mu)));
        }
        Ok(())
    }

    pub fn angular_drive(&self) -> f64 {
        2.0 * PI * self.drive_frequency
    }
}

/// Conversion factors between the physical trap and the dimensionless model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DimensionlessScales {
    pub mu: f64,
    /// Seconds per unit of `τ` (`2 / Ω`).
    pub time_scale: f64,
    /// Metres per model length unit (one micrometre).
    pub length_scale: f64,
    /// Dimensionless potential (µm²) per volt: `Φ = potential_scale · φ[V]`.
    pub potential_scale: f64,
    /// Small-`μ` secular estimate `μΩ / (2√2)` in rad/s.
    pub secular_estimate: f64,
    pub drive_angular: f64,
}

impl DimensionlessScales {
    /// Physical velocity (m/s) to model velocity (µm per `τ`).
    pub fn velocity_to_model(&self, v: f64) -> f64 {
        v * self.time_scale / self.length_scale
    }

    pub fn velocity_to_physical(&self, v: f64) -> f64 {
        v * self.length_scale / self.time_scale
    }

    pub fn time_to_model(&self, seconds: f64) -> f64 {
        seconds / self.time_scale
    }

    pub fn time_to_physical(&self, tau: f64) -> f64 {
        tau * self.time_scale
    }

    /// Angular frequency in rad per `τ` to hertz.
    pub fn frequency_to_hz(&self, omega_tau: f64) -> f64 {
        omega_tau / self.time_scale / (2.0 * PI)
    }

    pub fn secular_estimate_hz(&self) -> f64 {
        self.secular_estimate / (2.0 * PI)
    }

    /// `μ` produced by `rf_amplitude` volts on an electrode whose unit-volt
    /// potential has vertical curvature `kappa` (V/µm² per volt, i.e. the
    /// coefficient of `Z²`).
    pub fn mu_from_curvature(&self, rf_amplitude: f64, kappa: f64) -> f64 {
        0.5 * self.potential_scale * rf_amplitude * kappa
    }

    /// Dimensionless coefficient for a physical curvature `kappa` (V/µm²).
    pub fn coefficient_from_curvature(&self, kappa: f64) -> f64 {
        self.potential_scale * kappa
    }
}

/// Maps a physical trap onto the dimensionless clock `τ = Ωt/2` used by the
/// Mathieu classifier and the flight simulator.
pub fn physical_to_dimensionless(spec: &PhysicalTrapSpec) -> Result<DimensionlessScales> {
    spec.validate()?;
    let omega = spec.angular_drive();
    let length_scale = 1e-6;
    // r'' (µm/τ²) = −(4/Ω²)(q/m)·1e12·∇φ[V/µm] = −½ ∇Φ
    let potential_scale = 8.0 * spec.ion_charge / (spec.ion_mass * omega * omega) / (length_scale * length_scale);
    Ok(DimensionlessScales {
        mu: spec.mu,
        time_scale: 2.0 / omega,
        length_scale,
        potential_scale,
        secular_estimate: spec.mu * omega / (2.0 * 2f64.sqrt()),
        drive_angular: omega,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn jp(mu: f64, beta: f64, alpha: f64) -> JunctionParams {
        JunctionParams::new(mu, beta, alpha).unwrap()
    }

    #[test]
    fn control_examples() {
        let q = QuadraticCoefficients::diagonal(0.2, 0.0);
        assert_eq!(control_potential(&q, &Vec3::new(1.0, 1.0, 1.0)), 0.0);
        let q = QuadraticCoefficients::diagonal(0.29, -0.15);
        assert_relative_eq!(q.gamma(), -0.14, epsilon = 1e-15);
        assert_relative_eq!(control_potential(&q, &Vec3::new(1.0, 0.0, 0.0)), 0.29);
        assert_eq!(control_potential(&q, &Vec3::zeros()), 0.0);
        assert!(QuadraticCoefficients::new([0.0; 3], [0.0; 3], 0.2, 0.1, 0.0).is_err());
    }

    #[test]
    fn rf_examples() {
        assert_eq!(rf_potential(0.25, &Vec3::new(0.0, 1.0, 1.0), 0.0), 0.0);
        assert_relative_eq!(rf_potential(0.75, &Vec3::new(0.0, 1.0, 0.0), 0.0), -1.5);
        assert!(rf_potential(0.4, &Vec3::new(0.3, -2.0, 0.7), PI / 4.0).abs() < 1e-15);
    }

    #[test]
    fn endpoint_reduction() {
        let pot = JunctionPotential::new(TwoLayerGeometry::new(1.3).unwrap(), jp(0.75, -0.15, 0.29));
        let p = Vec3::new(0.4, -0.3, 0.2);
        let t = 0.37;
        let q = QuadraticCoefficients::diagonal(0.29, -0.15);
        let local0 = Vec3::new(p.x, p.y, p.z + 1.3);
        let phi0 = control_potential(&q, &local0) + rf_potential(0.75, &local0, t);
        assert_relative_eq!(pot.value(&p, t, 0.0), phi0, epsilon = 1e-14);
        let local1 = Vec3::new(p.y, -p.x, 1.3 - p.z);
        let phi1 = control_potential(&q, &local1) + rf_potential(0.75, &local1, t);
        assert_relative_eq!(pot.value(&p, t, 1.0), phi1, epsilon = 1e-14);
    }

    #[test]
    fn midpoint_symmetry() {
        let pot = JunctionPotential::new(TwoLayerGeometry::default(), jp(0.75, 0.0, 0.2));
        let h = pot.hessian_diagonal(0.1, 0.5);
        assert_relative_eq!(h.x, h.y, epsilon = 1e-15);
        // midplane static solution: null at z = 0, confining in all three axes
        assert_eq!(pot.gradient(&Vec3::zeros(), 0.3, 0.5), Vec3::zeros());
    }

    #[test]
    fn profile_examples() {
        let p = TransferProfile::new(ProfileKind::ThreePhase, 6.0).unwrap();
        assert_eq!(p.eval(1.0), 0.0);
        assert_relative_eq!(p.eval(3.0), 0.5, epsilon = 1e-15);
        assert_eq!(p.eval(6.0), 1.0);
        let h = TransferProfile::new(ProfileKind::Heaviside, 2.0).unwrap();
        assert_eq!((h.eval(0.99), h.eval(1.0)), (0.0, 1.0));
        assert!(TransferProfile::new(ProfileKind::Linear, 0.0).is_err());
    }

    #[test]
    fn reference_secular_estimate() {
        let s = physical_to_dimensionless(&PhysicalTrapSpec::reference()).unwrap();
        let f = s.secular_estimate_hz();
        assert!((f / 2.74e6 - 1.0).abs() < 1e-3, "{f}");
        assert!((f / 2.75e6 - 1.0).abs() < 0.01);
        let zero = physical_to_dimensionless(&PhysicalTrapSpec::reference().with_mu(0.0)).unwrap();
        assert_eq!(zero.secular_estimate, 0.0);
        let strong = physical_to_dimensionless(&PhysicalTrapSpec::reference().with_mu(0.75)).unwrap();
        assert!((strong.secular_estimate_hz() / 8.22e6 - 1.0).abs() < 1e-3);
    }

    #[test]
    fn scale_round_trips() {
        let s = physical_to_dimensionless(&PhysicalTrapSpec::reference()).unwrap();
        assert_relative_eq!(s.velocity_to_physical(s.velocity_to_model(5.0)), 5.0, epsilon = 1e-12);
        assert_relative_eq!(s.frequency_to_hz(1.0), 31e6 / 2.0, epsilon = 1e-6);
        let mut bad = PhysicalTrapSpec::reference();
        bad.ion_mass = 0.0;
        assert!(physical_to_dimensionless(&bad).is_err());
    }
}
