//! Directions on the sphere and the microphone array description.
//!
//! Angles are stored in degrees. The polar coordinate is the *inclination*
//! measured from the +z axis; elevation only appears at reporting
//! boundaries (see [`Direction::elevation`]).

use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harmonics::{evaluate_sh_basis, ShOrder};

/// The reference 32-capsule rigid-sphere geometry shipped with the crate.
pub const REFERENCE_GEOMETRY_JSON: &str = include_str!("../data/em32.json");

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direction {
    azimuth: f64,
    inclination: f64,
}

impl Direction {
    /// Builds a direction, wrapping azimuth into `[0, 360)`.
    ///
    /// Inclination outside `[0, 180]` is rejected rather than clamped.
    pub fn new(azimuth_deg: f64, inclination_deg: f64) -> Result<Self> {
        if !azimuth_deg.is_finite() || !inclination_deg.is_finite() {
            return Err(Error::NonFiniteAngle);
        }
        if !(0.0..=180.0).contains(&inclination_deg) {
            return Err(Error::InclinationOutOfRange(inclination_deg));
        }
        Ok(Self {
            azimuth: wrap_azimuth(azimuth_deg),
            inclination: inclination_deg,
        })
    }

    /// Builds a direction from azimuth and elevation (`90 - inclination`).
    pub fn from_elevation(azimuth_deg: f64, elevation_deg: f64) -> Result<Self> {
        Self::new(azimuth_deg, 90.0 - elevation_deg)
    }

    /// Direction of a non-zero Cartesian vector. Returns `None` for the zero
    /// vector or non-finite input.
    pub fn from_vector(v: &Vector3<f64>) -> Option<Self> {
        let norm = v.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return None;
        }
        let inclination = (v.z / norm).clamp(-1.0, 1.0).acos().to_degrees();
        let azimuth = v.y.atan2(v.x).to_degrees();
        Some(Self {
            azimuth: wrap_azimuth(azimuth),
            inclination,
        })
    }

    pub fn azimuth(&self) -> f64 {
        self.azimuth
    }

    pub fn inclination(&self) -> f64 {
        self.inclination
    }

    pub fn elevation(&self) -> f64 {
        90.0 - self.inclination
    }

    /// `(sin θ cos φ, sin θ sin φ, cos θ)` with θ the inclination and φ the
    /// azimuth.
    pub fn unit_vector(&self) -> Vector3<f64> {
        let (st, ct) = self.inclination.to_radians().sin_cos();
        let (sp, cp) = self.azimuth.to_radians().sin_cos();
        Vector3::new(st * cp, st * sp, ct)
    }

    /// Great-circle angle to `other`, in degrees.
    pub fn angle_to(&self, other: &Direction) -> f64 {
        let (u, v) = (self.unit_vector(), other.unit_vector());
        u.cross(&v).norm().atan2(u.dot(&v)).to_degrees()
    }
}

fn wrap_azimuth(az: f64) -> f64 {
    let w = az.rem_euclid(360.0);
    // rem_euclid of a tiny negative value can round up to exactly 360.
    if w >= 360.0 {
        0.0
    } else {
        w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Baffle {
    RigidSphere,
    OpenSphere,
}

#[derive(Debug, Clone)]
pub struct ArrayGeometry {
    pub label: String,
    pub radius: f64,
    pub baffle: Baffle,
    pub sensors: Vec<Direction>,
}

/// On-disk form of [`ArrayGeometry`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryFile {
    pub label: String,
    pub radius_m: f64,
    pub baffle: Baffle,
    pub sensors: Vec<SensorEntry>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorEntry {
    pub az_deg: f64,
    pub incl_deg: f64,
}

impl ArrayGeometry {
    /// Validates and builds a geometry able to resolve SH order `order`.
    pub fn new(
        label: impl Into<String>,
        radius: f64,
        baffle: Baffle,
        sensors: Vec<Direction>,
        order: ShOrder,
    ) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidGeometry(format!(
                "radius must be positive, got {radius}"
            )));
        }
        let needed = order.channels();
        if sensors.len() < needed {
            return Err(Error::InsufficientSensors {
                sensors: sensors.len(),
                order: order.get(),
                needed,
            });
        }
        for (i, a) in sensors.iter().enumerate() {
            for (j, b) in sensors.iter().enumerate().skip(i + 1) {
                if a.angle_to(b) < 1e-9 {
                    return Err(Error::InvalidGeometry(format!(
                        "sensors {i} and {j} share a direction"
                    )));
                }
            }
        }
        Ok(Self {
            label: label.into(),
            radius,
            baffle,
            sensors,
        })
    }

    pub fn from_json(text: &str, order: ShOrder) -> Result<Self> {
        let file: GeometryFile = serde_json::from_str(text).map_err(|e| Error::Parse {
            what: "geometry file",
            message: e.to_string(),
        })?;
        let sensors = file
            .sensors
            .iter()
            .map(|s| Direction::new(s.az_deg, s.incl_deg))
            .collect::<Result<Vec<_>>>()?;
        Self::new(file.label, file.radius_m, file.baffle, sensors, order)
    }

    /// The shipped 32-sensor rigid-sphere array (radius 4.2 cm).
    pub fn reference(order: ShOrder) -> Result<Self> {
        Self::from_json(REFERENCE_GEOMETRY_JSON, order)
    }

    pub fn to_file(&self) -> GeometryFile {
        GeometryFile {
            label: self.label.clone(),
            radius_m: self.radius,
            baffle: self.baffle,
            sensors: self
                .sensors
                .iter()
                .map(|d| SensorEntry {
                    az_deg: d.azimuth(),
                    incl_deg: d.inclination(),
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.sensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sensors.is_empty()
    }

    /// 2-norm condition number of the order-`order` encoding matrix.
    pub fn condition_number(&self, order: ShOrder) -> f64 {
        let y = evaluate_sh_basis(&self.sensors, order);
        let sv = y.singular_values();
        let max = sv.max();
        let min = sv.min();
        if min > 0.0 {
            max / min
        } else {
            f64::INFINITY
        }
    }
}

/// Reads a geometry file and checks it can resolve SH order `order`.
pub fn load_geometry(path: impl AsRef<Path>, order: ShOrder) -> Result<ArrayGeometry> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ArrayGeometry::from_json(&text, order)
}
