use serde::{Deserialize, Serialize};

use super::{Direction3, Point3, DEFAULT_WAVELENGTH_NM};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RayStatus {
    Alive,
    Vignetted,
    Absorbed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ray {
    pub origin: Point3,
    pub direction: Direction3,
    pub status: RayStatus,
    pub wavelength_nm: f64,
}

impl Ray {
    pub fn new(origin: Point3, direction: Direction3) -> Self {
        Self {
            origin,
            direction,
            status: RayStatus::Alive,
            wavelength_nm: DEFAULT_WAVELENGTH_NM,
        }
    }

    pub fn at(&self, distance: f64) -> Point3 {
        self.origin + distance * self.direction.as_ref()
    }

    pub fn is_alive(&self) -> bool {
        self.status == RayStatus::Alive
    }
}
