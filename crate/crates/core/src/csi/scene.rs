//! Scene geometry: room, access points, reflectors, and radio parameters.

use serde::{Deserialize, Serialize};

use super::{CsiError, Result};

/// A straight wall segment used as a first-order reflector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WallSegment {
    pub a: (f32, f32),
    pub b: (f32, f32),
}

/// Static radio scene shared by every sample of a dataset.
///
/// All scalar fields are `f32` so a scene round-trips bit-exactly through
/// the dataset container; synthesis promotes to `f64` internally.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    /// Room extent in meters; positions live in `[0,width] x [0,length]`.
    pub room_width: f32,
    pub room_length: f32,
    /// Exactly three access points, inside the room.
    pub ap_positions: [(f32, f32); 3],
    /// 30 subcarrier frequencies in Hz.
    pub carrier_frequencies: Vec<f32>,
    /// Wall segments acting as first-order reflectors.
    pub reflectors: Vec<WallSegment>,
    /// Path-loss exponent gamma; amplitude scales as d^(-gamma/2).
    pub path_loss_exponent: f32,
    /// Std-dev of the per-packet complex channel perturbation (linear units).
    pub packet_noise_std: f32,
}

impl Scene {
    /// Desk-scale default: 10 m x 8 m room, APs tucked into three corners,
    /// 30 subcarriers spanning 2.402-2.482 GHz, the four room walls as
    /// reflectors.
    pub fn default_scene() -> Self {
        let (w, l) = (10.0f32, 8.0f32);
        Scene {
            room_width: w,
            room_length: l,
            ap_positions: [(0.5, 0.5), (9.5, 0.5), (0.5, 7.5)],
            carrier_frequencies: default_subcarriers(),
            reflectors: room_walls(w, l),
            path_loss_exponent: 2.0,
            packet_noise_std: 0.05,
        }
    }

    pub fn contains(&self, x: f32, y: f32) -> bool {
        x >= 0.0 && x <= self.room_width && y >= 0.0 && y <= self.room_length
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.room_width > 0.0 && self.room_length > 0.0) {
            return Err(CsiError::BadScene("room dimensions must be positive".into()));
        }
        if self.carrier_frequencies.len() != super::N_SUBCARRIERS {
            return Err(CsiError::BadScene(format!(
                "expected {} subcarriers, got {}",
                super::N_SUBCARRIERS,
                self.carrier_frequencies.len()
            )));
        }
        for &(x, y) in &self.ap_positions {
            if !self.contains(x, y) {
                return Err(CsiError::BadScene(format!("AP ({x}, {y}) outside the room")));
            }
        }
        if !self.carrier_frequencies.iter().all(|f| f.is_finite() && *f > 0.0) {
            return Err(CsiError::BadScene("carrier frequencies must be positive".into()));
        }
        if !(self.path_loss_exponent > 0.0) {
            return Err(CsiError::BadScene("path-loss exponent must be positive".into()));
        }
        if self.packet_noise_std < 0.0 {
            return Err(CsiError::BadScene("packet noise std must be non-negative".into()));
        }
        Ok(())
    }
}

/// 30 evenly spaced frequencies across the 2.402-2.482 GHz band.
pub fn default_subcarriers() -> Vec<f32> {
    let lo = 2.402e9f64;
    let hi = 2.482e9f64;
    (0..super::N_SUBCARRIERS)
        .map(|k| (lo + (hi - lo) * k as f64 / (super::N_SUBCARRIERS - 1) as f64) as f32)
        .collect()
}

/// The four walls of a `w x l` room.
pub fn room_walls(w: f32, l: f32) -> Vec<WallSegment> {
    vec![
        WallSegment { a: (0.0, 0.0), b: (w, 0.0) },
        WallSegment { a: (w, 0.0), b: (w, l) },
        WallSegment { a: (w, l), b: (0.0, l) },
        WallSegment { a: (0.0, l), b: (0.0, 0.0) },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_scene_is_valid() {
        let s = Scene::default_scene();
        s.validate().unwrap();
        assert_eq!(s.carrier_frequencies.len(), 30);
        assert_eq!(s.reflectors.len(), 4);
    }

    #[test]
    fn ap_outside_room_is_rejected() {
        let mut s = Scene::default_scene();
        s.ap_positions[1] = (11.0, 0.5);
        assert!(s.validate().is_err());
    }

    #[test]
    fn subcarriers_span_the_band() {
        let f = default_subcarriers();
        assert_eq!(f[0], 2.402e9);
        assert_eq!(f[29], 2.482e9);
        assert!(f.windows(2).all(|w| w[1] > w[0]));
    }
}
