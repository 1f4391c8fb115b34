//! Image-method channel synthesis for one labeled CSI sample.
//!
//! Feature tensor layout `[6, 75, 30]`, row-major:
//! - channels 0-2: amplitude seen by receive antennas 0-2,
//! - channels 3-5: phase (radians in `[-pi, pi)`) for the same antennas,
//! - rows: 25 packets x 3 APs, AP-major (`row = ap * 25 + packet`),
//! - columns: the 30 subcarriers.
//!
//! Antenna 0 sits exactly at the labeled position; antennas 1 and 2 are
//! offset by half a mid-band wavelength along x and y. The complex channel
//! per (AP, antenna, subcarrier) is the line-of-sight path plus one
//! first-order image-method reflection per visible wall segment:
//! `h = sum_paths d^(-gamma/2) * exp(-j*2*pi*f*d/c)`, with every path
//! length clamped to `D_MIN`. Packets add seeded complex Gaussian noise.

use rand_distr::{Distribution, Normal};

use crate::nn::Array;
use crate::rng::{derive_seed, rng_from_seed};

use super::{CsiError, Result, Scene, WallSegment};

pub const N_APS: usize = 3;
pub const N_PACKETS: usize = 25;
pub const N_SUBCARRIERS: usize = 30;
pub const N_ANTENNAS: usize = 3;
/// Amplitude occupies channels `0..AMP_CHANNELS`, phase the rest.
pub const AMP_CHANNELS: usize = N_ANTENNAS;
pub const SAMPLE_SHAPE: [usize; 3] = [2 * N_ANTENNAS, N_APS * N_PACKETS, N_SUBCARRIERS];
pub const FEATURE_LEN: usize = SAMPLE_SHAPE[0] * SAMPLE_SHAPE[1] * SAMPLE_SHAPE[2];
pub const HALF_LEN: usize = FEATURE_LEN / 2;

/// Shortest usable path length in meters; keeps amplitudes finite when a
/// query position coincides with an AP.
pub const D_MIN: f64 = 0.1;

const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Half of the mid-band (2.442 GHz) wavelength, in meters.
const ANTENNA_STEP: f64 = 0.0614;
const ANTENNA_OFFSETS: [(f64, f64); N_ANTENNAS] =
    [(0.0, 0.0), (ANTENNA_STEP, 0.0), (0.0, ANTENNA_STEP)];

/// One labeled CSI measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct CsiSample {
    /// Feature tensor `[6, 75, 30]`.
    pub features: Array<f32>,
    /// Ground-truth position in meters.
    pub label: (f32, f32),
}

impl CsiSample {
    /// Flattened amplitude half (channels 0-2), 6,750 scalars.
    pub fn amplitude_half(&self) -> &[f32] {
        &self.features.as_slice()[..HALF_LEN]
    }

    /// Flattened phase half (channels 3-5), 6,750 scalars.
    pub fn phase_half(&self) -> &[f32] {
        &self.features.as_slice()[HALF_LEN..]
    }

    pub fn flat(&self) -> &[f32] {
        self.features.as_slice()
    }
}

/// Wraps an angle to `[-pi, pi)`.
pub fn wrap_phase(p: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut w = p - two_pi * (p / two_pi).round();
    if w >= std::f64::consts::PI {
        w -= two_pi;
    } else if w < -std::f64::consts::PI {
        w += two_pi;
    }
    w
}

#[derive(Clone, Copy)]
struct Complex {
    re: f64,
    im: f64,
}

/// Mirror of `p` across the infinite line through the segment.
fn mirror_across(seg: &WallSegment, p: (f64, f64)) -> (f64, f64) {
    let (ax, ay) = (seg.a.0 as f64, seg.a.1 as f64);
    let (bx, by) = (seg.b.0 as f64, seg.b.1 as f64);
    let (dx, dy) = (bx - ax, by - ay);
    let len2 = dx * dx + dy * dy;
    let t = ((p.0 - ax) * dx + (p.1 - ay) * dy) / len2;
    let (fx, fy) = (ax + t * dx, ay + t * dy);
    (2.0 * fx - p.0, 2.0 * fy - p.1)
}

/// Reflection-point parameter along the segment for the image -> rx ray,
/// or `None` when the bounce lands outside the physical wall.
fn reflection_on_segment(seg: &WallSegment, image: (f64, f64), rx: (f64, f64)) -> Option<f64> {
    let (ax, ay) = (seg.a.0 as f64, seg.a.1 as f64);
    let (bx, by) = (seg.b.0 as f64, seg.b.1 as f64);
    let (sx, sy) = (bx - ax, by - ay);
    let (rx_dx, rx_dy) = (rx.0 - image.0, rx.1 - image.1);
    let denom = sx * rx_dy - sy * rx_dx;
    if denom.abs() < 1e-12 {
        return None; // ray parallel to the wall
    }
    // Solve image + u*(rx-image) == a + t*(b-a).
    let t = ((image.0 - ax) * rx_dy - (image.1 - ay) * rx_dx) / denom;
    let u = if rx_dx.abs() > rx_dy.abs() {
        (ax + t * sx - image.0) / rx_dx
    } else {
        (ay + t * sy - image.1) / rx_dy
    };
    if (0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u) {
        Some(t)
    } else {
        None
    }
}

/// Path lengths from one AP to one receive point: LOS plus first-order
/// reflections off every visible wall segment.
fn path_lengths(scene: &Scene, ap: (f64, f64), rx: (f64, f64)) -> Vec<f64> {
    let mut out = Vec::with_capacity(1 + scene.reflectors.len());
    let los = ((ap.0 - rx.0).powi(2) + (ap.1 - rx.1).powi(2)).sqrt();
    out.push(los.max(D_MIN));
    for seg in &scene.reflectors {
        let image = mirror_across(seg, ap);
        if reflection_on_segment(seg, image, rx).is_some() {
            let d = ((image.0 - rx.0).powi(2) + (image.1 - rx.1).powi(2)).sqrt();
            out.push(d.max(D_MIN));
        }
    }
    out
}

fn channel_response(scene: &Scene, ap: (f64, f64), rx: (f64, f64), freq: f64) -> Complex {
    let gamma = scene.path_loss_exponent as f64;
    let mut h = Complex { re: 0.0, im: 0.0 };
    for d in path_lengths(scene, ap, rx) {
        let amp = d.powf(-gamma / 2.0);
        let phase = -2.0 * std::f64::consts::PI * freq * d / SPEED_OF_LIGHT;
        h.re += amp * phase.cos();
        h.im += amp * phase.sin();
    }
    h
}

/// Synthesizes one labeled sample. Pure in `(scene, position, seed)`.
pub fn synthesize_csi(scene: &Scene, position: (f32, f32), seed: u64) -> Result<CsiSample> {
    scene.validate()?;
    if !scene.contains(position.0, position.1) {
        return Err(CsiError::OutsideRoom(position.0, position.1));
    }

    let pos = (position.0 as f64, position.1 as f64);
    // Deterministic base response per (ap, antenna, subcarrier).
    let mut base = vec![Complex { re: 0.0, im: 0.0 }; N_APS * N_ANTENNAS * N_SUBCARRIERS];
    for (a, &(apx, apy)) in scene.ap_positions.iter().enumerate() {
        for (ant, &(ox, oy)) in ANTENNA_OFFSETS.iter().enumerate() {
            let rx = (pos.0 + ox, pos.1 + oy);
            for (k, &f) in scene.carrier_frequencies.iter().enumerate() {
                base[(a * N_ANTENNAS + ant) * N_SUBCARRIERS + k] =
                    channel_response(scene, (apx as f64, apy as f64), rx, f as f64);
            }
        }
    }

    let mut rng = rng_from_seed(seed);
    let noise = Normal::new(0.0f64, scene.packet_noise_std as f64)
        .map_err(|e| CsiError::BadScene(e.to_string()))?;
    let zero_noise = scene.packet_noise_std == 0.0;

    let [channels, rows, cols] = SAMPLE_SHAPE;
    let mut feat = vec![0.0f32; FEATURE_LEN];
    let idx = |c: usize, r: usize, k: usize| (c * rows + r) * cols + k;
    // Fixed draw order: ap, packet, antenna, subcarrier.
    for a in 0..N_APS {
        for p in 0..N_PACKETS {
            let row = a * N_PACKETS + p;
            for ant in 0..N_ANTENNAS {
                for k in 0..cols {
                    let h = base[(a * N_ANTENNAS + ant) * N_SUBCARRIERS + k];
                    let (re, im) = if zero_noise {
                        (h.re, h.im)
                    } else {
                        (h.re + noise.sample(&mut rng), h.im + noise.sample(&mut rng))
                    };
                    let amp = (re * re + im * im).sqrt();
                    let phase = wrap_phase(im.atan2(re));
                    feat[idx(ant, row, k)] = amp as f32;
                    feat[idx(AMP_CHANNELS + ant, row, k)] = phase as f32;
                }
            }
        }
    }
    debug_assert_eq!(channels, 2 * N_ANTENNAS);

    Ok(CsiSample {
        features: Array::from_vec(&SAMPLE_SHAPE, feat).expect("fixed shape"),
        label: position,
    })
}

/// Derived seed for sample `index` of a dataset rooted at `root`.
pub fn sample_seed(root: u64, index: u64) -> u64 {
    derive_seed(root, index)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn los_only_scene() -> Scene {
        let mut s = Scene::default_scene();
        s.reflectors.clear();
        s.packet_noise_std = 0.0;
        s.path_loss_exponent = 2.0;
        s
    }

    #[test]
    fn los_channel_matches_closed_form() {
        let scene = los_only_scene();
        let pos = (4.0f32, 3.0f32);
        let sample = synthesize_csi(&scene, pos, 7).unwrap();
        let [_, rows, cols] = SAMPLE_SHAPE;
        for (a, &(apx, apy)) in scene.ap_positions.iter().enumerate() {
            let d = (((apx - pos.0).powi(2) + (apy - pos.1).powi(2)) as f64).sqrt();
            for k in 0..cols {
                let f = scene.carrier_frequencies[k] as f64;
                let expect_amp = 1.0 / d;
                let expect_phase = wrap_phase(-2.0 * std::f64::consts::PI * f * d / SPEED_OF_LIGHT);
                for p in 0..N_PACKETS {
                    let row = a * N_PACKETS + p;
                    // Antenna 0 sits exactly at the labeled position.
                    let amp = sample.features[(0 * rows + row) * cols + k] as f64;
                    let phase = sample.features[((AMP_CHANNELS) * rows + row) * cols + k] as f64;
                    assert!((amp - expect_amp).abs() < 1e-6, "amp ap{a} sc{k}");
                    assert!((phase - expect_phase).abs() < 1e-5, "phase ap{a} sc{k}");
                }
            }
        }
    }

    #[test]
    fn synthesis_is_deterministic() {
        let scene = Scene::default_scene();
        let a = synthesize_csi(&scene, (2.5, 6.0), 99).unwrap();
        let b = synthesize_csi(&scene, (2.5, 6.0), 99).unwrap();
        assert_eq!(a, b);
        let c = synthesize_csi(&scene, (2.5, 6.0), 100).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn position_on_ap_is_clamped_finite() {
        let scene = los_only_scene();
        let ap = scene.ap_positions[0];
        let sample = synthesize_csi(&scene, ap, 1).unwrap();
        assert!(sample.features.all_finite());
        // d clamped to D_MIN=0.1 -> amplitude 1/0.1 = 10 on antenna 0, AP 0.
        let [_, rows, cols] = SAMPLE_SHAPE;
        let amp = sample.features[(0 * rows) * cols];
        assert!((amp - 10.0).abs() < 1e-5);
    }

    #[test]
    fn outside_room_is_rejected() {
        let scene = Scene::default_scene();
        assert!(matches!(
            synthesize_csi(&scene, (-1.0, 2.0), 0),
            Err(CsiError::OutsideRoom(_, _))
        ));
    }

    #[test]
    fn sample_invariants_hold_with_noise_and_reflections() {
        let scene = Scene::default_scene();
        let sample = synthesize_csi(&scene, (7.25, 1.5), 1234).unwrap();
        assert_eq!(sample.features.shape(), &SAMPLE_SHAPE);
        assert_eq!(sample.features.len(), FEATURE_LEN);
        for &a in sample.amplitude_half() {
            assert!(a >= 0.0 && a.is_finite());
        }
        for &p in sample.phase_half() {
            assert!((-std::f32::consts::PI..std::f32::consts::PI).contains(&p));
        }
    }

    #[test]
    fn amplitude_decreases_with_los_distance() {
        let mut scene = los_only_scene();
        scene.ap_positions = [(0.5, 0.5), (9.5, 0.5), (0.5, 7.5)];
        let mut last = f32::INFINITY;
        for step in 1..8 {
            let pos = (0.5 + step as f32, 0.5);
            let s = synthesize_csi(&scene, pos, 3).unwrap();
            let amp = s.features[0]; // antenna 0, AP 0, packet 0, subcarrier 0
            assert!(amp < last, "amplitude must fall with distance");
            last = amp;
        }
    }

    #[test]
    fn wrap_phase_stays_in_range() {
        for i in -100..100 {
            let p = i as f64 * 0.37;
            let w = wrap_phase(p);
            assert!((-std::f64::consts::PI..std::f64::consts::PI).contains(&w));
            // Same angle modulo 2*pi.
            let diff = (w - p) / (2.0 * std::f64::consts::PI);
            assert!((diff - diff.round()).abs() < 1e-9);
        }
        assert_eq!(wrap_phase(std::f64::consts::PI), -std::f64::consts::PI);
    }
}
