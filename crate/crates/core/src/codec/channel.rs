//! AWGN on the latent: the only channel impairment modeled on the air hop.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::nn::Array;
use crate::rng::rng_from_seed;

/// Channel setting for the edge -> O-RU hop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ChannelSpec {
    /// No impairment; output equals input.
    Off,
    /// Additive white Gaussian noise at the given SNR in dB, measured
    /// against the empirical power of each latent vector.
    AwgnSnrDb(f64),
}

impl ChannelSpec {
    pub fn parse(s: &str) -> Option<Self> {
        if s.eq_ignore_ascii_case("off") {
            Some(ChannelSpec::Off)
        } else {
            s.parse::<f64>().ok().map(ChannelSpec::AwgnSnrDb)
        }
    }

    pub fn label(&self) -> String {
        match self {
            ChannelSpec::Off => "off".to_string(),
            ChannelSpec::AwgnSnrDb(db) => format!("{db}"),
        }
    }
}

/// Adds seeded Gaussian noise with per-vector power
/// `signal_power / 10^(snr_db/10)`; `Off` is the identity.
pub fn awgn_channel(z: &Array<f32>, spec: &ChannelSpec, seed: u64) -> Array<f32> {
    match spec {
        ChannelSpec::Off => z.clone(),
        ChannelSpec::AwgnSnrDb(snr_db) => {
            if z.is_empty() {
                return z.clone();
            }
            let power: f64 =
                z.as_slice().iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>() / z.len() as f64;
            let sigma = (power / 10f64.powf(snr_db / 10.0)).sqrt();
            let mut rng = rng_from_seed(seed);
            let data = z
                .as_slice()
                .iter()
                .map(|&v| {
                    let n: f64 = StandardNormal.sample(&mut rng);
                    v + (sigma * n) as f32
                })
                .collect();
            Array::from_vec(z.shape(), data).expect("same length")
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn off_is_identity() {
        let z = Array::vector(vec![1.0, -2.0, 0.5]);
        assert_eq!(awgn_channel(&z, &ChannelSpec::Off, 1), z);
    }

    #[test]
    fn fixed_seed_is_deterministic() {
        let z = Array::vector((0..64).map(|i| (i as f32 * 0.13).sin()).collect());
        let a = awgn_channel(&z, &ChannelSpec::AwgnSnrDb(10.0), 42);
        let b = awgn_channel(&z, &ChannelSpec::AwgnSnrDb(10.0), 42);
        assert_eq!(a, b);
        let c = awgn_channel(&z, &ChannelSpec::AwgnSnrDb(10.0), 43);
        assert_ne!(a, c);
    }

    #[test]
    fn empirical_snr_matches_requested() {
        // Large vector: measured SNR within +-0.5 dB of the request.
        let n = 10_000;
        let z = Array::vector((0..n).map(|i| (i as f32 * 0.37).sin() + 0.2).collect());
        let noisy = awgn_channel(&z, &ChannelSpec::AwgnSnrDb(10.0), 7);
        let sig: f64 = z.as_slice().iter().map(|&v| (v as f64).powi(2)).sum::<f64>() / n as f64;
        let noise: f64 = z
            .as_slice()
            .iter()
            .zip(noisy.as_slice())
            .map(|(&a, &b)| ((b - a) as f64).powi(2))
            .sum::<f64>()
            / n as f64;
        let snr_db = 10.0 * (sig / noise).log10();
        assert!((snr_db - 10.0).abs() < 0.5, "measured {snr_db} dB");
    }

    #[test]
    fn zero_vector_stays_zero() {
        let z = Array::vector(vec![0.0; 8]);
        let out = awgn_channel(&z, &ChannelSpec::AwgnSnrDb(0.0), 3);
        assert_eq!(out.as_slice(), z.as_slice());
    }

    #[test]
    fn parse_accepts_off_and_numbers() {
        assert_eq!(ChannelSpec::parse("off"), Some(ChannelSpec::Off));
        assert_eq!(ChannelSpec::parse("OFF"), Some(ChannelSpec::Off));
        assert_eq!(ChannelSpec::parse("12.5"), Some(ChannelSpec::AwgnSnrDb(12.5)));
        assert_eq!(ChannelSpec::parse("abc"), None);
    }
}
