//! Synthetic trip generator: a Gaussian mixture over OD hotspots.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::trips::TripRecord;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_trips: usize,
    /// Number of mixture components. Each is an (origin, destination) pair
    /// of centers drawn uniformly from the square `[0, extent]^2`.
    pub n_hotspots: usize,
    /// Standard deviation in miles of each coordinate around its center.
    pub spread: f64,
    pub extent: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_trips: 1000,
            n_hotspots: 5,
            spread: 0.5,
            extent: 10.0,
        }
    }
}

/// Hotspot centers followed by trips, all drawn from one seeded stream.
pub fn synth_trips(spec: &SynthSpec, seed: u64) -> Result<Vec<TripRecord>> {
    if spec.n_trips == 0 || spec.n_hotspots == 0 {
        return Err(Error::Precondition(
            "synthetic spec needs trips and hotspots".into(),
        ));
    }
    if !(spec.spread >= 0.0
        && spec.spread.is_finite()
        && spec.extent > 0.0
        && spec.extent.is_finite())
    {
        return Err(Error::Precondition(format!(
            "synthetic spec needs finite spread >= 0 and extent > 0, got {} and {}",
            spec.spread, spec.extent
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hotspots: Vec<[f64; 4]> = (0..spec.n_hotspots)
        .map(|_| std::array::from_fn(|_| rng.gen_range(0.0..spec.extent)))
        .collect();
    let noise = Normal::new(0.0, spec.spread).expect("spread checked above");
    Ok((0..spec.n_trips)
        .map(|_| {
            let h = hotspots[rng.gen_range(0..spec.n_hotspots)];
            let f: [f64; 4] = std::array::from_fn(|d| h[d] + noise.sample(&mut rng));
            TripRecord::new([f[0], f[1]], [f[2], f[3]])
        })
        .collect())
}
