//! Instance construction from trip data: clustering, route costs, linear
//! demand, synthetic trips and persistence.

mod kmeans;
mod routes;
mod synth;
mod trips;

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::MatchingInstance;
use crate::pricing::{DemandModel, LinearDemand};

pub use kmeans::{
    cluster_trips, cluster_trips_with, Clustering, DEFAULT_RESTARTS, INERTIA_REL_TOL,
    MAX_LLOYD_ITERATIONS,
};
pub use routes::{derive_costs, pooled_length, route_lengths, OdPair, MIN_SOLO_LENGTH};
pub use synth::{synth_trips, SynthSpec};
pub use trips::{parse_trips_csv, read_trips_csv, save_trips_csv, write_trips_csv, TripRecord};

/// Lower end of every type's rate range unless overridden.
pub const DEFAULT_RATE_FLOOR: f64 = 1e-3;

/// Cost-per-mile grid of the ride-pooling experiments.
pub const COST_PER_MILE_GRID: [f64; 3] = [0.7, 0.9, 1.1];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ThetaSpec {
    Equal { theta: f64 },
    Uniform { low: f64, high: f64 },
}

/// Patience rates for `n` types; uniform draws come from `seed`.
pub fn assign_theta(n: usize, spec: ThetaSpec, seed: u64) -> Result<Vec<f64>> {
    match spec {
        ThetaSpec::Equal { theta } if theta >= 0.0 && theta.is_finite() => Ok(vec![theta; n]),
        ThetaSpec::Uniform { low, high } if 0.0 <= low && low <= high && high.is_finite() => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Ok((0..n)
                .map(|_| {
                    if high > low {
                        rng.gen_range(low..=high)
                    } else {
                        low
                    }
                })
                .collect())
        }
        _ => Err(Error::Precondition(format!(
            "invalid patience specification {spec:?}"
        ))),
    }
}

/// A clustered market ready for pricing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypedInstanceBundle {
    pub matching: MatchingInstance,
    pub demand: LinearDemand,
    /// `(origin_x, origin_y, dest_x, dest_y)` of each type.
    pub cluster_centers: Vec<[f64; 4]>,
    /// Trips per hour of each type; also the top of its rate range.
    pub counts: Vec<f64>,
}

impl TypedInstanceBundle {
    pub fn demand_model(&self) -> DemandModel {
        DemandModel::Linear(self.demand.clone())
    }

    pub fn n_types(&self) -> usize {
        self.matching.n_types()
    }

    pub fn validate(&self) -> Result<()> {
        self.matching.validate()?;
        let n = self.n_types();
        for len in [
            self.demand.solo_length.len(),
            self.demand.max_rate.len(),
            self.cluster_centers.len(),
            self.counts.len(),
        ] {
            if len != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: len,
                });
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        let bundle: Self = serde_json::from_str(&text)?;
        bundle.validate()?;
        Ok(bundle)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleOptions {
    pub n_types: usize,
    pub c_per_mile: f64,
    pub theta: ThetaSpec,
    /// Length of the observation window; counts are trips per hour over it.
    pub hours: f64,
    pub rate_floor: f64,
    pub seed: u64,
}

impl Default for BundleOptions {
    fn default() -> Self {
        Self {
            n_types: 10,
            c_per_mile: 0.7,
            theta: ThetaSpec::Equal { theta: 1.0 },
            hours: 1.0,
            rate_floor: DEFAULT_RATE_FLOOR,
            seed: 0,
        }
    }
}

/// Clusters trips into types, prices routes and sets linear demand with
/// per-mile willingness to pay uniform on `[0, 1]`.
pub fn build_bundle(trips: &[TripRecord], opts: &BundleOptions) -> Result<TypedInstanceBundle> {
    if !(opts.hours > 0.0 && opts.hours.is_finite()) {
        return Err(Error::Precondition(format!(
            "hours must be positive, got {}",
            opts.hours
        )));
    }
    if !(opts.rate_floor >= 0.0) {
        return Err(Error::Precondition(format!(
            "rate floor must be nonnegative, got {}",
            opts.rate_floor
        )));
    }
    let clustering = cluster_trips(trips, opts.n_types, opts.seed)?;
    let centers: Vec<OdPair> = clustering.centers.iter().map(|&c| c.into()).collect();
    let (solo_length, _) = route_lengths(&centers);
    let (solo_cost, pair_cost) = derive_costs(&centers, opts.c_per_mile)?;
    let counts: Vec<f64> = clustering
        .sizes
        .iter()
        .map(|&s| s as f64 / opts.hours)
        .collect();
    // Theta draws use a stream separate from the clustering.
    let theta = assign_theta(opts.n_types, opts.theta, opts.seed.wrapping_add(1))?;
    let lower: Vec<f64> = counts.iter().map(|&u| opts.rate_floor.min(u)).collect();
    let matching = MatchingInstance::new(theta, solo_cost, pair_cost, lower, counts.clone())?;
    Ok(TypedInstanceBundle {
        matching,
        demand: LinearDemand {
            solo_length,
            max_rate: counts.clone(),
        },
        cluster_centers: clustering.centers,
        counts,
    })
}

/// Trips generated per type by [`synthetic_bundle`].
pub const SYNTH_TRIPS_PER_TYPE: usize = 30;

/// Desk-scale stand-in for a city's rush hour: one hour of synthetic trips
/// from `max(2, n_types / 2)` hotspots, clustered into `n_types` types.
pub fn synthetic_bundle(
    n_types: usize,
    c_per_mile: f64,
    theta: ThetaSpec,
    seed: u64,
) -> Result<TypedInstanceBundle> {
    let spec = SynthSpec {
        n_trips: SYNTH_TRIPS_PER_TYPE * n_types.max(1),
        n_hotspots: (n_types / 2).max(2),
        ..Default::default()
    };
    let trips = synth_trips(&spec, seed)?;
    build_bundle(
        &trips,
        &BundleOptions {
            n_types,
            c_per_mile,
            theta,
            seed,
            ..Default::default()
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::concavity::matching_efficiency;

    fn trips() -> Vec<TripRecord> {
        synth_trips(
            &SynthSpec {
                n_trips: 300,
                n_hotspots: 4,
                spread: 0.3,
                extent: 10.0,
            },
            5,
        )
        .unwrap()
    }

    #[test]
    fn bundle_satisfies_cost_assumptions() {
        let b = build_bundle(
            &trips(),
            &BundleOptions {
                n_types: 8,
                ..Default::default()
            },
        )
        .unwrap();
        b.validate().unwrap();
        let e = matching_efficiency(&b.matching);
        assert!(e.iter().flatten().all(|&v| v <= 0.5 + 1e-15));
        assert!((b.counts.iter().sum::<f64>() - 300.0).abs() < 1e-9);
    }

    #[test]
    fn bundle_round_trips_through_json() {
        let opts = BundleOptions {
            n_types: 5,
            theta: ThetaSpec::Uniform {
                low: 0.2,
                high: 2.0,
            },
            ..Default::default()
        };
        let b = build_bundle(&trips(), &opts).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.json");
        b.save(&path).unwrap();
        assert_eq!(TypedInstanceBundle::load(&path).unwrap(), b);
    }

    #[test]
    fn theta_specs() {
        assert_eq!(
            assign_theta(3, ThetaSpec::Equal { theta: 0.5 }, 0).unwrap(),
            vec![0.5; 3]
        );
        let u = assign_theta(
            50,
            ThetaSpec::Uniform {
                low: 1.0,
                high: 2.0,
            },
            4,
        )
        .unwrap();
        assert!(u.iter().all(|&t| (1.0..=2.0).contains(&t)));
        assert_eq!(
            u,
            assign_theta(
                50,
                ThetaSpec::Uniform {
                    low: 1.0,
                    high: 2.0
                },
                4
            )
            .unwrap()
        );
        assert!(assign_theta(
            2,
            ThetaSpec::Uniform {
                low: 2.0,
                high: 1.0
            },
            0
        )
        .is_err());
        assert!(assign_theta(2, ThetaSpec::Equal { theta: -1.0 }, 0).is_err());
    }
}
