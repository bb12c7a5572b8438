#![allow(dead_code)]

use fluidmatch::MatchingInstance;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Valid instance with `n` types. Cross costs sit between the dominance
/// floor `max(c_i, c_j)` and well past `c_i + c_j`, so pooling efficiencies
/// cover `[-0.5, 0.5]`.
pub fn random_instance(rng: &mut impl Rng, n: usize, same_theta: bool, zero_theta: bool) -> MatchingInstance {
    let common = rng.gen_range(0.05..5.0);
    let theta: Vec<f64> = (0..n)
        .map(|_| {
            if zero_theta {
                0.0
            } else if same_theta {
                common
            } else {
                rng.gen_range(0.05..5.0)
            }
        })
        .collect();
    let solo: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..3.0)).collect();
    let mut pair = vec![vec![0.0; n]; n];
    for i in 0..n {
        pair[i][i] = solo[i];
        for j in 0..i {
            let floor = solo[i].max(solo[j]);
            let c = floor + rng.gen_range(0.0..1.5) * solo[i].min(solo[j]);
            pair[i][j] = c;
            pair[j][i] = c;
        }
    }
    MatchingInstance::new(theta, solo, pair, vec![0.01; n], vec![20.0; n]).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform point strictly inside the box, kept `margin` away from its faces.
pub fn interior_point(rng: &mut impl Rng, inst: &MatchingInstance, margin: f64) -> Vec<f64> {
    inst.lambda_lower
        .iter()
        .zip(&inst.lambda_upper)
        .map(|(&lo, &hi)| rng.gen_range(lo + margin..hi - margin))
        .collect()
}

/// Seed strategy for proptests that build instances from a seeded stream.
pub fn seeds() -> impl Strategy<Value = u64> {
    any::<u64>()
}
