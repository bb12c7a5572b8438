use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::MatchingInstance;

/// Inverse demand `p_i(l) = solo_length[i] * (1 - l / max_rate[i])`: riders'
/// per-mile willingness to pay is uniform on `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearDemand {
    pub solo_length: Vec<f64>,
    pub max_rate: Vec<f64>,
}

pub type ScalarFn = Arc<dyn Fn(usize, f64) -> f64 + Send + Sync>;

/// User-supplied per-type revenue `r_i(l) = l * p_i(l)` and its derivative.
#[derive(Clone)]
pub struct CustomDemand {
    revenue: ScalarFn,
    derivative: ScalarFn,
}

impl fmt::Debug for CustomDemand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("CustomDemand { .. }")
    }
}

#[derive(Debug, Clone)]
pub enum DemandModel {
    Linear(LinearDemand),
    Custom(CustomDemand),
}

/// Pairs sampled per type when registering a custom demand.
const CUSTOM_CHECK_PAIRS: usize = 100;

impl DemandModel {
    pub fn linear(solo_length: Vec<f64>, max_rate: Vec<f64>) -> Result<Self> {
        if solo_length.len() != max_rate.len() {
            return Err(Error::DimensionMismatch {
                expected: solo_length.len(),
                got: max_rate.len(),
            });
        }
        for (i, (&l, &m)) in solo_length.iter().zip(&max_rate).enumerate() {
            if !(l.is_finite() && l > 0.0 && m.is_finite() && m > 0.0) {
                return Err(Error::InvalidInstance(format!(
                    "linear demand for type {i} needs positive length and max rate, got ({l}, {m})"
                )));
            }
        }
        Ok(DemandModel::Linear(LinearDemand {
            solo_length,
            max_rate,
        }))
    }

    /// Registers a custom revenue model after checking, on sampled pairs in
    /// the instance's box, that each `r_i` is midpoint concave and that the
    /// derivative agrees with central differences.
    pub fn custom<R, D>(
        inst: &MatchingInstance,
        revenue: R,
        derivative: D,
        seed: u64,
    ) -> Result<Self>
    where
        R: Fn(usize, f64) -> f64 + Send + Sync + 'static,
        D: Fn(usize, f64) -> f64 + Send + Sync + 'static,
    {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in 0..inst.n_types() {
            let (lo, hi) = (inst.lambda_lower[i], inst.lambda_upper[i]);
            if hi <= lo {
                continue;
            }
            let scale = [lo, hi, 0.5 * (lo + hi)]
                .iter()
                .map(|&l| revenue(i, l).abs())
                .fold(1.0_f64, f64::max);
            for _ in 0..CUSTOM_CHECK_PAIRS {
                let a = rng.gen_range(lo..=hi);
                let b = rng.gen_range(lo..=hi);
                let mid = revenue(i, 0.5 * (a + b));
                let chord = 0.5 * (revenue(i, a) + revenue(i, b));
                if !(mid >= chord - 1e-9 * scale) {
                    return Err(Error::Precondition(format!(
                        "revenue of type {i} is not concave: r({}) = {mid} below chord {chord} of ({a}, {b})",
                        0.5 * (a + b)
                    )));
                }
                let h = 1e-6 * (hi - lo);
                if a - h >= lo && a + h <= hi {
                    let fd = (revenue(i, a + h) - revenue(i, a - h)) / (2.0 * h);
                    let d = derivative(i, a);
                    if !((fd - d).abs() <= 1e-4 * fd.abs().max(1.0)) {
                        return Err(Error::Precondition(format!(
                            "revenue derivative of type {i} at {a} is {d}, central difference gives {fd}"
                        )));
                    }
                }
            }
        }
        Ok(DemandModel::Custom(CustomDemand {
            revenue: Arc::new(revenue),
            derivative: Arc::new(derivative),
        }))
    }

    pub fn n_types(&self) -> Option<usize> {
        match self {
            DemandModel::Linear(d) => Some(d.solo_length.len()),
            DemandModel::Custom(_) => None,
        }
    }

    /// Revenue `l * p_i(l)` of type `i` at rate `l`.
    pub fn revenue(&self, i: usize, l: f64) -> f64 {
        match self {
            DemandModel::Linear(d) => d.solo_length[i] * l * (1.0 - l / d.max_rate[i]),
            DemandModel::Custom(c) => (c.revenue)(i, l),
        }
    }

    pub fn revenue_derivative(&self, i: usize, l: f64) -> f64 {
        match self {
            DemandModel::Linear(d) => d.solo_length[i] * (1.0 - 2.0 * l / d.max_rate[i]),
            DemandModel::Custom(c) => (c.derivative)(i, l),
        }
    }

    pub fn total_revenue(&self, lambda: &[f64]) -> f64 {
        lambda
            .iter()
            .enumerate()
            .map(|(i, &l)| self.revenue(i, l))
            .sum()
    }

    pub(crate) fn check_compatible(&self, inst: &MatchingInstance) -> Result<()> {
        match self.n_types() {
            Some(n) if n != inst.n_types() => Err(Error::DimensionMismatch {
                expected: inst.n_types(),
                got: n,
            }),
            _ => Ok(()),
        }
    }
}
