//! Finite-difference curvature diagnostics on the LP cost.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::eigen::symmetric_eigenvalues;
use crate::error::{Error, Result};
use crate::instance::MatchingInstance;
use crate::lp::cost;

/// Absolute slack in the midpoint test.
pub const MIDPOINT_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hessian {
    pub matrix: Vec<Vec<f64>>,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// False when some coordinate's forward and backward slopes disagree by
    /// more than ten steps, i.e. a kink sits inside the stencil.
    pub smooth: bool,
    /// Per-coordinate step actually used.
    pub steps: Vec<f64>,
}

impl Hessian {
    pub fn max_eigenvalue(&self) -> f64 {
        *self.eigenvalues.last().unwrap_or(&f64::NAN)
    }
}

fn stencil_steps(
    inst: &MatchingInstance,
    lambda: &[f64],
    step: f64,
    reach: f64,
) -> Result<Vec<f64>> {
    inst.check_rates(lambda)?;
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::Precondition(format!(
            "step = {step} must be positive"
        )));
    }
    let steps: Vec<f64> = lambda.iter().map(|l| step * l.max(1.0)).collect();
    for (i, (&l, &h)) in lambda.iter().zip(&steps).enumerate() {
        if l - reach * h < inst.lambda_lower[i] || l + reach * h > inst.lambda_upper[i] {
            return Err(Error::Precondition(format!(
                "step {h} too large for box at coordinate {i}: lambda = {l}, box [{}, {}]",
                inst.lambda_lower[i], inst.lambda_upper[i]
            )));
        }
    }
    Ok(steps)
}

/// Central-difference Hessian of the cost at `lambda` with per-coordinate
/// step `step * max(1, lambda[i])`.
pub fn numerical_hessian(inst: &MatchingInstance, lambda: &[f64], step: f64) -> Result<Hessian> {
    let h = stencil_steps(inst, lambda, step, 2.0)?;
    let n = lambda.len();
    let at = |moves: &[(usize, f64)]| {
        let mut p = lambda.to_vec();
        for &(i, s) in moves {
            p[i] += s * h[i];
        }
        cost(inst, &p)
    };
    let c0 = at(&[])?;
    let mut m = vec![vec![0.0; n]; n];
    let mut smooth = true;
    for i in 0..n {
        let (up, down) = (at(&[(i, 1.0)])?, at(&[(i, -1.0)])?);
        m[i][i] = (up - 2.0 * c0 + down) / (h[i] * h[i]);
        let (fwd, bwd) = ((up - c0) / h[i], (c0 - down) / h[i]);
        if (fwd - bwd).abs() > 10.0 * h[i] {
            smooth = false;
        }
        for j in 0..i {
            let v = (at(&[(i, 1.0), (j, 1.0)])?
                - at(&[(i, 1.0), (j, -1.0)])?
                - at(&[(i, -1.0), (j, 1.0)])?
                + at(&[(i, -1.0), (j, -1.0)])?)
                / (4.0 * h[i] * h[j]);
            m[i][j] = v;
            m[j][i] = v;
        }
    }
    Ok(Hessian {
        eigenvalues: symmetric_eigenvalues(&m),
        matrix: m,
        smooth,
        steps: h,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OneSidedPartials {
    pub left: f64,
    pub right: f64,
    pub step: f64,
    /// Left slope below the right one by more than `2 * step`: no quadratic
    /// correction can make the cost concave here.
    pub witness: bool,
}

/// Backward and forward difference quotients of the cost in one coordinate,
/// with step `step * max(1, lambda[coord])`.
pub fn one_sided_partials(
    inst: &MatchingInstance,
    lambda: &[f64],
    coord: usize,
    step: f64,
) -> Result<OneSidedPartials> {
    if coord >= lambda.len() {
        return Err(Error::Precondition(format!(
            "coordinate {coord} out of range for {} types",
            lambda.len()
        )));
    }
    let hs = stencil_steps(inst, lambda, step, 1.0)?;
    let h = hs[coord];
    let mut p = lambda.to_vec();
    let c0 = cost(inst, &p)?;
    p[coord] = lambda[coord] + h;
    let up = cost(inst, &p)?;
    p[coord] = lambda[coord] - h;
    let down = cost(inst, &p)?;
    let (left, right) = ((c0 - down) / h, (up - c0) / h);
    Ok(OneSidedPartials {
        left,
        right,
        step: h,
        witness: right - left > 2.0 * step,
    })
}

/// A sampled pair with its midpoint and the three costs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MidpointWitness {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub midpoint: Vec<f64>,
    pub cost_a: f64,
    pub cost_b: f64,
    pub cost_mid: f64,
    /// Amount by which the midpoint falls below the chord of the shifted
    /// cost `c - rho |.|^2 / 2` (positive = violation).
    pub violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MidpointProbeReport {
    pub seed: u64,
    pub rho: f64,
    pub n_samples: usize,
    pub passed: usize,
    pub violations: usize,
    pub worst: Option<MidpointWitness>,
}

struct SampledPairs {
    seed: u64,
    pairs: Vec<MidpointWitness>,
}

fn sample_pairs(inst: &MatchingInstance, n_samples: usize, seed: u64) -> Result<SampledPairs> {
    inst.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        inst.lambda_lower
            .iter()
            .zip(&inst.lambda_upper)
            .map(|(&lo, &hi)| if hi > lo { rng.gen_range(lo..=hi) } else { lo })
            .collect()
    };
    let points: Vec<(Vec<f64>, Vec<f64>)> = (0..n_samples)
        .map(|_| {
            let a = draw(&mut rng);
            let b = draw(&mut rng);
            (a, b)
        })
        .collect();
    let pairs = points
        .into_par_iter()
        .map(|(a, b)| {
            let m: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
            Ok(MidpointWitness {
                cost_a: cost(inst, &a)?,
                cost_b: cost(inst, &b)?,
                cost_mid: cost(inst, &m)?,
                a,
                b,
                midpoint: m,
                violation: 0.0,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SampledPairs { seed, pairs })
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

impl SampledPairs {
    fn report(&self, rho: f64) -> MidpointProbeReport {
        let shifted = |c: f64, p: &[f64]| c - 0.5 * rho * norm2(p);
        let mut worst: Option<MidpointWitness> = None;
        let mut violations = 0;
        for w in &self.pairs {
            let chord = 0.5 * (shifted(w.cost_a, &w.a) + shifted(w.cost_b, &w.b));
            let v = chord - shifted(w.cost_mid, &w.midpoint);
            if v > MIDPOINT_TOL {
                violations += 1;
            }
            let better = match &worst {
                None => true,
                Some(cur) => {
                    v > cur.violation
                        || (v == cur.violation
                            && (w.a.as_slice(), w.b.as_slice())
                                < (cur.a.as_slice(), cur.b.as_slice()))
                }
            };
            if better {
                worst = Some(MidpointWitness {
                    violation: v,
                    ..w.clone()
                });
            }
        }
        MidpointProbeReport {
            seed: self.seed,
            rho,
            n_samples: self.pairs.len(),
            passed: self.pairs.len() - violations,
            violations,
            worst,
        }
    }
}

/// Samples `n_samples` uniform pairs in the box and checks midpoint
/// concavity of `c(l) - rho |l|^2 / 2` with slack [`MIDPOINT_TOL`].
pub fn probe_midpoint_concavity(
    inst: &MatchingInstance,
    n_samples: usize,
    rho: f64,
    seed: u64,
) -> Result<MidpointProbeReport> {
    if !(rho.is_finite() && rho >= 0.0) {
        return Err(Error::Precondition(format!("rho = {rho} must be >= 0")));
    }
    Ok(sample_pairs(inst, n_samples, seed)?.report(rho))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhoSearchReport {
    /// Smallest ladder value that passed on both sample sets, if any.
    pub rho: Option<f64>,
    pub cap: f64,
    /// Every `(rho, violations on the search set)` tried.
    pub ladder: Vec<(f64, usize)>,
    pub search: MidpointProbeReport,
    /// Same `rho` on an independent sample set.
    pub verification: Option<MidpointProbeReport>,
}

/// Seed offset for the verification sample set.
const VERIFY_SEED_OFFSET: u64 = 0x9e37_79b9_7f4a_7c15;

/// Searches `rho in {0, 2^-10, 2^-9, ...}` up to `cap` for a value under
/// which midpoint probes on two independent sample sets both pass. Costs are
/// evaluated once per sample set and reused for every `rho`.
pub fn find_weak_concavity_rho(
    inst: &MatchingInstance,
    n_samples: usize,
    seed: u64,
    cap: f64,
) -> Result<RhoSearchReport> {
    let search_set = sample_pairs(inst, n_samples, seed)?;
    let verify_set = sample_pairs(inst, n_samples, seed.wrapping_add(VERIFY_SEED_OFFSET))?;
    let mut ladder = Vec::new();
    let mut rho = 0.0;
    loop {
        let search = search_set.report(rho);
        ladder.push((rho, search.violations));
        if search.violations == 0 {
            let verification = verify_set.report(rho);
            if verification.violations == 0 {
                return Ok(RhoSearchReport {
                    rho: Some(rho),
                    cap,
                    ladder,
                    search,
                    verification: Some(verification),
                });
            }
        }
        let next = if rho == 0.0 {
            2f64.powi(-10)
        } else {
            2.0 * rho
        };
        if next > cap {
            return Ok(RhoSearchReport {
                rho: None,
                cap,
                ladder,
                search,
                verification: None,
            });
        }
        rho = next;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_form::n1_curvature;

    #[test]
    fn single_type_curvature() {
        let inst = MatchingInstance::new(
            vec![2.0],
            vec![1.5],
            vec![vec![1.5]],
            vec![1e-3],
            vec![10.0],
        )
        .unwrap();
        let h = numerical_hessian(&inst, &[0.7], 1e-3).unwrap();
        assert!(h.smooth);
        assert!((h.matrix[0][0] - n1_curvature(2.0, 1.5, 0.7)).abs() < 1e-4);
    }

    #[test]
    fn stencil_must_fit_box() {
        let inst =
            MatchingInstance::new(vec![1.0], vec![1.0], vec![vec![1.0]], vec![0.5], vec![1.0])
                .unwrap();
        assert!(numerical_hessian(&inst, &[0.5005], 1e-3).is_err());
        assert!(one_sided_partials(&inst, &[0.7], 0, 1e-3).is_ok());
        assert!(one_sided_partials(&inst, &[0.7], 1, 1e-3).is_err());
    }

    #[test]
    fn linear_cost_has_no_violations() {
        let inst =
            MatchingInstance::two_type([0.0, 0.0], 1.0, 2.0, 2.5, [0.1; 2], [3.0; 2]).unwrap();
        let r = probe_midpoint_concavity(&inst, 200, 0.0, 7).unwrap();
        assert_eq!(r.violations, 0);
        assert_eq!(r.passed, 200);
        let again = probe_midpoint_concavity(&inst, 200, 0.0, 7).unwrap();
        assert_eq!(r, again);
    }

    #[test]
    fn rho_search_on_concave_cost_stops_at_zero() {
        let inst =
            MatchingInstance::two_type([0.5, 0.5], 1.0, 1.0, 1.3, [0.1; 2], [3.0; 2]).unwrap();
        let r = find_weak_concavity_rho(&inst, 300, 3, 1e6).unwrap();
        assert_eq!(r.rho, Some(0.0));
        assert_eq!(r.ladder.len(), 1);
    }
}
