use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    objective_gradient, sample_in_box, supergradient, surrogate_value, DemandModel, PricingResult,
    SolverKind,
};
use crate::error::{Error, Result};
use crate::instance::MatchingInstance;
use crate::lp::{solve_fluid_lp, FluidSolution};

/// Slack (relative to `max(1, |g|)`) under which a candidate counts as not
/// decreasing `g`. Without it, LP round-off at a fixed point could push the
/// curvature shift up to its cap.
const ASCENT_SLACK: f64 = 1e-12;

/// Width at which the 1-D surrogate bisection stops.
const BISECTION_TOL: f64 = 1e-10;

/// Allowed excess of the surrogate over `g` when minorization is sampled.
const MINORIZATION_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MmOptions {
    pub eps: f64,
    /// Increment of the curvature shift; `None` picks a scale-based default.
    pub delta_mm: Option<f64>,
    pub time_cap: f64,
    pub rho_cap: f64,
    pub max_iterations: Option<usize>,
    /// Random points per accepted step at which `Q <= g` is checked; a
    /// violation rejects the step like a decrease of `g` would. 0 disables.
    pub minorization_samples: usize,
    pub seed: u64,
}

impl Default for MmOptions {
    fn default() -> Self {
        Self {
            eps: 1e-3,
            delta_mm: None,
            time_cap: 1200.0,
            rho_cap: 1e6,
            max_iterations: None,
            minorization_samples: 0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PgOptions {
    pub step0: f64,
    pub eps: f64,
    pub time_cap: f64,
    pub max_iterations: Option<usize>,
}

impl Default for PgOptions {
    fn default() -> Self {
        Self {
            step0: 1.0,
            eps: 1e-3,
            time_cap: 1200.0,
            max_iterations: None,
        }
    }
}

/// `0.1 * mean(solo cost) / |upper|`.
pub fn default_delta_mm(inst: &MatchingInstance) -> f64 {
    let n = inst.n_types() as f64;
    let mean_cost = inst.solo_cost.iter().sum::<f64>() / n;
    let norm = inst.lambda_upper.iter().map(|l| l * l).sum::<f64>().sqrt();
    let d = 0.1 * mean_cost / norm;
    if d.is_finite() && d > 0.0 {
        d
    } else {
        0.1
    }
}

/// Maximizer over the box of the separable surrogate
/// `sum_i r_i(l_i) - rho l_i^2 / 2 - v_i l_i`, where `v` already includes the
/// `-rho * anchor` shift.
pub fn maximize_surrogate(
    inst: &MatchingInstance,
    demand: &DemandModel,
    v: &[f64],
    rho: f64,
) -> Vec<f64> {
    (0..inst.n_types())
        .map(|i| {
            let (lo, hi) = (inst.lambda_lower[i], inst.lambda_upper[i]);
            match demand {
                DemandModel::Linear(d) => {
                    let (l, m) = (d.solo_length[i], d.max_rate[i]);
                    (m * (l - v[i]) / (2.0 * l + rho * m)).clamp(lo, hi)
                }
                DemandModel::Custom(_) => {
                    let slope = |x: f64| demand.revenue_derivative(i, x) - rho * x - v[i];
                    bisect_decreasing(slope, lo, hi)
                }
            }
        })
        .collect()
}

/// Root of a nonincreasing function on `[lo, hi]`, or the endpoint it
/// pushes towards.
fn bisect_decreasing(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    if f(lo) <= 0.0 {
        return lo;
    }
    if f(hi) >= 0.0 {
        return hi;
    }
    let (mut a, mut b) = (lo, hi);
    while b - a > BISECTION_TOL {
        let m = 0.5 * (a + b);
        if f(m) > 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

struct Iterate {
    lambda: Vec<f64>,
    sol: FluidSolution,
    g: f64,
}

fn evaluate(inst: &MatchingInstance, demand: &DemandModel, lambda: Vec<f64>) -> Result<Iterate> {
    let sol = solve_fluid_lp(inst, &lambda)?;
    let g = demand.total_revenue(&lambda) - sol.objective;
    Ok(Iterate { lambda, sol, g })
}

fn check_start(
    inst: &MatchingInstance,
    demand: &DemandModel,
    lambda0: &[f64],
    eps: f64,
) -> Result<()> {
    inst.validate()?;
    demand.check_compatible(inst)?;
    inst.check_rates(lambda0)?;
    if !(eps > 0.0) {
        return Err(Error::Precondition(format!(
            "eps must be positive, got {eps}"
        )));
    }
    Ok(())
}

/// Minorize-maximization ascent on `g`.
///
/// Each outer step linearizes `c - rho |.|^2 / 2` at the current rates,
/// maximizes the resulting concave surrogate over the box, and accepts the
/// candidate once `g` does not decrease, raising `rho` by `delta_mm` after
/// every rejection. `rho` restarts at zero on every outer step.
pub fn mm_solve(
    inst: &MatchingInstance,
    demand: &DemandModel,
    lambda0: &[f64],
    opts: &MmOptions,
) -> Result<PricingResult> {
    check_start(inst, demand, lambda0, opts.eps)?;
    let delta = opts.delta_mm.unwrap_or_else(|| default_delta_mm(inst));
    if !(delta > 0.0) {
        return Err(Error::Precondition(format!(
            "delta_mm must be positive, got {delta}"
        )));
    }
    let start = Instant::now();
    let cap = Duration::from_secs_f64(opts.time_cap.max(0.0));
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);

    let mut cur = evaluate(inst, demand, lambda0.to_vec())?;
    let mut lp_solves = 1;
    let mut trajectory = vec![cur.g];
    let (mut iterations, mut rho_final, mut rho_max) = (0, 0.0_f64, 0.0_f64);
    let mut converged = false;

    'outer: loop {
        if opts.max_iterations.is_some_and(|m| iterations >= m) {
            break;
        }
        let mut rho = 0.0;
        let next = loop {
            if start.elapsed() > cap {
                break 'outer;
            }
            let v = supergradient(&cur.lambda, rho, &cur.sol)?;
            let cand = evaluate(inst, demand, maximize_surrogate(inst, demand, &v, rho))?;
            lp_solves += 1;
            let mut accept = cand.g >= cur.g - ASCENT_SLACK * cur.g.abs().max(1.0);
            if accept && opts.minorization_samples > 0 {
                let (ok, solves) =
                    minorizes(inst, demand, &cur, rho, opts.minorization_samples, &mut rng)?;
                lp_solves += solves;
                accept = ok;
            }
            if accept {
                break cand;
            }
            rho += delta;
            if rho > opts.rho_cap {
                return Err(Error::RhoCapExceeded {
                    cap: opts.rho_cap,
                    iteration: iterations,
                    g_prev: cur.g,
                    g_last: cand.g,
                });
            }
        };
        iterations += 1;
        rho_final = rho;
        rho_max = rho_max.max(rho);
        trajectory.push(next.g);
        let change = (next.g - cur.g).abs();
        cur = next;
        if change < opts.eps {
            converged = true;
            break;
        }
    }

    Ok(PricingResult {
        solver: SolverKind::MM,
        objective: cur.g,
        lambda_star: cur.lambda,
        trajectory,
        iterations,
        rho_final,
        rho_max,
        stepsize_initial: None,
        stepsize_final: None,
        lp_solves,
        wall_time: start.elapsed().as_secs_f64(),
        converged,
    })
}

/// Samples the box and reports whether the surrogate anchored at `cur`
/// stays below `g` everywhere it was probed.
fn minorizes(
    inst: &MatchingInstance,
    demand: &DemandModel,
    cur: &Iterate,
    rho: f64,
    samples: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(bool, usize)> {
    for _ in 0..samples {
        let p = sample_in_box(inst, rng);
        let q = surrogate_value(demand, &p, &cur.lambda, &cur.sol, rho)?;
        let g = evaluate(inst, demand, p)?.g;
        if q > g + MINORIZATION_TOL {
            return Ok((false, samples));
        }
    }
    Ok((true, samples))
}

/// Projected gradient ascent with step halving whenever `g` drops. The
/// iterate moves on every step, including steps that decrease `g`.
pub fn pg_solve(
    inst: &MatchingInstance,
    demand: &DemandModel,
    lambda0: &[f64],
    opts: &PgOptions,
) -> Result<PricingResult> {
    check_start(inst, demand, lambda0, opts.eps)?;
    if !(opts.step0 > 0.0 && opts.step0.is_finite()) {
        return Err(Error::Precondition(format!(
            "step0 must be positive, got {}",
            opts.step0
        )));
    }
    let start = Instant::now();
    let cap = Duration::from_secs_f64(opts.time_cap.max(0.0));

    let mut cur = evaluate(inst, demand, lambda0.to_vec())?;
    let mut lp_solves = 1;
    let mut trajectory = vec![cur.g];
    let mut step = opts.step0;
    let mut iterations = 0;
    let mut converged = false;

    while start.elapsed() <= cap && !opts.max_iterations.is_some_and(|m| iterations >= m) {
        let grad = objective_gradient(demand, &cur.lambda, &cur.sol)?;
        let mut lambda: Vec<f64> = cur
            .lambda
            .iter()
            .zip(&grad)
            .map(|(l, d)| l + step * d)
            .collect();
        inst.clamp_to_box(&mut lambda);
        let next = evaluate(inst, demand, lambda)?;
        lp_solves += 1;
        iterations += 1;
        trajectory.push(next.g);
        if next.g < cur.g {
            step *= 0.5;
        }
        let change = (next.g - cur.g).abs();
        cur = next;
        if change < opts.eps {
            converged = true;
            break;
        }
    }

    Ok(PricingResult {
        solver: SolverKind::PG,
        objective: cur.g,
        lambda_star: cur.lambda,
        trajectory,
        iterations,
        rho_final: 0.0,
        rho_max: 0.0,
        stepsize_initial: Some(opts.step0),
        stepsize_final: Some(step),
        lp_solves,
        wall_time: start.elapsed().as_secs_f64(),
        converged,
    })
}
