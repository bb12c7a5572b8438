use std::collections::BTreeMap;
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    mm_solve, pg_solve, sample_in_box, DemandModel, MmOptions, PgOptions, PricingResult, SolverKind,
};
use crate::error::{Error, Result};
use crate::instance::MatchingInstance;

pub const CSV_HEADER: [&str; 7] = [
    "instance_id",
    "solver",
    "step0",
    "seed",
    "time_s",
    "iters",
    "objective",
];

#[derive(Debug, Clone)]
pub struct BenchmarkCase {
    pub id: String,
    pub instance: MatchingInstance,
    pub demand: DemandModel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SolverSpec {
    MM,
    PG { step0: f64 },
}

impl SolverSpec {
    pub fn kind(&self) -> SolverKind {
        match self {
            SolverSpec::MM => SolverKind::MM,
            SolverSpec::PG { .. } => SolverKind::PG,
        }
    }

    pub fn step0(&self) -> Option<f64> {
        match self {
            SolverSpec::MM => None,
            SolverSpec::PG { step0 } => Some(*step0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkOptions {
    pub eps: f64,
    pub time_cap: f64,
    pub delta_mm: Option<f64>,
    pub max_iterations: Option<usize>,
}

impl Default for BenchmarkOptions {
    fn default() -> Self {
        Self {
            eps: 1e-3,
            time_cap: 1200.0,
            delta_mm: None,
            max_iterations: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub instance_id: String,
    pub solver: SolverKind,
    pub step0: Option<f64>,
    pub seed: u64,
    pub time_s: f64,
    pub iters: usize,
    pub objective: f64,
    pub converged: bool,
    pub lambda0: Vec<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSummary {
    pub instance_id: String,
    pub solver: SolverKind,
    pub step0: Option<f64>,
    pub runs: usize,
    pub failures: usize,
    pub mean_time_s: f64,
    pub mean_iters: f64,
    pub mean_objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkTable {
    pub rows: Vec<BenchmarkRow>,
    pub summary: Vec<BenchmarkSummary>,
}

/// Start point shared by every solver for one (case, seed) cell.
pub fn start_point(inst: &MatchingInstance, case_index: usize, seed: u64) -> Vec<f64> {
    let mixed = seed ^ (case_index as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    sample_in_box(inst, &mut ChaCha8Rng::seed_from_u64(mixed))
}

/// Runs every solver from the same seeded start point on every case.
/// Cells run in parallel; a failing cell is recorded in its row and does not
/// abort the table. Rows come back ordered by (case, seed, solver).
pub fn benchmark(
    cases: &[BenchmarkCase],
    solvers: &[SolverSpec],
    seeds: &[u64],
    opts: &BenchmarkOptions,
) -> Result<BenchmarkTable> {
    if cases.is_empty() || solvers.is_empty() || seeds.is_empty() {
        return Err(Error::Precondition(
            "benchmark needs at least one instance, solver and seed".into(),
        ));
    }
    let cells: Vec<(usize, u64, SolverSpec)> = cases
        .iter()
        .enumerate()
        .flat_map(|(c, _)| {
            seeds
                .iter()
                .flat_map(move |&s| solvers.iter().map(move |&v| (c, s, v)))
        })
        .collect();
    let rows: Vec<BenchmarkRow> = cells
        .into_par_iter()
        .map(|(c, seed, spec)| {
            let case = &cases[c];
            let lambda0 = start_point(&case.instance, c, seed);
            let outcome = run_cell(case, &lambda0, spec, opts);
            let mut row = BenchmarkRow {
                instance_id: case.id.clone(),
                solver: spec.kind(),
                step0: spec.step0(),
                seed,
                time_s: f64::NAN,
                iters: 0,
                objective: f64::NAN,
                converged: false,
                lambda0,
                error: None,
            };
            match outcome {
                Ok(r) => {
                    row.time_s = r.wall_time;
                    row.iters = r.iterations;
                    row.objective = r.objective;
                    row.converged = r.converged;
                }
                Err(e) => row.error = Some(e.to_string()),
            }
            row
        })
        .collect();
    let summary = summarize(&rows);
    Ok(BenchmarkTable { rows, summary })
}

fn run_cell(
    case: &BenchmarkCase,
    lambda0: &[f64],
    spec: SolverSpec,
    opts: &BenchmarkOptions,
) -> Result<PricingResult> {
    match spec {
        SolverSpec::MM => {
            let o = MmOptions {
                eps: opts.eps,
                delta_mm: opts.delta_mm,
                time_cap: opts.time_cap,
                max_iterations: opts.max_iterations,
                ..Default::default()
            };
            mm_solve(&case.instance, &case.demand, lambda0, &o)
        }
        SolverSpec::PG { step0 } => {
            let o = PgOptions {
                step0,
                eps: opts.eps,
                time_cap: opts.time_cap,
                max_iterations: opts.max_iterations,
            };
            pg_solve(&case.instance, &case.demand, lambda0, &o)
        }
    }
}

fn summarize(rows: &[BenchmarkRow]) -> Vec<BenchmarkSummary> {
    // Keyed by first appearance so the summary follows the row order.
    let mut order: Vec<(String, SolverKind, Option<f64>)> = Vec::new();
    let mut groups: BTreeMap<usize, Vec<&BenchmarkRow>> = BTreeMap::new();
    for r in rows {
        let key = (r.instance_id.clone(), r.solver, r.step0);
        let idx = match order.iter().position(|k| *k == key) {
            Some(i) => i,
            None => {
                order.push(key);
                order.len() - 1
            }
        };
        groups.entry(idx).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|(idx, rs)| {
            let ok: Vec<&&BenchmarkRow> = rs.iter().filter(|r| r.error.is_none()).collect();
            let mean = |f: &dyn Fn(&BenchmarkRow) -> f64| {
                if ok.is_empty() {
                    f64::NAN
                } else {
                    ok.iter().map(|r| f(r)).sum::<f64>() / ok.len() as f64
                }
            };
            let (instance_id, solver, step0) = order[idx].clone();
            BenchmarkSummary {
                instance_id,
                solver,
                step0,
                runs: rs.len(),
                failures: rs.len() - ok.len(),
                mean_time_s: mean(&|r| r.time_s),
                mean_iters: mean(&|r| r.iters as f64),
                mean_objective: mean(&|r| r.objective),
            }
        })
        .collect()
}

impl BenchmarkTable {
    /// Per-cell CSV with the fixed seven-column header. Failed cells leave
    /// time, iterations and objective empty.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Io {
            path: "<csv>".into(),
            source: std::io::Error::other(e),
        };
        w.write_record(CSV_HEADER).map_err(io)?;
        for r in &self.rows {
            let failed = r.error.is_some();
            let num = |v: String| if failed { String::new() } else { v };
            w.write_record([
                r.instance_id.clone(),
                format!("{:?}", r.solver),
                r.step0.map(|s| s.to_string()).unwrap_or_default(),
                r.seed.to_string(),
                num(r.time_s.to_string()),
                num(r.iters.to_string()),
                num(r.objective.to_string()),
            ])
            .map_err(io)?;
        }
        w.flush().map_err(|e| Error::Io {
            path: "<csv>".into(),
            source: e,
        })?;
        Ok(())
    }
}
