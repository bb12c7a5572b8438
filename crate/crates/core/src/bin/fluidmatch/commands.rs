use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use fluidmatch::appendix::{self, ExampleReport, GRID_RANGE, GRID_RESOLUTION};
use fluidmatch::closed_form::{self, ClosedFormSolution, N2CaseLabel, SameThetaCase};
use fluidmatch::concavity::{
    self, find_weak_concavity_rho, numerical_hessian, one_sided_partials,
    probe_midpoint_concavity, Hessian, MidpointProbeReport, OneSidedPartials, RhoSearchReport,
};
use fluidmatch::data::{self, BundleOptions, SynthSpec, ThetaSpec, TypedInstanceBundle};
use fluidmatch::pricing::{
    self, BenchmarkCase, BenchmarkOptions, DemandModel, MmOptions, PgOptions, SolverSpec,
};
use fluidmatch::{solve_fluid_lp, Error, MatchingInstance};

use crate::render::{self, csv_text, flat_csv};
use crate::{BenchmarkArgs, Failure, Format, IngestArgs, InstanceArg, PriceArgs, SolverArg};

pub enum Status {
    Done,
    /// A time cap stopped some solver before convergence.
    Partial,
    /// A numerical step or a reproduction check failed.
    Failed,
}

pub struct Outcome {
    pub text: String,
    pub artifacts: Vec<(String, String)>,
    pub status: Status,
}

type CmdResult = Result<Outcome, Failure>;

fn input_err(msg: impl Into<String>) -> Failure {
    Failure::Input(msg.into())
}

/// Renders `report` in the chosen format and saves it as `<stem>.json`.
fn outcome<T: Serialize>(stem: &str, report: &T, table: String, format: Format) -> Outcome {
    let json = render::json(report);
    let text = match format {
        Format::Json => json.clone(),
        Format::Csv => flat_csv(report),
        Format::Table => table,
    };
    Outcome {
        text,
        artifacts: vec![(format!("{stem}.json"), json)],
        status: Status::Done,
    }
}

struct Loaded {
    instance: MatchingInstance,
    bundle: Option<TypedInstanceBundle>,
}

/// Accepts either a bundle (with a `matching` field) or a bare instance.
fn load(input: &InstanceArg) -> Result<Loaded, Failure> {
    let path = &input.instance;
    let text = fs::read_to_string(path).map_err(|e| {
        Failure::from(Error::Io {
            path: path.display().to_string(),
            source: e,
        })
    })?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| input_err(format!("{}: {e}", path.display())))?;
    let parse_err = |e: serde_json::Error| input_err(format!("{}: {e}", path.display()));
    if value.get("matching").is_some() {
        let bundle: TypedInstanceBundle = serde_json::from_value(value).map_err(parse_err)?;
        bundle.validate()?;
        Ok(Loaded {
            instance: bundle.matching.clone(),
            bundle: Some(bundle),
        })
    } else {
        let instance: MatchingInstance = serde_json::from_value(value).map_err(parse_err)?;
        instance.validate()?;
        Ok(Loaded {
            instance,
            bundle: None,
        })
    }
}

/// Shortest round-trip text of a number, as in the JSON output.
fn num(x: f64) -> String {
    serde_json::to_string(&x).expect("f64 serializes")
}

#[derive(Serialize)]
struct SolveReport<'a> {
    lambda: &'a [f64],
    #[serde(flatten)]
    solution: &'a fluidmatch::FluidSolution,
}

pub fn solve(input: &InstanceArg, lambda: &[f64], format: Format) -> CmdResult {
    let inst = load(input)?.instance;
    let sol = solve_fluid_lp(&inst, lambda)?;
    let report = SolveReport {
        lambda,
        solution: &sol,
    };
    let n = sol.n_types();
    let mut rows = vec![vec!["objective".into(), String::new(), String::new(), num(sol.objective)]];
    let idx = |i: usize| i.to_string();
    for i in 0..n {
        rows.push(vec!["y".into(), idx(i), String::new(), num(sol.y[i])]);
    }
    for i in 0..n {
        rows.push(vec!["gamma".into(), idx(i), String::new(), num(sol.gamma[i])]);
    }
    for (name, m) in [("x", &sol.x), ("eta", &sol.eta)] {
        for i in 0..n {
            for j in 0..n {
                rows.push(vec![name.into(), idx(i), idx(j), num(m[i][j])]);
            }
        }
    }
    let csv = csv_text(&["field", "i", "j", "value"], &rows);

    let mut table = String::new();
    writeln!(table, "objective  {}", sol.objective).unwrap();
    writeln!(table, "lambda     {}", render::vector(lambda)).unwrap();
    writeln!(table, "y          {}", render::vector(&sol.y)).unwrap();
    writeln!(table, "gamma      {}", render::vector(&sol.gamma)).unwrap();
    writeln!(table, "x").unwrap();
    table.push_str(&render::matrix(&sol.x, "  "));
    writeln!(table, "eta").unwrap();
    table.push_str(&render::matrix(&sol.eta, "  "));

    let json = render::json(&report);
    let text = match format {
        Format::Json => json.clone(),
        Format::Csv => csv.clone(),
        Format::Table => table,
    };
    Ok(Outcome {
        text,
        artifacts: vec![("solution.json".into(), json), ("solution.csv".into(), csv)],
        status: Status::Done,
    })
}

#[derive(Serialize)]
struct ClassifyReport {
    n_types: usize,
    lambda: Vec<f64>,
    case: Option<N2CaseLabel>,
    same_theta_case: Option<SameThetaCase>,
    closed_form: ClosedFormSolution,
    lp_objective: f64,
    abs_difference: f64,
}

pub fn classify(input: &InstanceArg, lambda: &[f64], format: Format) -> CmdResult {
    let inst = load(input)?.instance;
    let lp = solve_fluid_lp(&inst, lambda)?;
    let (case, same_theta_case, closed) = match inst.n_types() {
        1 => (
            None,
            None,
            closed_form::solve_n1(inst.theta[0], inst.solo_cost[0], lambda[0])?,
        ),
        2 => {
            let (label, sol) = closed_form::solve_n2(&inst, lambda)?;
            let same = if inst.all_theta_equal() {
                Some(closed_form::solve_n2_same_theta(&inst, lambda)?.0)
            } else {
                None
            };
            (Some(label), same, sol)
        }
        n => {
            return Err(input_err(format!(
                "closed forms exist for one or two types, instance has {n}"
            )))
        }
    };
    let report = ClassifyReport {
        n_types: inst.n_types(),
        lambda: lambda.to_vec(),
        case,
        same_theta_case,
        abs_difference: (closed.objective - lp.objective).abs(),
        lp_objective: lp.objective,
        closed_form: closed,
    };
    let mut table = String::new();
    if let Some(c) = &report.case {
        writeln!(
            table,
            "case         {} (delta1 {:.6}, delta2 {:.6}, delta3 {:.6})",
            c.case_id.name(),
            c.delta1,
            c.delta2,
            c.delta3
        )
        .unwrap();
    }
    if let Some(c) = &report.same_theta_case {
        writeln!(table, "same-theta   {c:?}").unwrap();
    }
    writeln!(table, "closed form  {}", report.closed_form.objective).unwrap();
    writeln!(table, "LP           {}", report.lp_objective).unwrap();
    writeln!(table, "|difference| {:e}", report.abs_difference).unwrap();
    Ok(outcome("classify", &report, table, format))
}

pub fn certify(input: &InstanceArg, format: Format) -> CmdResult {
    let inst = load(input)?.instance;
    let cert = concavity::certify(&inst)?;
    let mut table = format!("{}\n", cert.summary());
    if let (Some(t1), Some(t2)) = (cert.tau1, cert.tau2) {
        writeln!(table, "tau1 {t1}  tau2 {t2}").unwrap();
    }
    for (k, e) in &cert.critical_eff {
        writeln!(table, "critical efficiency e{k} = {e:.6}").unwrap();
    }
    if cert.required_lower_bounds.iter().any(|&b| b > 0.0) {
        writeln!(
            table,
            "rate floors required: {}",
            render::vector(&cert.required_lower_bounds)
        )
        .unwrap();
    }
    if let Some(w) = &cert.witness {
        writeln!(
            table,
            "kink at {} along {}: left {} right {}",
            render::vector(&w.lambda),
            w.coord,
            w.left,
            w.right
        )
        .unwrap();
    }
    for c in &cert.checks {
        writeln!(
            table,
            "  {:<20} {:<5} {}",
            c.rule.label(),
            if c.applies { "yes" } else { "no" },
            c.note
        )
        .unwrap();
    }
    Ok(outcome("certificate", &cert, table, format))
}

pub struct DiagnoseOptions {
    pub lambda: Option<Vec<f64>>,
    pub step: f64,
    pub coord: Option<usize>,
    pub probe: usize,
    pub rho: f64,
    pub rho_search: Option<f64>,
    pub seed: u64,
}

#[derive(Serialize)]
struct DiagnoseReport {
    lambda: Option<Vec<f64>>,
    hessian: Option<Hessian>,
    partials: Vec<(usize, OneSidedPartials)>,
    probe: Option<MidpointProbeReport>,
    rho_search: Option<RhoSearchReport>,
}

/// Midpoint pairs used by the curvature-shift search when `--probe` is 0.
const DEFAULT_SEARCH_PAIRS: usize = 1000;

pub fn diagnose(input: &InstanceArg, opts: DiagnoseOptions, format: Format) -> CmdResult {
    let inst = load(input)?.instance;
    if opts.lambda.is_none() && opts.probe == 0 && opts.rho_search.is_none() {
        return Err(input_err(
            "nothing to diagnose: pass --lambda, --probe or --rho-search",
        ));
    }
    let mut report = DiagnoseReport {
        lambda: opts.lambda.clone(),
        hessian: None,
        partials: Vec::new(),
        probe: None,
        rho_search: None,
    };
    if let Some(l) = &opts.lambda {
        inst.check_rates(l)?;
        report.hessian = Some(numerical_hessian(&inst, l, opts.step)?);
        let coords: Vec<usize> = match opts.coord {
            Some(c) => vec![c],
            None => (0..l.len()).collect(),
        };
        for c in coords {
            report
                .partials
                .push((c, one_sided_partials(&inst, l, c, opts.step)?));
        }
    }
    if opts.probe > 0 {
        report.probe = Some(probe_midpoint_concavity(
            &inst, opts.probe, opts.rho, opts.seed,
        )?);
    }
    if let Some(cap) = opts.rho_search {
        let pairs = if opts.probe > 0 {
            opts.probe
        } else {
            DEFAULT_SEARCH_PAIRS
        };
        report.rho_search = Some(find_weak_concavity_rho(&inst, pairs, opts.seed, cap)?);
    }

    let mut table = String::new();
    if let Some(h) = &report.hessian {
        writeln!(
            table,
            "Hessian (smooth: {}), top eigenvalue {:.6}",
            h.smooth,
            h.max_eigenvalue()
        )
        .unwrap();
        table.push_str(&render::matrix(&h.matrix, "  "));
    }
    for (c, p) in &report.partials {
        writeln!(
            table,
            "coord {c}: left {:.8} right {:.8}{}",
            p.left,
            p.right,
            if p.witness {
                "  (weak-concavity violation)"
            } else {
                ""
            }
        )
        .unwrap();
    }
    if let Some(p) = &report.probe {
        writeln!(
            table,
            "midpoint probe rho {}: {}/{} passed, {} violations",
            p.rho, p.passed, p.n_samples, p.violations
        )
        .unwrap();
    }
    if let Some(s) = &report.rho_search {
        match s.rho {
            Some(r) => writeln!(table, "curvature shift {r} passes (cap {})", s.cap),
            None => writeln!(table, "no curvature shift up to {} passes", s.cap),
        }
        .unwrap();
    }
    Ok(outcome("diagnose", &report, table, format))
}

fn demand_for(args: &PriceArgs, loaded: &Loaded) -> Result<DemandModel, Failure> {
    let inst = &loaded.instance;
    let solo = match (&args.solo_length, &loaded.bundle) {
        (Some(s), _) => s.clone(),
        (None, Some(b)) => b.demand.solo_length.clone(),
        (None, None) => {
            return Err(input_err(
                "--solo-length is required when the input is not a bundle",
            ))
        }
    };
    let max_rate = match (&args.max_rate, &loaded.bundle) {
        (Some(m), _) => m.clone(),
        (None, Some(b)) => b.demand.max_rate.clone(),
        (None, None) => inst.lambda_upper.clone(),
    };
    Ok(DemandModel::linear(solo, max_rate)?)
}

pub fn price(args: &PriceArgs, format: Format) -> CmdResult {
    let loaded = load(&args.input)?;
    let inst = &loaded.instance;
    let demand = demand_for(args, &loaded)?;
    let lambda0 = match &args.lambda0 {
        Some(l) => l.clone(),
        None => {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(args.seed);
            pricing::sample_in_box(inst, &mut rng)
        }
    };
    let result = match args.solver {
        SolverArg::Mm => pricing::mm_solve(
            inst,
            &demand,
            &lambda0,
            &MmOptions {
                eps: args.eps,
                delta_mm: args.delta_mm,
                time_cap: args.time_cap,
                rho_cap: args.rho_cap,
                seed: args.seed,
                ..Default::default()
            },
        )?,
        SolverArg::Pg => pricing::pg_solve(
            inst,
            &demand,
            &lambda0,
            &PgOptions {
                step0: args.step0,
                eps: args.eps,
                time_cap: args.time_cap,
                max_iterations: None,
            },
        )?,
    };
    let mut table = String::new();
    writeln!(table, "solver      {:?}", result.solver).unwrap();
    writeln!(table, "objective   {}", result.objective).unwrap();
    writeln!(table, "lambda*     {}", render::vector(&result.lambda_star)).unwrap();
    writeln!(
        table,
        "iterations  {} ({} LP solves, {:.3} s)",
        result.iterations, result.lp_solves, result.wall_time
    )
    .unwrap();
    if result.solver == pricing::SolverKind::MM {
        writeln!(table, "rho max     {}", result.rho_max).unwrap();
    }
    writeln!(table, "converged   {}", result.converged).unwrap();

    let mut out = outcome("pricing", &result, table, format);
    let traj: Vec<Vec<String>> = result
        .trajectory
        .iter()
        .enumerate()
        .map(|(k, g)| vec![k.to_string(), num(*g)])
        .collect();
    out.artifacts
        .push(("trajectory.csv".into(), csv_text(&["iteration", "objective"], &traj)));
    if !result.converged {
        out.status = Status::Partial;
    }
    Ok(out)
}

/// `equal:THETA` or `uniform:LOW,HIGH`.
pub fn parse_theta(spec: &str) -> Result<ThetaSpec, Failure> {
    let bad = || input_err(format!("bad theta spec {spec:?}; use equal:T or uniform:LO,HI"));
    let (kind, rest) = spec.split_once(':').ok_or_else(bad)?;
    let nums: Vec<f64> = rest
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| bad())?;
    match (kind.trim(), nums.as_slice()) {
        ("equal", [t]) => Ok(ThetaSpec::Equal { theta: *t }),
        ("uniform", [lo, hi]) => Ok(ThetaSpec::Uniform {
            low: *lo,
            high: *hi,
        }),
        _ => Err(bad()),
    }
}

#[derive(Serialize)]
struct IngestReport {
    bundle: String,
    n_trips: usize,
    n_types: usize,
    counts: Vec<f64>,
    theta: Vec<f64>,
    solo_length: Vec<f64>,
}

pub fn ingest(args: &IngestArgs, format: Format) -> CmdResult {
    let theta = parse_theta(&args.theta)?;
    let trips = data::read_trips_csv(&args.trips)?;
    let bundle = data::build_bundle(
        &trips,
        &BundleOptions {
            n_types: args.n_types,
            c_per_mile: args.c_per_mile,
            theta,
            hours: args.hours,
            seed: args.seed,
            ..Default::default()
        },
    )?;
    bundle.save(&args.bundle)?;
    let report = IngestReport {
        bundle: args.bundle.display().to_string(),
        n_trips: trips.len(),
        n_types: bundle.n_types(),
        counts: bundle.counts.clone(),
        theta: bundle.matching.theta.clone(),
        solo_length: bundle.demand.solo_length.clone(),
    };
    let mut table = format!(
        "{} trips -> {} types, bundle written to {}\n",
        report.n_trips, report.n_types, report.bundle
    );
    writeln!(table, "trips/hour  {}", render::vector(&report.counts)).unwrap();
    writeln!(table, "theta       {}", render::vector(&report.theta)).unwrap();
    writeln!(table, "solo miles  {}", render::vector(&report.solo_length)).unwrap();
    Ok(outcome("ingest", &report, table, format))
}

pub fn synth(
    n_trips: usize,
    n_hotspots: usize,
    spread: f64,
    extent: f64,
    seed: u64,
    output: Option<&Path>,
) -> CmdResult {
    let spec = SynthSpec {
        n_trips,
        n_hotspots,
        spread,
        extent,
    };
    let trips = data::synth_trips(&spec, seed)?;
    let mut buf = Vec::new();
    data::write_trips_csv(&trips, &mut buf)?;
    let csv = String::from_utf8(buf).expect("csv is utf-8");
    let text = match output {
        Some(path) => {
            data::save_trips_csv(&trips, path)?;
            format!("{} trips written to {}\n", trips.len(), path.display())
        }
        None => csv.clone(),
    };
    Ok(Outcome {
        text,
        artifacts: vec![("trips.csv".into(), csv)],
        status: Status::Done,
    })
}

fn parse_solver(s: &str) -> Result<SolverSpec, Failure> {
    let s = s.trim();
    if s.eq_ignore_ascii_case("mm") {
        return Ok(SolverSpec::MM);
    }
    let step = s
        .strip_prefix("pg:")
        .or_else(|| s.strip_prefix("PG:"))
        .and_then(|t| t.parse::<f64>().ok())
        .filter(|x| x.is_finite() && *x > 0.0)
        .ok_or_else(|| input_err(format!("bad solver {s:?}; use mm or pg:STEP0")))?;
    Ok(SolverSpec::PG { step0: step })
}

pub fn benchmark(args: &BenchmarkArgs, format: Format) -> CmdResult {
    let solvers: Vec<SolverSpec> = args
        .solvers
        .iter()
        .map(|s| parse_solver(s))
        .collect::<Result<_, _>>()?;
    let theta = parse_theta(&args.theta)?;
    let mut cases = Vec::new();
    for path in &args.bundle {
        let b = TypedInstanceBundle::load(path)?;
        let id = path
            .file_stem()
            .map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into());
        cases.push(BenchmarkCase {
            id,
            demand: b.demand_model(),
            instance: b.matching,
        });
    }
    for &n in &args.synthetic_n {
        for &c in &args.c_per_mile {
            let b = data::synthetic_bundle(n, c, theta, args.instance_seed)?;
            cases.push(BenchmarkCase {
                id: format!("synth_n{n}_c{c}"),
                demand: b.demand_model(),
                instance: b.matching,
            });
        }
    }
    if cases.is_empty() {
        return Err(input_err("no instances: pass --bundle or --synthetic-n"));
    }
    let table = pricing::benchmark(
        &cases,
        &solvers,
        &args.seeds,
        &BenchmarkOptions {
            eps: args.eps,
            time_cap: args.time_cap,
            delta_mm: args.delta_mm,
            max_iterations: None,
        },
    )?;
    let mut buf = Vec::new();
    table.write_csv(&mut buf)?;
    let csv = String::from_utf8(buf).expect("csv is utf-8");
    let summary_rows: Vec<Vec<String>> = table
        .summary
        .iter()
        .map(|s| {
            vec![
                s.instance_id.clone(),
                format!("{:?}", s.solver),
                s.step0.map(num).unwrap_or_default(),
                s.runs.to_string(),
                s.failures.to_string(),
                num(s.mean_time_s),
                num(s.mean_iters),
                num(s.mean_objective),
            ]
        })
        .collect();
    let summary_csv = csv_text(
        &[
            "instance_id",
            "solver",
            "step0",
            "runs",
            "failures",
            "mean_time_s",
            "mean_iters",
            "mean_objective",
        ],
        &summary_rows,
    );

    let mut text_table = format!(
        "{:<22} {:<4} {:>6} {:>5} {:>10} {:>8} {:>14}\n",
        "instance", "alg", "step0", "runs", "time_s", "iters", "objective"
    );
    for s in &table.summary {
        writeln!(
            text_table,
            "{:<22} {:<4} {:>6} {:>5} {:>10.4} {:>8.2} {:>14.6}{}",
            s.instance_id,
            format!("{:?}", s.solver),
            s.step0.map(|x| x.to_string()).unwrap_or_default(),
            s.runs,
            s.mean_time_s,
            s.mean_iters,
            s.mean_objective,
            if s.failures > 0 {
                format!("  ({} failed)", s.failures)
            } else {
                String::new()
            }
        )
        .unwrap();
    }
    let json = render::json(&table);
    let text = match format {
        Format::Json => json.clone(),
        Format::Csv => csv.clone(),
        Format::Table => text_table,
    };
    let status = if table.rows.iter().any(|r| r.error.is_some()) {
        Status::Failed
    } else if table.rows.iter().any(|r| !r.converged) {
        Status::Partial
    } else {
        Status::Done
    };
    for r in table.rows.iter().filter(|r| r.error.is_some()) {
        eprintln!(
            "cell {} {:?} seed {} failed: {}",
            r.instance_id,
            r.solver,
            r.seed,
            r.error.as_deref().unwrap_or("")
        );
    }
    Ok(Outcome {
        text,
        artifacts: vec![
            ("benchmark.csv".into(), csv),
            ("summary.csv".into(), summary_csv),
            ("benchmark.json".into(), json),
        ],
        status,
    })
}

pub fn examples(id: Option<u8>, format: Format) -> CmdResult {
    let ids: Vec<u8> = match id {
        Some(i) => vec![i],
        None => (1..=5).collect(),
    };
    let reports: Vec<ExampleReport> = ids
        .iter()
        .map(|&i| appendix::run_example(i))
        .collect::<Result<_, _>>()?;
    let mut table = String::new();
    for r in &reports {
        writeln!(table, "Example {}: {}", r.id, r.title).unwrap();
        for c in &r.checks {
            writeln!(
                table,
                "  {} {:<40} {:>14.8}  in [{}, {}]",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.value,
                c.lo,
                c.hi
            )
            .unwrap();
        }
    }
    let rows: Vec<Vec<String>> = reports
        .iter()
        .flat_map(|r| {
            r.checks.iter().map(move |c| {
                vec![
                    r.id.to_string(),
                    c.name.clone(),
                    num(c.value),
                    num(c.lo),
                    num(c.hi),
                    c.passed.to_string(),
                ]
            })
        })
        .collect();
    let csv = csv_text(&["example", "check", "value", "lo", "hi", "passed"], &rows);
    let json = render::json(&reports);
    let mut artifacts = vec![
        ("examples.json".into(), json.clone()),
        ("examples.csv".into(), csv.clone()),
    ];
    if ids.contains(&5) {
        artifacts.push(("example5_grid.csv".into(), example5_grid()?));
    }
    let text = match format {
        Format::Json => json,
        Format::Csv => csv,
        Format::Table => table,
    };
    let status = if reports.iter().all(ExampleReport::passed) {
        Status::Done
    } else {
        Status::Failed
    };
    Ok(Outcome {
        text,
        artifacts,
        status,
    })
}

/// Plot data for the multimodal example: `g` over the rate grid.
fn example5_grid() -> Result<String, Failure> {
    let inst = appendix::example_instance(5)?;
    let scan = appendix::scan_objective_grid(
        &inst,
        &appendix::example5_demand(),
        GRID_RANGE,
        GRID_RESOLUTION,
    )?;
    let mut rows = Vec::with_capacity(scan.axis.len() * scan.axis.len());
    for (i, a) in scan.axis.iter().enumerate() {
        for (j, b) in scan.axis.iter().enumerate() {
            rows.push(vec![num(*a), num(*b), num(scan.values[i][j])]);
        }
    }
    Ok(csv_text(&["lambda1", "lambda2", "g"], &rows))
}
