//! Batch front-end: `dirac-index <bulk|interface|flow|verify|clifford>`.
//!
//! Every run prints one JSON document to stdout. With `--out DIR` the same
//! document and any CSV tables are also written to DIR. Exit status is 0 on
//! success, 2 when the input is rejected and 3 when the numerics fail.

pub mod config;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use crate::calculus::{hs_apply, HsQuadrature, SmoothFn, SmoothSwitch};
use crate::clifford::{build_gamma, build_interface_gamma, verify_relations};
use crate::error::Error;
use crate::identities::{check_identity_2d, check_identity_even, check_identity_odd, Sampler};
use crate::interface1d::{
    branch_winding_raw, delta_bound, symmetric_samples, trace_branch, zero_modes, Grid1D, InterfaceProblem,
};
use crate::invariants::{
    closed_form_index, curvature_chern, degree_index, total_bulk_index, winding_quadrature, InvariantResult,
};
use crate::linalg::{frobenius, hermitian_apply, random_hermitian, C64};
use crate::ribbon::{spectral_flow, FlowOptions, Perturbation, Rect, RibbonGrid};
use crate::symbol::{h_field, DiracBlock, Side};

use config::{BulkMethod, RunConfig, Suite};

/// Version of the JSON documents written by the front-end.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(name = "dirac-index", version, about = "Topological invariants of continuous Dirac models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory for JSON and CSV outputs.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Overrides the quadrature tolerance of `bulk` and `verify`.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Overrides the base seed of `flow` and `verify`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, Subcommand, PartialEq, Eq)]
pub enum Command {
    /// Bulk indices of every block of the model.
    Bulk,
    /// Edge branch and its winding for one wall.
    Interface,
    /// Spectral flow on the flux-threaded ribbon.
    Flow,
    /// Integral identities, functional calculus and Clifford checks.
    Verify,
    /// Gamma matrices and their defining relations.
    Clifford,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Bulk => "bulk",
            Command::Interface => "interface",
            Command::Flow => "flow",
            Command::Verify => "verify",
            Command::Clifford => "clifford",
        }
    }
}

#[derive(Debug)]
enum Failure {
    Validation(String),
    Core(Error),
}

impl Failure {
    fn exit_code(&self) -> i32 {
        match self {
            Failure::Core(e) if e.is_numerical() => 3,
            _ => 2,
        }
    }

    fn to_json(&self) -> Value {
        let (kind, message) = match self {
            Failure::Validation(m) => ("ConfigError", m.clone()),
            Failure::Core(e) => (e.kind(), e.to_string()),
        };
        json!({ "kind": kind, "message": message, "exit_code": self.exit_code() })
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

/// A number together with how it was obtained.
#[derive(Debug, Clone, Serialize)]
pub struct Measured<T: Serialize> {
    pub value: T,
    pub method: &'static str,
    pub est_error: f64,
}

fn measured<T: Serialize>(value: T, method: &'static str, est_error: f64) -> Measured<T> {
    Measured { value, method, est_error }
}

/// A table destined for a CSV file.
struct Table {
    name: &'static str,
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

struct Report {
    body: Value,
    tables: Vec<Table>,
}

/// Parses `args`, runs the command and returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let start = Instant::now();
    let command = cli.command.name();
    let result = prepare(&cli).and_then(|cfg| dispatch(&cli, &cfg));
    let wall_time_s = start.elapsed().as_secs_f64();
    let (mut body, tables, code) = match result {
        Ok(r) => (r.body, r.tables, 0),
        Err(f) => (json!({ "error": f.to_json() }), vec![], f.exit_code()),
    };
    let obj = body.as_object_mut().expect("reports are objects");
    obj.insert("schema_version".into(), json!(SCHEMA_VERSION));
    obj.insert("command".into(), json!(command));
    obj.insert("wall_time_s".into(), json!(wall_time_s));
    let text = serde_json::to_string_pretty(&body).expect("report serialises");
    // A closed stdout (e.g. piped into `head`) is not an error of the run.
    let _ = writeln!(std::io::stdout().lock(), "{text}");
    if let Some(dir) = &cli.out {
        if let Err(e) = persist(dir, command, &text, &tables) {
            eprintln!("{e}");
            return if code == 0 { 2 } else { code };
        }
    }
    code
}

fn prepare(cli: &Cli) -> Outcome<RunConfig> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::Validation("--threads must be positive".into()));
        }
        // A second call in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    if let Some(t) = cli.tol {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Failure::Validation(format!("--tol must be positive, got {t}")));
        }
    }
    match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::Validation(format!("cannot read {}: {e}", path.display())))?;
            RunConfig::parse(&text).map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))
        }
        None => Ok(RunConfig::empty()),
    }
}

fn persist(dir: &Path, command: &str, json_text: &str, tables: &[Table]) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(format!("{command}.json")), format!("{json_text}\n"))?;
    for t in tables {
        let mut w = csv::Writer::from_path(dir.join(format!("{}.csv", t.name)))?;
        w.write_record(&t.header)?;
        for r in &t.rows {
            w.write_record(r)?;
        }
        w.flush()?;
    }
    Ok(())
}

fn dispatch(cli: &Cli, cfg: &RunConfig) -> Outcome<Report> {
    match cli.command {
        Command::Bulk => cmd_bulk(cli, cfg),
        Command::Interface => cmd_interface(cfg),
        Command::Flow => cmd_flow(cli, cfg),
        Command::Verify => cmd_verify(cli, cfg),
        Command::Clifford => cmd_clifford(cfg),
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serialisable")
}

fn bulk_entries(block: &DiracBlock, method: BulkMethod, tol: f64) -> Outcome<Vec<InvariantResult>> {
    let d = block.d;
    let methods: Vec<BulkMethod> = match method {
        BulkMethod::All if d.is_multiple_of(2) => vec![BulkMethod::ClosedForm, BulkMethod::Curvature, BulkMethod::Degree],
        BulkMethod::All => vec![BulkMethod::ClosedForm, BulkMethod::Degree, BulkMethod::Winding],
        m => vec![m],
    };
    let mut out = Vec::new();
    for m in methods {
        out.push(match m {
            BulkMethod::ClosedForm => closed_form_index(block)?,
            BulkMethod::Curvature => curvature_chern(block, tol)?,
            BulkMethod::Degree => degree_index(&h_field(block)?, tol)?,
            BulkMethod::Winding => winding_quadrature(block, tol)?,
            BulkMethod::All => unreachable!(),
        });
    }
    Ok(out)
}

fn cmd_bulk(cli: &Cli, cfg: &RunConfig) -> Outcome<Report> {
    let model_cfg = cfg.model.as_ref().ok_or_else(|| Failure::Validation("bulk needs a [model] section".into()))?;
    let model = model_cfg.build()?;
    let tol = cli.tol.unwrap_or(cfg.bulk.tol);
    let side = cfg.bulk.side;
    let mut blocks = Vec::new();
    for block in &model.blocks {
        let b = match side {
            Side::Bulk => block.clone(),
            s => block.at_mass(block.mass_on(s)?),
        };
        blocks.push(json!({ "block": to_value(block), "results": to_value(&bulk_entries(&b, cfg.bulk.method, tol)?) }));
    }
    let total = total_bulk_index(&model, side)?;
    let total_value = measured(total.value, "closed_form", total.est_error);
    let mut body = json!({
        "model_echo": to_value(model_cfg),
        "side": to_value(&side),
        "tol": tol,
        "blocks": blocks,
        "total": to_value(&total_value),
        "half_integer": total.half_integer,
    });
    // A single block reports its entries at the top level as well.
    if model.blocks.len() == 1 {
        body["results"] = body["blocks"][0]["results"].clone();
    }
    Ok(Report { body, tables: vec![] })
}

fn cmd_interface(cfg: &RunConfig) -> Outcome<Report> {
    let ic = cfg.interface.as_ref().ok_or_else(|| Failure::Validation("interface needs an [interface] section".into()))?;
    ic.profile.validate()?;
    if ic.samples < 3 {
        return Err(Failure::Validation(format!("samples = {} must be at least 3", ic.samples)));
    }
    let problem = InterfaceProblem::new(ic.profile.clone(), ic.eta).with_cone(ic.ax, ic.ay)?.with_order(ic.order);
    let m0 = ic.profile.m0();
    let bound = delta_bound(m0, ic.eta)?;
    if let Some(delta) = ic.delta {
        if !(delta > 0.0 && delta < bound) {
            return Err(Error::InvalidParameter(format!(
                "delta = {delta} violates 0 < delta < m0 / sqrt(1 + 2|eta| m0) = {bound}"
            ))
            .into());
        }
    }
    let grid = Grid1D::for_profile(&ic.profile, ic.h)?;
    grid.validate_for(&ic.profile)?;
    let zm = zero_modes(&problem, &grid)?;
    let track_delta = problem.default_delta()?;
    let speed = ic.ay.abs();
    let zeta_half = 0.95 * track_delta / speed.max(1.0);
    let reach = speed * zeta_half * (ic.samples - 1) as f64 / ic.samples as f64;
    let switch_delta = ic.delta.unwrap_or(0.8 * reach);
    let chi = SmoothSwitch::new(switch_delta)?;
    let zetas = symmetric_samples(zeta_half, ic.samples);

    let mut body = json!({
        "problem_echo": to_value(&problem),
        "grid": { "x_min": grid.x_min, "x_max": grid.x_max, "n": grid.n, "h": grid.h() },
        "eps": to_value(&measured(zm.eps, "kernel_dimension_difference", 0.0)),
        "dim_ker_a": zm.dim_ker_a,
        "dim_ker_a_star": zm.dim_ker_a_star,
        "eta_used": zm.eta_used,
        "delta_bound": to_value(&measured(bound, "closed_form", 0.0)),
        "switch_delta": switch_delta,
    });
    let mut tables = vec![];
    if zm.eps == 0 {
        body["winding"] = to_value(&measured(0i64, "no_interface_branch", 0.0));
        body["note"] = json!("empty branch: the profile does not change sign, so no interface state crosses the gap");
        tables.push(Table { name: "interface_branch", header: vec!["zeta", "E", "overlap", "tail_mass"], rows: vec![] });
        return Ok(Report { body, tables });
    }
    if !ic.profile.is_monotone() {
        return Err(Failure::Validation("branch tracking needs a monotone profile; the zero-mode count is reported only for monotone profiles".into()));
    }
    let branch = trace_branch(&problem, &grid, &zetas)?;
    let raw = branch_winding_raw(&branch, &chi)?;
    let slope = branch.slope().unwrap_or(f64::NAN);
    let fit_residual = {
        let n = branch.energies.len() as f64;
        let mz = branch.zeta_samples.iter().sum::<f64>() / n;
        let me = branch.energies.iter().sum::<f64>() / n;
        let ss: f64 = branch
            .zeta_samples
            .iter()
            .zip(&branch.energies)
            .map(|(z, e)| (e - me - slope * (z - mz)).powi(2))
            .sum();
        (ss / n).sqrt()
    };
    body["winding"] = to_value(&measured(raw.round() as i64, "edge_unitary_winding", (raw - raw.round()).abs()));
    body["winding_raw"] = json!(raw);
    body["slope"] = to_value(&measured(slope, "least_squares_fit", fit_residual));
    body["expected_slope"] = json!(problem.expected_slope());
    body["min_overlap"] = json!(branch.min_overlap());
    body["samples"] = json!(branch.zeta_samples.len());
    tables.push(Table {
        name: "interface_branch",
        header: vec!["zeta", "E", "overlap", "tail_mass"],
        rows: branch.rows().iter().map(|r| r.iter().map(|x| x.to_string()).collect()).collect(),
    });
    Ok(Report { body, tables })
}

fn cmd_flow(cli: &Cli, cfg: &RunConfig) -> Outcome<Report> {
    let model_cfg = cfg.model.as_ref().ok_or_else(|| Failure::Validation("flow needs a [model] section".into()))?;
    let fc = cfg.flow.as_ref().ok_or_else(|| Failure::Validation("flow needs a [flow] section".into()))?;
    let model = model_cfg.build()?;
    if fc.seeds == 0 {
        return Err(Failure::Validation("seeds must be at least 1".into()));
    }
    let grid = fc.grid.unwrap_or_else(RibbonGrid::desk_default);
    let opts = FlowOptions {
        theta_steps: fc.theta_steps,
        window: fc.window,
        max_window_states: fc.max_window_states,
        ..Default::default()
    };
    let base_seed = cli.seed.unwrap_or(fc.seed);
    let seeds: Vec<u64> = match fc.perturbation {
        Some(_) => (0..fc.seeds as u64).map(|k| base_seed.wrapping_add(k)).collect(),
        None => vec![base_seed],
    };
    let predicted = crate::invariants::interface_index_prediction(&model)?;
    let mut runs = Vec::new();
    let mut rows = Vec::new();
    for &seed in &seeds {
        let pert = fc.perturbation.as_ref().map(|p| {
            let support = p.support.unwrap_or(Rect { x_min: -1.0, x_max: 1.0, y_min: 0.0, y_max: grid.ly });
            Perturbation::new(p.kind, p.amplitude, support, p.correlation_length, seed)
        });
        let r = spectral_flow(&model, &fc.profiles, pert.as_ref(), &grid, fc.e_star, &opts)?;
        for s in &r.samples {
            for (k, (e, w)) in s.energies.iter().zip(&s.interior_weights).enumerate() {
                rows.push(vec![
                    seed.to_string(),
                    s.theta.to_string(),
                    k.to_string(),
                    e.to_string(),
                    w.to_string(),
                    s.count_below.to_string(),
                ]);
            }
        }
        runs.push(json!({
            "seed": seed,
            "flow": to_value(&measured(r.flow, "overlap_tracked_crossings", r.integrality_defect)),
            "boundary_flow": to_value(&measured(r.boundary_flow, "overlap_tracked_crossings", r.integrality_defect)),
            "window": r.window,
            "crossings": to_value(&r.crossings),
        }));
    }
    let flows: Vec<i64> = runs.iter().map(|r| r["flow"]["value"].as_i64().expect("integer flow")).collect();
    let consistent = flows.iter().all(|&f| f == flows[0]);
    let body = json!({
        "model_echo": to_value(model_cfg),
        "flow_config": to_value(fc),
        "grid": to_value(&grid),
        "e_star": fc.e_star,
        "predicted_index": to_value(&measured(predicted, "bulk_closed_form_difference", 0.0)),
        "runs": runs,
        "summary": {
            "flows": flows,
            "all_equal": consistent,
            "matches_prediction": consistent && flows[0] == predicted,
        },
    });
    let table = Table {
        name: "flow_theta",
        header: vec!["seed", "theta", "level", "energy", "interior_weight", "count_below"],
        rows,
    };
    Ok(Report { body, tables: vec![table] })
}

fn cmd_verify(cli: &Cli, cfg: &RunConfig) -> Outcome<Report> {
    let vc = &cfg.verify;
    let tol = cli.tol.unwrap_or(vc.tol);
    let seed = cli.seed.unwrap_or(vc.seed);
    let mut body = json!({ "verify_config": to_value(vc) });
    let mut all_pass = true;
    if vc.suites.contains(&Suite::Identities) {
        let mut planar = Vec::new();
        for [y1, y2] in &vc.planar_pairs {
            for (form, r) in [
                ("scalar", check_identity_2d(*y1, *y2, vc.cutoff, tol)?),
                ("matrix", check_identity_even(*y1, *y2, vc.cutoff, tol)?),
            ] {
                let pass = r.rel_error < 1e-3;
                all_pass &= pass;
                planar.push(json!({ "y1": y1, "y2": y2, "form": form, "result": to_value(&r), "pass": pass }));
            }
        }
        let mut odd = Vec::new();
        for (k, pts) in vc.odd_configs.iter().enumerate() {
            let points: Vec<Vec<f64>> = pts.iter().map(|p| p.to_vec()).collect();
            let sampler = Sampler::MonteCarlo { samples: vc.mc_samples, seed: seed.wrapping_add(k as u64) };
            let r = check_identity_odd(&points, sampler)?;
            let pass = r.deviation_in_errors() < 3.0;
            all_pass &= pass;
            odd.push(json!({ "points": pts, "result": to_value(&r), "sigmas": r.deviation_in_errors(), "pass": pass }));
        }
        body["identities"] = json!({ "planar": planar, "odd": odd });
    }
    if vc.suites.contains(&Suite::Calculus) {
        let chi = SmoothSwitch::new(0.5)?;
        let quad = HsQuadrature::adaptive(tol * 1e-2);
        let mut entries = Vec::new();
        for k in 0..vc.hs_matrices {
            let s = seed.wrapping_add(k as u64);
            let h = random_hermitian(vc.hs_dim, s);
            let r = hs_apply(&h, &chi, vc.hs_order, &quad)?;
            let exact = hermitian_apply(&h, |e| C64::new(chi.value(e), 0.0));
            let err = frobenius(&(&r.matrix - exact));
            let pass = err < tol;
            all_pass &= pass;
            entries.push(json!({
                "seed": s,
                "dim": vc.hs_dim,
                "frobenius_error": to_value(&measured(err, "hs_vs_spectral", r.est_error)),
                "sliver_bound": r.sliver_bound,
                "nodes": r.nodes,
                "pass": pass,
            }));
        }
        body["calculus"] = json!({ "function": "smooth_switch", "delta": chi.delta, "n": vc.hs_order, "checks": entries });
    }
    if vc.suites.contains(&Suite::Clifford) {
        let mut reports = Vec::new();
        for d in 1..=6 {
            let mut reps = vec![build_gamma(d)?];
            if d >= 2 {
                reps.push(build_interface_gamma(d)?);
            }
            for rep in reps {
                let r = verify_relations(&rep);
                all_pass &= r.is_clean();
                reports.push(to_value(&r));
            }
        }
        body["clifford"] = Value::Array(reports);
    }
    body["all_pass"] = json!(all_pass);
    Ok(Report { body, tables: vec![] })
}

fn cmd_clifford(cfg: &RunConfig) -> Outcome<Report> {
    let cc = &cfg.clifford;
    let mut reps = Vec::new();
    for &d in &cc.dims {
        let mut both = vec![build_gamma(d)?];
        if d >= 2 {
            both.push(build_interface_gamma(d)?);
        }
        for rep in both {
            let report = verify_relations(&rep);
            let mut entry = json!({
                "d": d,
                "kind": to_value(&rep.kind),
                "size": rep.size(),
                "kappa": rep.kappa,
                "checked": report.checked,
                "violations": to_value(&report.violations),
            });
            if cc.emit_matrices {
                let enc = |m: &crate::linalg::CMat| -> Value {
                    json!((0..m.nrows())
                        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect::<Vec<_>>())
                        .collect::<Vec<_>>())
                };
                entry["gammas"] = Value::Array(rep.gammas.iter().map(enc).collect());
                if let Some(g0) = &rep.chiral {
                    entry["chiral"] = enc(g0);
                }
            }
            reps.push(entry);
        }
    }
    Ok(Report { body: json!({ "representations": reps }), tables: vec![] })
}
