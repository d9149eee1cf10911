use std::path::Path;

use powerctl_core::fixedpoint::{
    certify_standard, iterate_async, iterate_sync, AsyncSchedule, CertifySampler, InterferenceMap, IterOptions,
};
use powerctl_core::scenario::{Algo, PerLink, ResolvedScenario};
use powerctl_core::{
    check_feasibility, feasibility_mc, generate, max_uniform_scaling, oracle_gridsearch, solve_g2off, solve_g2too,
    solve_mc, total_utility, FeasibilityStatus, G2offConfig, G2tooConfig, GeneratorSpec, LogSolution, McConfig,
    PowerVector, ScenarioFile, SinrVector,
};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::args::{Command, Common, GammaArg, Range};
use crate::error::{CliError, CliResult};
use crate::plot::PLOT_SCRIPT;
use crate::report::{canonical_digest, Status};

pub struct Artifact {
    pub name: String,
    pub contents: Vec<u8>,
}

pub struct Outcome {
    pub status: Status,
    pub results: Value,
    pub artifacts: Vec<Artifact>,
}

/// Parsed inputs and the effective settings after flag overrides.
pub struct Context {
    pub common: Common,
    pub scenario: Option<ScenarioFile>,
    pub input_digest: Option<String>,
}

impl Context {
    pub fn load(common: &Common) -> CliResult<Self> {
        let Some(path) = &common.scenario else {
            return Ok(Self {
                common: common.clone(),
                scenario: None,
                input_digest: None,
            });
        };
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
            path: path.clone(),
            source,
        })?;
        let raw: Value =
            serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{} is not valid JSON: {e}", path.display())))?;
        let scenario = ScenarioFile::from_json(&text)?;
        Ok(Self {
            common: common.clone(),
            scenario: Some(scenario),
            input_digest: Some(canonical_digest(&raw)),
        })
    }

    fn scenario(&self) -> CliResult<&ScenarioFile> {
        self.scenario
            .as_ref()
            .ok_or_else(|| CliError::Input("this command needs --scenario FILE".into()))
    }

    fn resolved(&self) -> CliResult<ResolvedScenario> {
        Ok(self.scenario()?.resolve()?)
    }

    pub fn seed(&self) -> u64 {
        self.common
            .seed
            .or_else(|| self.scenario.as_ref().and_then(|s| s.solver.seed))
            .unwrap_or(0)
    }

    fn tol(&self) -> Option<f64> {
        self.common.tol.or_else(|| self.scenario.as_ref().and_then(|s| s.solver.tol))
    }

    fn max_iter(&self) -> Option<usize> {
        self.common.max_iter.or_else(|| self.scenario.as_ref().and_then(|s| s.solver.max_iter))
    }

    fn algo(&self) -> Algo {
        self.common
            .algo
            .map(Algo::from)
            .or_else(|| self.scenario.as_ref().and_then(|s| s.solver.algo))
            .unwrap_or(Algo::G2off)
    }

    fn staleness(&self) -> Option<usize> {
        self.common
            .async_staleness
            .or_else(|| self.scenario.as_ref().and_then(|s| s.solver.async_staleness))
    }

    fn update_probability(&self) -> f64 {
        self.scenario.as_ref().and_then(|s| s.solver.update_probability).unwrap_or(1.0)
    }

    fn noise(&self) -> f64 {
        self.common
            .noise
            .or_else(|| self.scenario.as_ref().and_then(|s| s.solver.measurement_noise))
            .unwrap_or(0.0)
    }

    fn allow_nonconcave(&self) -> bool {
        self.common.allow_nonconcave || self.scenario.as_ref().and_then(|s| s.solver.allow_nonconcave).unwrap_or(false)
    }

    fn gamma_target(&self, r: &ResolvedScenario) -> CliResult<SinrVector> {
        match self.common.gamma {
            Some(GammaArg::Value(g)) => Ok(SinrVector::uniform(r.model.num_links(), g)?),
            Some(GammaArg::Range(_)) => Err(CliError::Input("a --gamma range is only accepted by sweep and plot".into())),
            None => r
                .gamma_target
                .clone()
                .ok_or_else(|| CliError::Input("no SINR target: pass --gamma X or set gamma_target in the scenario".into())),
        }
    }

    fn g2off_config(&self) -> G2offConfig {
        let d = G2offConfig::default();
        G2offConfig {
            tol: self.tol().unwrap_or(d.tol),
            max_iter: self.max_iter().unwrap_or(d.max_iter),
            allow_nonconcave: self.allow_nonconcave(),
            ..d
        }
    }

    fn g2too_config(&self, n: usize) -> CliResult<G2tooConfig> {
        let d = G2tooConfig::new(n);
        let p = self.update_probability();
        let schedule = AsyncSchedule::uniform(n, self.staleness().unwrap_or(0), p, self.seed());
        Ok(G2tooConfig {
            schedule,
            measurement_noise: self.noise(),
            tol: self.tol().unwrap_or(d.tol),
            max_iter: self.max_iter().unwrap_or(d.max_iter),
            allow_nonconcave: self.allow_nonconcave(),
            ..d
        })
    }

    fn mc_config(&self) -> McConfig {
        let d = McConfig::default();
        McConfig {
            tol: self.tol().unwrap_or(d.tol),
            max_iter: self.max_iter().unwrap_or(d.max_iter),
            allow_nonconcave: self.allow_nonconcave(),
            ..d
        }
    }
}

fn to_value<T: Serialize>(v: &T) -> CliResult<Value> {
    serde_json::to_value(v).map_err(|e| CliError::Internal(format!("result does not serialize: {e}")))
}

fn csv_bytes<T: Serialize>(rows: &[T]) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Internal(format!("csv: {e}")))?;
    }
    w.into_inner().map_err(|e| CliError::Internal(format!("csv: {e}")))
}

fn finite_or_null(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

pub fn run(command: &Command, ctx: &Context) -> CliResult<Outcome> {
    match command {
        Command::CheckFeas => check_feas(ctx),
        Command::FixedPoint => fixed_point(ctx),
        Command::Solve => solve(ctx),
        Command::SolveMc => solve_multicarrier(ctx),
        Command::Sweep { budget } => sweep(ctx, *budget),
        Command::CertifyIf { pairs } => certify_if(ctx, *pairs),
        Command::Oracle {
            resolution,
            refine_rounds,
        } => oracle(ctx, *resolution, *refine_rounds),
        Command::Plot => plot(ctx),
        Command::Generate {
            links,
            area,
            alpha,
            min_distance,
        } => generate_scenario(ctx, *links, *area, *alpha, *min_distance),
    }
}

fn check_feas(ctx: &Context) -> CliResult<Outcome> {
    let r = ctx.resolved()?;
    let gamma = ctx.gamma_target(&r)?;
    let verdict = check_feasibility(&r.model, &gamma)?;
    let scaling = max_uniform_scaling(&r.model, &gamma)?;
    let mut results = json!({
        "num_links": r.model.num_links(),
        "gamma_target": gamma.as_slice(),
        "rho": verdict.rho,
        "status": verdict.status,
        "feasible": verdict.is_feasible(),
        "p_star": verdict.p_star,
        "bound_violations": verdict.bound_violations,
        "max_uniform_scaling": finite_or_null(scaling),
    });
    let mut feasible = verdict.is_feasible();
    if let Some((mc, _)) = &r.multicarrier {
        let targets = vec![gamma.to_vec(); mc.num_carriers()];
        let v = feasibility_mc(mc, &targets)?;
        feasible &= v.is_feasible();
        results["multicarrier"] = to_value(&v)?;
    }
    Ok(Outcome {
        status: if feasible { Status::Ok } else { Status::Infeasible },
        results,
        artifacts: Vec::new(),
    })
}

fn interference_map(r: &ResolvedScenario, gamma: &SinrVector) -> CliResult<InterferenceMap> {
    let map = InterferenceMap::target_sinr(&r.model, gamma)?;
    Ok(if r.model.p_max().iter().any(|p| p.is_finite()) {
        map.capped(r.model.p_max().to_vec())?
    } else {
        map
    })
}

fn fixed_point(ctx: &Context) -> CliResult<Outcome> {
    let r = ctx.resolved()?;
    let gamma = ctx.gamma_target(&r)?;
    let map = interference_map(&r, &gamma)?;
    let n = r.model.num_links();
    let d = IterOptions::default();
    let opts = IterOptions {
        tol: ctx.tol().unwrap_or(d.tol),
        max_iter: ctx.max_iter().unwrap_or(d.max_iter),
        record_trajectory: true,
    };
    let p0 = PowerVector::zeros(n);
    let result = match ctx.staleness() {
        Some(stale) => {
            let schedule = AsyncSchedule::uniform(n, stale, ctx.update_probability(), ctx.seed());
            iterate_async(&map, &p0, &schedule, &opts)?
        }
        None => iterate_sync(&map, &p0, &opts)?,
    };
    let mut artifacts = Vec::new();
    if let Some(t) = &result.trajectory {
        let mut buf = Vec::new();
        t.write_csv(&mut buf)?;
        artifacts.push(Artifact {
            name: "trajectory.csv".into(),
            contents: buf,
        });
    }
    let mut results = to_value(&result)?;
    results.as_object_mut().expect("struct serializes to an object").remove("trajectory");
    results["map"] = json!(map.label());
    results["gamma_target"] = json!(gamma.as_slice());
    Ok(Outcome {
        status: Status::from_converged(result.converged),
        results,
        artifacts,
    })
}

#[derive(Serialize)]
struct HistoryRow {
    iter: usize,
    objective: f64,
}

fn history_csv(sol: &LogSolution) -> CliResult<Artifact> {
    let rows: Vec<HistoryRow> = sol
        .objective_history
        .iter()
        .enumerate()
        .map(|(iter, &objective)| HistoryRow { iter, objective })
        .collect();
    Ok(Artifact {
        name: "objective_history.csv".into(),
        contents: csv_bytes(&rows)?,
    })
}

fn run_solver(ctx: &Context, r: &ResolvedScenario) -> CliResult<LogSolution> {
    Ok(match ctx.algo() {
        Algo::G2off => solve_g2off(&r.model, &r.utilities, &ctx.g2off_config())?,
        Algo::G2too => solve_g2too(&r.model, &r.utilities, &ctx.g2too_config(r.model.num_links())?)?,
    })
}

fn solve(ctx: &Context) -> CliResult<Outcome> {
    let r = ctx.resolved()?;
    let sol = run_solver(ctx, &r)?;
    let mut results = to_value(&sol)?;
    results.as_object_mut().expect("struct serializes to an object").remove("objective_history");
    Ok(Outcome {
        status: Status::from_converged(sol.converged),
        results,
        artifacts: vec![history_csv(&sol)?],
    })
}

fn solve_multicarrier(ctx: &Context) -> CliResult<Outcome> {
    let r = ctx.resolved()?;
    let (mc, split) = r
        .multicarrier
        .as_ref()
        .ok_or_else(|| CliError::Input("solve-mc needs a carriers section in the scenario".into()))?;
    let sol = solve_mc(mc, split, &ctx.mc_config())?;
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        let mut header = vec!["link".to_string()];
        header.extend((0..mc.num_carriers()).map(|f| format!("p_{f}")));
        w.write_record(&header).map_err(|e| CliError::Internal(format!("csv: {e}")))?;
        for (i, row) in sol.powers.iter().enumerate() {
            let mut rec = vec![i.to_string()];
            rec.extend(row.iter().map(|p| p.to_string()));
            w.write_record(&rec).map_err(|e| CliError::Internal(format!("csv: {e}")))?;
        }
        w.flush().map_err(|e| CliError::Internal(format!("csv: {e}")))?;
    }
    Ok(Outcome {
        status: Status::from_converged(sol.converged),
        results: to_value(&sol)?,
        artifacts: vec![Artifact {
            name: "powers.csv".into(),
            contents: buf,
        }],
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct GammaRow {
    pub gamma: f64,
    pub rho: f64,
    pub feasible: bool,
    pub status: FeasibilityStatus,
    pub total_power: Option<f64>,
    pub objective: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BudgetRow {
    pub budget: f64,
    pub objective: Option<f64>,
    pub converged: Option<bool>,
    pub total_power: Option<f64>,
    pub error: Option<String>,
}

fn gamma_rows(r: &ResolvedScenario, range: Range) -> CliResult<Vec<GammaRow>> {
    let n = r.model.num_links();
    range
        .values()
        .par_iter()
        .map(|&gamma| {
            let v = check_feasibility(&r.model, &SinrVector::uniform(n, gamma)?)?;
            let objective = match (&v.p_star, v.is_feasible()) {
                (Some(p), true) => total_utility(&r.model, &PowerVector::new(p.clone())?, &r.utilities).ok(),
                _ => None,
            };
            Ok(GammaRow {
                gamma,
                rho: v.rho,
                feasible: v.is_feasible(),
                status: v.status,
                total_power: v.p_star.as_ref().map(|p| p.iter().sum()),
                objective,
            })
        })
        .collect()
}

fn budget_rows(ctx: &Context, range: Range) -> CliResult<Vec<BudgetRow>> {
    let base = ctx.scenario()?;
    if base.carriers.is_none() {
        return Err(CliError::Input("a --budget sweep needs a carriers section in the scenario".into()));
    }
    let config = ctx.mc_config();
    range
        .values()
        .par_iter()
        .map(|&budget| {
            let mut s = base.clone();
            s.carriers.as_mut().expect("checked above").budget = PerLink::Uniform(budget);
            let r = s.resolve()?;
            let (mc, split) = r.multicarrier.as_ref().expect("carriers present");
            Ok(match solve_mc(mc, split, &config) {
                Ok(sol) => BudgetRow {
                    budget,
                    objective: Some(sol.objective),
                    converged: Some(sol.converged),
                    total_power: Some(sol.powers.iter().flatten().sum()),
                    error: None,
                },
                Err(e) => BudgetRow {
                    budget,
                    objective: None,
                    converged: None,
                    total_power: None,
                    error: Some(e.to_string()),
                },
            })
        })
        .collect()
}

fn sweep(ctx: &Context, budget: Option<Range>) -> CliResult<Outcome> {
    let r = ctx.resolved()?;
    let (results, csv) = match (ctx.common.gamma, budget) {
        (Some(GammaArg::Range(range)), None) => {
            let rows = gamma_rows(&r, range)?;
            let threshold = rows.windows(2).find(|w| w[0].feasible && !w[1].feasible).map(|w| w[1].gamma);
            (
                json!({ "parameter": "gamma", "rows": rows, "first_infeasible": threshold }),
                csv_bytes(&rows)?,
            )
        }
        (None, Some(range)) => {
            let rows = budget_rows(ctx, range)?;
            (json!({ "parameter": "budget", "rows": rows }), csv_bytes(&rows)?)
        }
        _ => return Err(CliError::Input("sweep needs exactly one of --gamma LO:HI:STEP or --budget LO:HI:STEP".into())),
    };
    Ok(Outcome {
        status: Status::Ok,
        results,
        artifacts: vec![Artifact {
            name: "sweep.csv".into(),
            contents: csv,
        }],
    })
}

fn certify_if(ctx: &Context, pairs: usize) -> CliResult<Outcome> {
    let r = ctx.resolved()?;
    let gamma = ctx.gamma_target(&r)?;
    let sampler = CertifySampler {
        num_pairs: pairs,
        power_range: (1e-4, 1e4),
        seed: ctx.seed(),
    };
    let mut maps = vec![InterferenceMap::target_sinr(&r.model, &gamma)?];
    let caps: Vec<f64> = r.model.p_max().to_vec();
    if caps.iter().any(|p| p.is_finite()) {
        maps.push(maps[0].clone().capped(caps)?);
    }
    let mut entries = Vec::new();
    let mut all_pass = true;
    for map in &maps {
        let report = certify_standard(map, &sampler)?;
        all_pass &= report.all_pass();
        entries.push(json!({ "map": map.label(), "all_pass": report.all_pass(), "report": report }));
    }
    Ok(Outcome {
        status: Status::Ok,
        results: json!({ "sampler": sampler, "all_pass": all_pass, "maps": entries }),
        artifacts: Vec::new(),
    })
}

fn oracle(ctx: &Context, resolution: usize, refine_rounds: usize) -> CliResult<Outcome> {
    let r = ctx.resolved()?;
    let best = oracle_gridsearch(&r.model, &r.utilities, resolution, refine_rounds)?;
    let mut results = json!({ "resolution": resolution, "refine_rounds": refine_rounds, "oracle": best });
    match solve_g2off(&r.model, &r.utilities, &ctx.g2off_config()) {
        Ok(sol) => {
            results["solver"] = json!({
                "objective": sol.objective,
                "powers": sol.powers,
                "converged": sol.converged,
                "gap": sol.objective - best.objective,
            });
        }
        Err(e) => results["solver"] = json!({ "error": e.to_string() }),
    }
    Ok(Outcome {
        status: Status::Ok,
        results,
        artifacts: Vec::new(),
    })
}

fn plot(ctx: &Context) -> CliResult<Outcome> {
    if ctx.common.out.is_none() {
        return Err(CliError::Input("plot writes files and needs --out DIR".into()));
    }
    let r = ctx.resolved()?;
    let mut artifacts = Vec::new();
    let mut notes = serde_json::Map::new();
    match run_solver(ctx, &r) {
        Ok(sol) => {
            let mut a = history_csv(&sol)?;
            a.name = "convergence.csv".into();
            artifacts.push(a);
        }
        Err(e) => {
            notes.insert("convergence".into(), json!(e.to_string()));
        }
    }
    let point_target = match ctx.common.gamma {
        Some(GammaArg::Value(g)) => Some(SinrVector::uniform(r.model.num_links(), g)?),
        _ => r.gamma_target.clone(),
    };
    if let Some(gamma) = point_target {
        let map = interference_map(&r, &gamma)?;
        let opts = IterOptions {
            record_trajectory: true,
            ..IterOptions::default()
        };
        match iterate_sync(&map, &PowerVector::zeros(r.model.num_links()), &opts) {
            Ok(fp) => {
                let mut buf = Vec::new();
                fp.trajectory.as_ref().expect("trajectory requested").write_csv(&mut buf)?;
                artifacts.push(Artifact {
                    name: "fixed_point.csv".into(),
                    contents: buf,
                });
            }
            Err(e) => {
                notes.insert("fixed_point".into(), json!(e.to_string()));
            }
        }
    }
    if let Some(GammaArg::Range(range)) = ctx.common.gamma {
        artifacts.push(Artifact {
            name: "sweep.csv".into(),
            contents: csv_bytes(&gamma_rows(&r, range)?)?,
        });
    }
    artifacts.push(Artifact {
        name: "plot.py".into(),
        contents: PLOT_SCRIPT.as_bytes().to_vec(),
    });
    let files: Vec<&str> = artifacts.iter().map(|a| a.name.as_str()).collect();
    Ok(Outcome {
        status: Status::Ok,
        results: json!({ "files": files, "skipped": notes }),
        artifacts,
    })
}

fn generate_scenario(ctx: &Context, links: usize, area: f64, alpha: f64, min_distance: f64) -> CliResult<Outcome> {
    let spec = GeneratorSpec {
        num_links: links,
        area_size: area,
        path_loss_exponent: alpha,
        min_tx_rx_distance: min_distance,
        seed: ctx.seed(),
    };
    let scenario = generate(&spec)?;
    let text = scenario.to_json();
    Ok(Outcome {
        status: Status::Ok,
        results: json!({ "generator": spec, "scenario": to_value(&scenario)? }),
        artifacts: vec![Artifact {
            name: "scenario.json".into(),
            contents: text.into_bytes(),
        }],
    })
}

/// Digest recorded for commands without a scenario file.
pub fn argument_digest(command: &Command) -> Option<String> {
    match command {
        Command::Generate {
            links,
            area,
            alpha,
            min_distance,
        } => Some(canonical_digest(&json!({
            "links": links, "area": area, "alpha": alpha, "min_distance": min_distance
        }))),
        _ => None,
    }
}

pub fn write_artifacts(dir: &Path, artifacts: &[Artifact]) -> CliResult<()> {
    for a in artifacts {
        let path = dir.join(&a.name);
        std::fs::write(&path, &a.contents).map_err(|source| CliError::Write { path, source })?;
    }
    Ok(())
}
