use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use planar_dvm::diagnostics::{diagnose, DiagnosticsReport};
use planar_dvm::fields::Grid;
use planar_dvm::io::{self, FieldMeta, ModelFile};
use planar_dvm::model::{certify, generate_shifted_model};
use planar_dvm::solver::{
    alpha_continuation, k_sweep, residual_mild, residual_renormalized, standard_test_functions, AlphaReport,
    AlphaStage, InnerPolicy, MildOperator, Problem,
};
use planar_dvm::{BoundaryData, DvmError, Field, VelocityModel};
use serde::{Deserialize, Serialize};

use crate::config::{vec2, ModelSource, Run};

pub const EXIT_OK: u8 = 0;
pub const EXIT_PHYSICS: u8 = 1;
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_CONVERGENCE: u8 = 3;

/// Exit code of an error: the first library error in the chain decides.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<DvmError>() {
            return match e {
                DvmError::Physics(_) => EXIT_PHYSICS,
                DvmError::Numerical(_) => EXIT_CONVERGENCE,
                _ => EXIT_INPUT,
            };
        }
    }
    EXIT_INPUT
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)?).with_context(|| format!("writing {}", path.display()))
}

fn write_output(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

pub fn model_check(path: &Path, json: bool) -> Result<u8> {
    let model = io::read_model(path).with_context(|| format!("reading model {}", path.display()))?;
    let cert = certify(&model);
    if json {
        println!("{}", serde_json::to_string_pretty(&cert)?);
    } else {
        println!("velocities: {}, stored rules: {}", model.p(), model.rules().len());
        println!("rules valid: {}", yes_no(cert.validation.is_valid()));
        for v in &cert.validation.violations {
            println!("  rule {}: {:?}", v.rule_index + 1, v.kind);
        }
        for r in &cert.validation.self_coupling {
            println!("  rule {} couples a velocity with itself", r + 1);
        }
        match cert.genericity.offending_pair {
            None => println!("generic: yes"),
            Some((a, b)) => println!("generic: no (velocities {} and {} are parallel)", a + 1, b + 1),
        }
        match cert.positive_direction {
            Some(n) => println!("n0: ({:.6}, {:.6})", n[0], n[1]),
            None => println!("n0: none"),
        }
        match &cert.normality {
            Some(n) => println!("normal: {}", yes_no(n.normal)),
            None => println!("normal: not checked"),
        }
        if cert.all_pass() {
            println!("normal, generic, n0 found");
        }
    }
    Ok(if cert.all_pass() { EXIT_OK } else { EXIT_PHYSICS })
}

fn classical_broadwell() -> ModelFile {
    ModelFile {
        velocities: vec![[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]],
        rules: vec![io::RuleEntry { i: 1, j: 2, l: 3, m: 4, gamma: 1.0 }],
        positive_direction: None,
    }
}

pub fn gen_shifted(base: Option<&Path>, c0: f64, n0: [f64; 2], out: Option<&Path>) -> Result<u8> {
    let base = match base {
        Some(p) => io::read_model(p).with_context(|| format!("reading base model {}", p.display()))?,
        None => classical_broadwell().to_model()?,
    };
    let model = generate_shifted_model(base.velocities(), base.rules(), c0, vec2(n0))?;
    write_output(&io::model_to_json(&model)?, out)?;
    Ok(EXIT_OK)
}

/// Input of `model gen-circle`.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CircleSpec {
    quadruples: Vec<[[f64; 2]; 4]>,
    gammas: Vec<f64>,
    n0: [f64; 2],
}

pub fn gen_circle(spec: &Path, out: Option<&Path>) -> Result<u8> {
    let text = fs::read_to_string(spec).with_context(|| format!("reading {}", spec.display()))?;
    let s: CircleSpec = serde_json::from_str(&text).map_err(DvmError::from)?;
    let model = ModelSource::Circle { quadruples: s.quadruples, gammas: s.gammas, n0: s.n0 }.build(Path::new("."))?;
    write_output(&io::model_to_json(&model)?, out)?;
    Ok(EXIT_OK)
}

/// Residuals of a field, each relative to its mass (absolute when the mass is 0).
#[derive(Debug, Serialize)]
pub struct Residuals {
    pub mass: f64,
    pub mild_untruncated: f64,
    pub mild_truncated: f64,
    /// Largest defect over the standard test functions and components.
    pub renormalized: f64,
}

fn residuals(grid: &Grid, model: &VelocityModel, boundary: &BoundaryData, field: &Field, k: f64, h_s: f64, nodes: usize) -> Residuals {
    let mass = field.mass();
    let scale = if mass > 0.0 { mass } else { 1.0 };
    let mild = |op| residual_mild(grid, model, boundary, field, op, h_s).iter().sum::<f64>() / scale;
    let renormalized = standard_test_functions()
        .iter()
        .flat_map(|t| residual_renormalized(grid, model, boundary, field, t, MildOperator::Untruncated, nodes))
        .fold(0.0, |a: f64, d| a.max(d.abs()))
        / scale;
    Residuals {
        mass,
        mild_untruncated: mild(MildOperator::Untruncated),
        mild_truncated: mild(MildOperator::Truncated(k)),
        renormalized,
    }
}

struct Emitter<'a> {
    run: &'a Run,
    dir: PathBuf,
}

impl<'a> Emitter<'a> {
    fn new(run: &'a Run) -> Result<Self> {
        let dir = run.output.clone();
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        write_json(&dir.join("config.json"), &run.config)?;
        io::write_model(&dir.join("model.json"), &run.model)?;
        Ok(Self { run, dir })
    }

    fn field(&self, name: &str, field: &Field, alpha: Option<f64>, k: f64) -> Result<PathBuf> {
        let path = self.dir.join(format!("{name}.csv"));
        let meta = FieldMeta {
            grid: field.grid().spec(),
            p: field.p(),
            model_hash: self.run.model_hash.clone(),
            config_hash: Some(self.run.config_hash.clone()),
            data_hash: String::new(),
            mass: 0.0,
            alpha,
            k: Some(k),
            label: name.to_string(),
        };
        io::write_field(&path, field, meta)?;
        Ok(path)
    }

    fn diagnostics(&self, name: &str, report: &DiagnosticsReport) -> Result<()> {
        write_json(&self.dir.join(format!("{name}.diagnostics.json")), &Stamped::new(self.run, report))?;
        fs::write(self.dir.join(format!("{name}.moduli.csv")), report.moduli.to_csv())?;
        Ok(())
    }

    fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        write_json(&self.dir.join(format!("{name}.json")), &Stamped::new(self.run, value))
    }
}

/// Report wrapped with the provenance hashes.
#[derive(Serialize)]
struct Stamped<'a, T: Serialize> {
    model_hash: &'a str,
    config_hash: &'a str,
    #[serde(flatten)]
    body: &'a T,
}

impl<'a, T: Serialize> Stamped<'a, T> {
    fn new(run: &'a Run, body: &'a T) -> Self {
        Self { model_hash: &run.model_hash, config_hash: &run.config_hash, body }
    }
}

#[derive(Serialize)]
struct LevelSummary {
    k: f64,
    converged: bool,
    final_alpha: f64,
    field: String,
    raw_field: String,
    residuals: Residuals,
}

#[derive(Serialize)]
struct Summary {
    mode: &'static str,
    all_converged: bool,
    levels: Vec<LevelSummary>,
    k_distances: Vec<f64>,
    residual_threshold: f64,
    residual_within_threshold: bool,
}

fn tag(x: f64) -> String {
    format!("{x}").replace('.', "p")
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Writes the artifacts of one truncation level and returns its summary.
fn emit_level(e: &Emitter, problem: &Problem, bk: &BoundaryData, report: &AlphaReport) -> Result<LevelSummary> {
    let run = e.run;
    let k = report.k;
    let last = report.stages.last().expect("at least one stage");
    let name = format!("field_k{}", tag(k));
    let field_path = e.field(&name, report.best_estimate(), Some(0.0), k)?;
    let raw_path = e.field(&format!("{name}_raw"), &last.field, Some(last.alpha), k)?;
    e.json(&format!("stages_k{}", tag(k)), report)?;
    let diag = diagnose(problem.grid(), &run.model, report.best_estimate(), bk, 0.0, k, None, &run.config.diagnostics)?;
    e.diagnostics(&name, &diag)?;
    let res = residuals(
        problem.grid(),
        &run.model,
        bk,
        report.best_estimate(),
        k,
        problem.h_s(),
        run.config.diagnostics.boundary_nodes,
    );
    log::info!(
        "k = {k}: mass {:.6e}, mild residual {:.3e} (untruncated) {:.3e} (truncated), converged {}",
        res.mass,
        res.mild_untruncated,
        res.mild_truncated,
        report.all_converged()
    );
    Ok(LevelSummary {
        k,
        converged: report.all_converged(),
        final_alpha: last.alpha,
        field: file_name(&field_path),
        raw_field: file_name(&raw_path),
        residuals: res,
    })
}

fn finish(e: &Emitter, mode: &'static str, levels: Vec<LevelSummary>, k_distances: Vec<f64>) -> Result<u8> {
    let threshold = e.run.config.residual_threshold;
    let all_converged = levels.iter().all(|l| l.converged);
    let within = levels.last().is_some_and(|l| l.residuals.mild_untruncated <= threshold);
    let summary = Summary { mode, all_converged, levels, k_distances, residual_threshold: threshold, residual_within_threshold: within };
    e.json("summary", &summary)?;
    for l in &summary.levels {
        println!(
            "k = {:>8}: converged {}, mass {:.6e}, mild residual {:.3e} untruncated, {:.3e} truncated, renormalized {:.3e}",
            l.k,
            yes_no(l.converged),
            l.residuals.mass,
            l.residuals.mild_untruncated,
            l.residuals.mild_truncated,
            l.residuals.renormalized
        );
    }
    println!("artifacts in {}", e.dir.display());
    if !all_converged {
        eprintln!("some continuation stage did not converge");
        return Ok(EXIT_CONVERGENCE);
    }
    Ok(EXIT_OK)
}

pub fn solve(config: &Path, output: Option<&Path>, single: bool) -> Result<u8> {
    let run = Run::load(config, output)?;
    let problem = run.problem()?;
    let e = Emitter::new(&run)?;
    if single {
        return solve_single(&e, &problem);
    }
    let sweep = k_sweep(&problem, &run.boundary)?;
    let mut levels = Vec::with_capacity(sweep.stages.len());
    for stage in &sweep.stages {
        let bk = problem.boundary_at(&run.boundary, stage.k)?;
        levels.push(emit_level(&e, &problem, &bk, &stage.report)?);
    }
    e.json("k_sweep", &sweep)?;
    finish(&e, "k-sweep", levels, sweep.k_distances.clone())
}

fn solve_single(e: &Emitter, problem: &Problem) -> Result<u8> {
    let run = e.run;
    let cfg = &run.config.solver;
    let (alpha, k) = (cfg.alpha, cfg.k);
    let bk = problem.boundary_at(&run.boundary, k)?;
    let policy = if cfg.warm_start { InnerPolicy::FromPrevious } else { InnerPolicy::Cold };
    let outcome = problem.solve(&bk, alpha, k, None, policy)?;
    e.json("trace", &outcome.trace)?;
    let stage = AlphaStage::from_outcome(alpha, outcome);
    let name = format!("field_a{}_k{}", tag(alpha), tag(k));
    let path = e.field(&name, &stage.field, Some(alpha), k)?;
    e.json("stage", &stage)?;
    let diag =
        diagnose(problem.grid(), &run.model, &stage.field, &bk, alpha, k, Some(&stage.tallies), &run.config.diagnostics)?;
    e.diagnostics(&name, &diag)?;
    let res = residuals(problem.grid(), &run.model, &bk, &stage.field, k, problem.h_s(), run.config.diagnostics.boundary_nodes);
    let level =
        LevelSummary { k, converged: stage.converged, final_alpha: alpha, field: file_name(&path), raw_field: file_name(&path), residuals: res };
    finish(e, "single", vec![level], vec![])
}

/// Damping continuation at the configured `k` only.
pub fn sweep(config: &Path, output: Option<&Path>) -> Result<u8> {
    let run = Run::load(config, output)?;
    let problem = run.problem()?;
    let e = Emitter::new(&run)?;
    let k = run.config.solver.k;
    let bk = problem.boundary_at(&run.boundary, k)?;
    let report = alpha_continuation(&problem, &bk, k, None)?;
    for s in &report.stages {
        e.field(&format!("field_k{}_a{}", tag(k), tag(s.alpha)), &s.field, Some(s.alpha), k)?;
    }
    let level = emit_level(&e, &problem, &bk, &report)?;
    finish(&e, "alpha-sweep", vec![level], vec![])
}

pub fn diagnose_field(config: &Path, field: &Path, output: Option<&Path>) -> Result<u8> {
    let run = Run::load(config, None)?;
    let (f, meta) = io::read_field(field).with_context(|| format!("reading field {}", field.display()))?;
    if meta.model_hash != run.model_hash {
        return Err(DvmError::Precondition(format!(
            "field model hash {} does not match the configured model {}",
            meta.model_hash, run.model_hash
        ))
        .into());
    }
    if meta.grid != run.grid_spec() {
        return Err(DvmError::Precondition("field grid does not match the configured domain and grid_n".into()).into());
    }
    let k = meta.k.unwrap_or(run.config.solver.k);
    let alpha = meta.alpha.unwrap_or(0.0);
    let bk = if k.is_finite() {
        run.boundary.truncate_and_mollify(k, run.config.solver.boundary_support_fraction)?
    } else {
        run.boundary.clone()
    };
    let report = diagnose(f.grid(), &run.model, &f, &bk, alpha, k, None, &run.config.diagnostics)?;
    let dir = output.map(Path::to_path_buf).unwrap_or_else(|| run.output.clone());
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let stem = field.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "field".into());
    let e = Emitter { run: &run, dir };
    e.diagnostics(&stem, &report)?;
    println!("{}", report.to_table());
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;
    use planar_dvm::Vec2;

    #[test]
    fn exit_codes_follow_the_error_kind() {
        let physics = anyhow::Error::from(DvmError::Physics("x".into()));
        assert_eq!(exit_code(&physics), EXIT_PHYSICS);
        let parse = anyhow::Error::from(DvmError::Parse("x".into())).context("reading");
        assert_eq!(exit_code(&parse), EXIT_INPUT);
        assert_eq!(exit_code(&anyhow::anyhow!("other")), EXIT_INPUT);
    }

    #[test]
    fn classical_base_shifts_to_the_known_model() {
        let base = classical_broadwell().to_model().unwrap();
        let m = generate_shifted_model(base.velocities(), base.rules(), 8f64.sqrt(), Vec2::new(1.0, 1.0)).unwrap();
        assert_eq!(m.velocity(0), Vec2::new(3.0, 2.0));
    }

    #[test]
    fn tags_are_file_safe() {
        assert_eq!(tag(0.015625), "0p015625");
        assert_eq!(tag(256.0), "256");
    }
}
