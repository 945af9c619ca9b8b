//! Run configuration: one JSON document, parsed and validated before any
//! solver work starts.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use planar_dvm::diagnostics::DiagnosticsConfig;
use planar_dvm::fields::{BoundaryProfile, GridSpec};
use planar_dvm::io::{self, ModelFile, RuleEntry};
use planar_dvm::model::{generate_circle_model, generate_shifted_model};
use planar_dvm::solver::{Problem, SolverConfig};
use planar_dvm::{BoundaryData, ConvexDomain, DomainSpec, DvmError, Vec2, VelocityModel};
use serde::{Deserialize, Serialize};

/// Where the velocity model comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelSource {
    /// A model file, relative paths resolved against the config file.
    File { path: PathBuf },
    /// Inline model.
    Inline(ModelFile),
    /// Base model shifted by `c0·n0`.
    Shifted { velocities: Vec<[f64; 2]>, rules: Vec<RuleEntry>, c0: f64, n0: [f64; 2] },
    /// Circle quadruples with one rate each.
    Circle { quadruples: Vec<[[f64; 2]; 4]>, gammas: Vec<f64>, n0: [f64; 2] },
}

impl ModelSource {
    pub fn build(&self, base_dir: &Path) -> planar_dvm::Result<VelocityModel> {
        match self {
            ModelSource::File { path } => io::read_model(&base_dir.join(path)),
            ModelSource::Inline(m) => m.to_model(),
            ModelSource::Shifted { velocities, rules, c0, n0 } => {
                let base = ModelFile { velocities: velocities.clone(), rules: rules.clone(), positive_direction: None }
                    .to_model()?;
                generate_shifted_model(base.velocities(), base.rules(), *c0, vec2(*n0))
            }
            ModelSource::Circle { quadruples, gammas, n0 } => {
                let qs: Vec<[Vec2; 4]> = quadruples.iter().map(|q| q.map(vec2)).collect();
                generate_circle_model(&qs, gammas, vec2(*n0))
            }
        }
    }
}

pub fn vec2(a: [f64; 2]) -> Vec2 {
    Vec2::new(a[0], a[1])
}

fn default_domain() -> DomainSpec {
    DomainSpec::unit_disk()
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

fn default_threshold() -> f64 {
    1e-3
}

/// Complete description of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSource,
    #[serde(default = "default_domain")]
    pub domain: DomainSpec,
    pub boundary: BoundaryProfile,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    /// Largest accepted untruncated mild residual relative to the mass.
    #[serde(default = "default_threshold")]
    pub residual_threshold: f64,
}

impl RunConfig {
    pub fn example() -> Self {
        Self {
            model: ModelSource::Shifted {
                velocities: vec![[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]],
                rules: vec![RuleEntry { i: 1, j: 2, l: 3, m: 4, gamma: 1.0 }],
                c0: 8f64.sqrt(),
                n0: [1.0, 1.0],
            },
            domain: default_domain(),
            boundary: BoundaryProfile::Maxwellian { a: 0.0, b: [0.1, -0.2], c: 0.05 },
            solver: SolverConfig::default(),
            diagnostics: DiagnosticsConfig::default(),
            output: default_output(),
            residual_threshold: default_threshold(),
        }
    }
}

/// A parsed and validated run.
pub struct Run {
    pub config: RunConfig,
    pub config_hash: String,
    pub model: VelocityModel,
    pub model_hash: String,
    pub domain: ConvexDomain,
    pub boundary: BoundaryData,
    pub output: PathBuf,
}

impl Run {
    /// Reads, parses and validates; every failure here is an input error
    /// except physics violations of the model.
    pub fn load(path: &Path, output_override: Option<&Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut config: RunConfig =
            serde_json::from_str(&text).map_err(DvmError::from).with_context(|| format!("parsing {}", path.display()))?;
        let base_dir = path.parent().unwrap_or(Path::new("."));
        if let Some(o) = output_override {
            config.output = o.to_path_buf();
        }
        let output = if config.output.is_absolute() { config.output.clone() } else { base_dir.join(&config.output) };
        config.solver.validate()?;
        if config.residual_threshold.is_nan() || config.residual_threshold <= 0.0 {
            return Err(DvmError::Precondition("residual_threshold must be positive".into()).into());
        }
        let model = config.model.build(base_dir)?;
        let domain = config.domain.build()?;
        let boundary = match &config.boundary {
            BoundaryProfile::Csv { path } => BoundaryData::from_profile(
                &BoundaryProfile::Csv { path: base_dir.join(path).to_string_lossy().into_owned() },
                &domain,
                &model,
                config.solver.boundary_nodes,
            )?,
            p => BoundaryData::from_profile(p, &domain, &model, config.solver.boundary_nodes)?,
        };
        let model_hash = io::model_hash(&model)?;
        let config_hash = io::json_hash(&config)?;
        Ok(Self { config, config_hash, model, model_hash, domain, boundary, output })
    }

    pub fn grid_spec(&self) -> GridSpec {
        GridSpec { domain: self.domain.spec(), n: self.config.solver.grid_n }
    }

    pub fn problem(&self) -> Result<Problem> {
        Ok(Problem::new(&self.domain, self.model.clone(), self.config.solver.clone())?)
    }
}

/// Text appended to `--help`: the documented defaults.
pub fn defaults_help() -> String {
    let example = serde_json::to_string_pretty(&RunConfig::example()).expect("serializable");
    format!(
        "RUN CONFIG\n  A single JSON document. `model` and `boundary` are required; every other\n  \
         field falls back to the default shown below. Model sources: `file` (path),\n  \
         `inline` (velocities, rules), `shifted` (velocities, rules, c0, n0) and\n  \
         `circle` (quadruples, gammas, n0); rule indices are 1-based. Boundary\n  \
         profiles: `constant` (values), `maxwellian` (a, b, c), `step` (low, high,\n  \
         start, end) and `csv` (path to component,s,value rows).\n\n\
         EXAMPLE WITH ALL DEFAULTS\n{example}\n\n\
         EXIT CODES\n  0 ok, 1 physics violation, 2 input error, 3 non-convergence"
    )
}
