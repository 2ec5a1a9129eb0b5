use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::schema::{quantile_sorted, DatasetSchema, Strata};
use crate::error::{Error, Result};
use crate::estimators::{EstimatorContext, EstimatorKind, FitOptions};
use crate::model::{
    CovariateLayout, Dataset, Family, ModelSpec, OutcomeModel, SelectionModel, SelectionTerm, WorkingModel, XCells,
};
use crate::numerics::{Interval, Support};
use crate::sim::ScenarioConfig;

/// Top-level configuration file. `mode` selects the command; the remaining
/// fields belong to that command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(flatten)]
    pub command: CommandConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum CommandConfig {
    Fit(FitConfig),
    Simulate(SimulateConfig),
    Subsample(SubsampleConfig),
}

impl CommandConfig {
    pub fn mode(&self) -> &'static str {
        match self {
            CommandConfig::Fit(_) => "fit",
            CommandConfig::Simulate(_) => "simulate",
            CommandConfig::Subsample(_) => "subsample",
        }
    }
}

/// Cells of one phase-1 covariate, by cut points or by empirical quantiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellsConfig {
    pub column: String,
    #[serde(default)]
    pub cuts: Option<Vec<f64>>,
    #[serde(default)]
    pub quantiles: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum SelectionConfig {
    /// One probability per outcome stratum of the schema (per stratum and
    /// covariate cell with `x_cells`).
    Stratified {
        #[serde(default)]
        x_cells: Option<CellsConfig>,
    },
    /// Logistic in `terms`: `"intercept"`, `"y"` or `"x:<column>"`; `x_cells`
    /// adds indicators of every cell but the first.
    Logistic {
        terms: Vec<String>,
        #[serde(default)]
        x_cells: Option<CellsConfig>,
    },
}

fn default_level() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    /// Input CSV; relative paths are taken from the config file's directory.
    pub data: PathBuf,
    pub schema: DatasetSchema,
    pub family: Family,
    /// Phase-1 columns in the outcome model; all by default.
    #[serde(default)]
    pub outcome_x: Option<Vec<String>>,
    /// Phase-2 columns in the outcome model; all by default.
    #[serde(default)]
    pub outcome_z: Option<Vec<String>>,
    /// Phase-1 columns in the working model; all by default.
    #[serde(default)]
    pub working_x: Option<Vec<String>>,
    pub selection: SelectionConfig,
    #[serde(default)]
    pub post_stratification: Option<SelectionConfig>,
    #[serde(default)]
    pub alpha_known: Option<Vec<f64>>,
    #[serde(default)]
    pub theta_star: Option<Vec<f64>>,
    pub estimators: Vec<EstimatorKind>,
    #[serde(default)]
    pub fit_options: FitOptions,
    /// Significance level of the reported intervals.
    #[serde(default = "default_level")]
    pub level: f64,
}

/// A named preset or a full scenario, with optional overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateConfig {
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub scenario: Option<ScenarioConfig>,
    #[serde(default)]
    pub replications: Option<usize>,
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub estimators: Option<Vec<EstimatorKind>>,
}

fn default_quantiles() -> [f64; 2] {
    [0.25, 0.75]
}

fn default_alpha() -> [f64; 2] {
    [0.4, 0.4]
}

fn default_subsample_output() -> String {
    "phase2.csv".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsampleConfig {
    pub data: PathBuf,
    /// Columns of the complete input; `r_column` names the indicator written out.
    pub schema: DatasetSchema,
    #[serde(default = "default_quantiles")]
    pub quantiles: [f64; 2],
    #[serde(default = "default_alpha")]
    pub alpha: [f64; 2],
    #[serde(default = "default_subsample_output")]
    pub output: String,
}

/// Default seed when neither the config nor the command line sets one.
pub const DEFAULT_SEED: u64 = 20240601;

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid config: {e}")))
    }

    /// Read a config file, filling `mode` from `mode` when the file omits it,
    /// and resolve relative data paths against the file's directory.
    pub fn load(path: &Path, mode: Option<&str>) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let obj = value
            .as_object_mut()
            .ok_or_else(|| Error::Config(format!("{}: the config must be a JSON object", path.display())))?;
        match (obj.get("mode").and_then(|m| m.as_str()), mode) {
            (Some(found), Some(want)) if found != want => {
                return Err(Error::Config(format!("config mode {found:?} does not match the {want:?} command")))
            }
            (None, Some(want)) => {
                obj.insert("mode".into(), want.into());
            }
            _ => {}
        }
        let mut cfg: RunConfig =
            serde_json::from_value(value).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        match &mut cfg.command {
            CommandConfig::Fit(f) if f.data.is_relative() => f.data = base.join(&f.data),
            CommandConfig::Subsample(s) if s.data.is_relative() => s.data = base.join(&s.data),
            _ => {}
        }
        Ok(cfg)
    }

    /// A copy with the effective seed filled in, as echoed into outputs.
    pub fn resolved(&self) -> RunConfig {
        RunConfig { seed: Some(self.seed()), ..self.clone() }
    }

    pub fn seed(&self) -> u64 {
        match (&self.seed, &self.command) {
            (Some(s), _) => *s,
            (None, CommandConfig::Simulate(s)) => s.scenario.as_ref().map_or(DEFAULT_SEED, |sc| sc.master_seed),
            (None, _) => DEFAULT_SEED,
        }
    }
}

impl SimulateConfig {
    pub fn preset(name: &str) -> Self {
        SimulateConfig { preset: Some(name.into()), scenario: None, replications: None, n: None, estimators: None }
    }

    /// The scenario after overrides; `seed` replaces the master seed.
    pub fn resolve(&self, seed: Option<u64>) -> Result<ScenarioConfig> {
        let mut sc = match (&self.preset, &self.scenario) {
            (Some(p), None) => ScenarioConfig::preset(p)?,
            (None, Some(s)) => s.clone(),
            (Some(_), Some(_)) => return Err(Error::Config("give either a preset or a scenario, not both".into())),
            (None, None) => return Err(Error::Config("simulate needs a preset or a scenario".into())),
        };
        if let Some(r) = self.replications {
            sc.replications = r;
        }
        if let Some(n) = self.n {
            sc.n = n;
        }
        if let Some(e) = &self.estimators {
            sc.estimators = e.clone();
        }
        if let Some(s) = seed {
            sc.master_seed = s;
        }
        sc.validate()?;
        Ok(sc)
    }
}

fn column_of(names: &[String], name: &str, what: &str) -> Result<usize> {
    names
        .iter()
        .position(|n| n == name)
        .ok_or_else(|| Error::Config(format!("{what} column {name:?} is not among {names:?}")))
}

fn columns_of(names: &[String], chosen: &Option<Vec<String>>, what: &str) -> Result<Vec<usize>> {
    match chosen {
        Some(c) => c.iter().map(|n| column_of(names, n, what)).collect(),
        None => Ok((0..names.len()).collect()),
    }
}

impl CellsConfig {
    fn resolve(&self, data: &Dataset) -> Result<XCells> {
        let col = column_of(&data.x_names, &self.column, "cell")?;
        let cuts = match (&self.cuts, &self.quantiles) {
            (Some(c), None) => c.clone(),
            (None, Some(q)) => {
                let mut v: Vec<f64> = data.records.iter().map(|r| r.x[col]).collect();
                v.sort_by(f64::total_cmp);
                q.iter().map(|&p| quantile_sorted(&v, p)).collect()
            }
            _ => {
                return Err(Error::Config(format!("cells of {:?} need exactly one of cuts or quantiles", self.column)))
            }
        };
        if cuts.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Config(format!("cell cut points for {:?} must increase", self.column)));
        }
        XCells::from_cuts(col, &cuts).map_err(|e| Error::Config(e.to_string()))
    }
}

impl SelectionConfig {
    /// Selection model on the analysis scale. `cuts` are the resolved outcome
    /// strata of the schema.
    pub fn resolve(&self, data: &Dataset, cuts: Option<[f64; 2]>) -> Result<SelectionModel> {
        let y_strata = match cuts {
            Some(c) => Strata::tails(c),
            None => vec![Interval::real_line()],
        };
        match self {
            SelectionConfig::Stratified { x_cells } => {
                let cells = x_cells.as_ref().map(|c| c.resolve(data)).transpose()?;
                SelectionModel::stratified(y_strata, cells).map_err(|e| Error::Config(e.to_string()))
            }
            SelectionConfig::Logistic { terms, x_cells } => {
                let mut out = Vec::new();
                for t in terms {
                    out.push(match t.as_str() {
                        "intercept" => SelectionTerm::Intercept,
                        "y" => SelectionTerm::Y,
                        other => match other.strip_prefix("x:") {
                            Some(name) => SelectionTerm::X { col: column_of(&data.x_names, name, "selection")? },
                            None => {
                                return Err(Error::Config(format!(
                                    "unknown selection term {other:?}; use intercept, y or x:<column>"
                                )))
                            }
                        },
                    });
                }
                if let Some(c) = x_cells {
                    let cells = c.resolve(data)?;
                    out.extend(
                        cells.cells[1..].iter().map(|cell| SelectionTerm::XIndicator { col: cells.col, cell: *cell }),
                    );
                }
                let support = Support::new(y_strata).map_err(|e| Error::Config(e.to_string()))?;
                Ok(SelectionModel::logistic_on(out, support))
            }
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        self.schema.validate()?;
        if self.estimators.is_empty() {
            return Err(Error::Config("the estimator list is empty".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::Config(format!("level {} must lie in (0, 1)", self.level)));
        }
        for k in &self.estimators {
            if k.needs_known_alpha() && self.alpha_known.is_none() {
                return Err(Error::Config(format!("{k} needs alpha_known")));
            }
            if k.needs_theta_star() && self.theta_star.is_none() {
                return Err(Error::Config(format!("{k} needs theta_star")));
            }
            if k.needs_post_stratification() && self.post_stratification.is_none() {
                return Err(Error::Config(format!("{k} needs a post_stratification model")));
            }
        }
        Ok(())
    }

    /// Model specification and estimator inputs for the transformed data.
    pub fn model(&self, data: &Dataset, cuts: Option<[f64; 2]>) -> Result<(ModelSpec, EstimatorContext)> {
        let layout = CovariateLayout {
            x_cols: columns_of(&data.x_names, &self.outcome_x, "outcome")?,
            z_cols: columns_of(&data.z_names, &self.outcome_z, "outcome")?,
        };
        let working = WorkingModel::new(self.family, columns_of(&data.x_names, &self.working_x, "working")?);
        let selection = self.selection.resolve(data, cuts)?;
        if let Some(a) = &self.alpha_known {
            if a.len() != selection.dim() {
                return Err(Error::Config(format!("alpha_known has length {}, expected {}", a.len(), selection.dim())));
            }
        }
        if let Some(t) = &self.theta_star {
            if t.len() != working.dim() {
                return Err(Error::Config(format!("theta_star has length {}, expected {}", t.len(), working.dim())));
            }
        }
        let ps = self.post_stratification.as_ref().map(|p| p.resolve(data, cuts)).transpose()?;
        let spec = ModelSpec::new(OutcomeModel::new(self.family, layout), working, selection);
        let ctx = EstimatorContext {
            alpha_known: self.alpha_known.clone(),
            theta_star: self.theta_star.clone(),
            post_stratification: ps,
        };
        Ok((spec, ctx))
    }
}
