//! Discovery orchestration: run (algorithm × criterion) cells on a
//! dataset, write reports and plot data, and sweep benchmark scenarios.
//!
//! All tabular artifacts are CSV and all reports JSON, so runs diff
//! cleanly; identical configurations (including seeds) produce identical
//! outputs apart from wall-time fields.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assembly::{assemble, Dataset, RegressionSystem};
use crate::data::{self, apply_noise, generate_synthetic, load_csv, GroundTruth, NoiseSpec};
use crate::error::{Error, Result};
use crate::kinematics::{LoadingMode, ModeKind, StructuralFrame};
use crate::library::{
    make_isotropic_library, make_orthotropic_library, make_orthotropic_library_reduced, BasisTerm,
    ModelLibrary, TermFamily,
};
use crate::refine::{
    evaluate_metrics, refit_linear, refit_nonlinear, DiscoveredModel, ModelMetrics, Provenance,
    DEFAULT_LAMBDA_R, HARD_THRESHOLD, W_BOUNDS,
};
use crate::selection::{kfold_cv, select, Criterion, CvCurve, PathSpec};
use crate::solvers::{Algorithm, SolutionPath};

/// Library construction options for a run.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum LibrarySpec {
    /// Mooney-Rivlin polynomial plus Ogden exponents.
    Isotropic {
        /// Maximum Mooney-Rivlin order.
        mr_order: u32,
        /// Ogden exponents.
        #[serde(default)]
        ogden_alphas: Vec<f64>,
    },
    /// Ogden terms only.
    Ogden {
        /// Ogden exponents.
        alphas: Vec<f64>,
    },
    /// The orthotropic invariant library (canonical frame).
    Orthotropic {
        /// Linearization value of the exponential inner coefficients.
        w_bar: f64,
        /// Use the 20-term reduced family (first-power I4/I8 terms
        /// removed).
        #[serde(default)]
        reduced: bool,
    },
}

impl LibrarySpec {
    /// Build the library.
    pub fn build(&self) -> Result<ModelLibrary> {
        match self {
            LibrarySpec::Isotropic {
                mr_order,
                ogden_alphas,
            } => make_isotropic_library(*mr_order, ogden_alphas),
            LibrarySpec::Ogden { alphas } => {
                if alphas.is_empty() {
                    return Err(Error::Config("ogden library needs exponents".into()));
                }
                for &a in alphas {
                    if a == 0.0 || !a.is_finite() {
                        return Err(Error::Config(format!("invalid Ogden exponent {a}")));
                    }
                }
                Ok(ModelLibrary {
                    terms: alphas
                        .iter()
                        .map(|&alpha| BasisTerm {
                            family: TermFamily::Ogden { alpha },
                        })
                        .collect(),
                    w_bar: vec![None; alphas.len()],
                    frame: None,
                })
            }
            LibrarySpec::Orthotropic { w_bar, reduced } => {
                let frame = StructuralFrame::canonical();
                if *reduced {
                    make_orthotropic_library_reduced(frame, *w_bar)
                } else {
                    make_orthotropic_library(frame, *w_bar)
                }
            }
        }
    }
}

/// Synthetic generation options.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticSpec {
    /// Named ground truth (`O2`, `MR2`, `MR1O1`, `MR2O2`).
    #[serde(default)]
    pub truth: Option<String>,
    /// Ground-truth JSON file (alternative to `truth`).
    #[serde(default)]
    pub truth_file: Option<PathBuf>,
    /// Deformation modes (labels); defaults to UT, PS, EBT.
    #[serde(default)]
    pub modes: Option<Vec<String>>,
    /// Samples per mode.
    #[serde(default = "default_n_per_mode")]
    pub n_per_mode: usize,
    /// Parameter range.
    #[serde(default = "default_range")]
    pub range: (f64, f64),
    /// Relative noise level (0 disables noise).
    #[serde(default)]
    pub noise: f64,
}

fn default_n_per_mode() -> usize {
    60
}

fn default_range() -> (f64, f64) {
    (0.6, 5.0)
}

impl SyntheticSpec {
    /// Resolve the ground truth.
    pub fn ground_truth(&self) -> Result<GroundTruth> {
        match (&self.truth, &self.truth_file) {
            (Some(name), None) => data::truths::by_name(name)
                .ok_or_else(|| Error::Config(format!("unknown ground truth '{name}'"))),
            (None, Some(path)) => {
                let text = std::fs::read_to_string(path)?;
                Ok(serde_json::from_str(&text)?)
            }
            _ => Err(Error::Config(
                "synthetic dataset needs exactly one of 'truth' or 'truth_file'".into(),
            )),
        }
    }

    /// Resolve the loading modes.
    pub fn loading_modes(&self) -> Result<Vec<LoadingMode>> {
        match &self.modes {
            None => Ok(data::benchmark_modes()),
            Some(labels) => labels
                .iter()
                .map(|l| {
                    ModeKind::parse(l)
                        .map(LoadingMode::standard)
                        .ok_or_else(|| Error::Config(format!("unknown mode label '{l}'")))
                })
                .collect(),
        }
    }
}

/// Where the run's dataset comes from.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetSource {
    /// Load a CSV dataset; optional proportional noise is added on top
    /// (the unnoised file then serves as the reference).
    Csv {
        /// Dataset path.
        path: PathBuf,
        /// Relative noise to inject (0 disables).
        #[serde(default)]
        noise: f64,
    },
    /// Generate synthetic data from a ground truth.
    Synthetic(SyntheticSpec),
}

/// Full configuration of a discovery run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    /// Dataset source.
    pub dataset: DatasetSource,
    /// Evaluate final metrics against this dataset instead of the fit
    /// data (defaults to the clean data when the source injects noise).
    #[serde(default)]
    pub reference_csv: Option<PathBuf>,
    /// Library specification.
    pub library: LibrarySpec,
    /// Algorithms to run (default: all three).
    #[serde(default = "default_algorithms")]
    pub algorithms: Vec<Algorithm>,
    /// Criteria to run (default: all three).
    #[serde(default = "default_criteria")]
    pub criteria: Vec<Criterion>,
    /// Cross-validation fold count.
    #[serde(default = "default_k_folds")]
    pub k_folds: usize,
    /// Seed for noise and fold shuffling; mandatory when either is used.
    #[serde(default)]
    pub seed: Option<u64>,
    /// Penalty grid override for the penalized solver.
    #[serde(default)]
    pub lambda: Option<LambdaSpec>,
    /// Step budget for the stepwise solvers (default
    /// `min(n_φ, n_obs - 1)`).
    #[serde(default)]
    pub max_steps: Option<usize>,
    /// Ridge weight of the refinement stage.
    #[serde(default = "default_lambda_r")]
    pub lambda_r: f64,
    /// Bounds for the exponential inner coefficients.
    #[serde(default = "default_w_bounds")]
    pub w_bounds: (f64, f64),
    /// Hard-threshold cutoff on refined coefficients.
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    /// Restrict the run to these (algorithm, criterion) cells.
    #[serde(default)]
    pub cells: Option<Vec<(Algorithm, Criterion)>>,
    /// Output directory (no files are written when `None`).
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

impl RunConfig {
    /// A config with defaults for everything but the dataset and library.
    pub fn new(dataset: DatasetSource, library: LibrarySpec) -> Self {
        Self {
            dataset,
            reference_csv: None,
            library,
            algorithms: default_algorithms(),
            criteria: default_criteria(),
            k_folds: default_k_folds(),
            seed: None,
            lambda: None,
            max_steps: None,
            lambda_r: default_lambda_r(),
            w_bounds: default_w_bounds(),
            threshold: default_threshold(),
            cells: None,
            out_dir: None,
        }
    }
}

/// Explicit or automatic penalty grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LambdaSpec {
    /// Explicit strictly decreasing penalties.
    Values(Vec<f64>),
    /// Log-spaced grid parameters.
    Auto {
        /// Grid size.
        n: usize,
        /// `λ_min / λ_max`.
        min_ratio: f64,
    },
}

fn default_algorithms() -> Vec<Algorithm> {
    vec![Algorithm::Lasso, Algorithm::Lars, Algorithm::Omp]
}

fn default_criteria() -> Vec<Criterion> {
    vec![Criterion::Aic, Criterion::Bic, Criterion::Cv]
}

fn default_k_folds() -> usize {
    5
}

fn default_lambda_r() -> f64 {
    DEFAULT_LAMBDA_R
}

fn default_w_bounds() -> (f64, f64) {
    W_BOUNDS
}

fn default_threshold() -> f64 {
    HARD_THRESHOLD
}

/// Selection summary stored in a cell report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectionSummary {
    /// Index of the chosen path point.
    pub chosen_index: usize,
    /// Knob value at the chosen point.
    pub knob: f64,
    /// Number of path points.
    pub n_path_points: usize,
    /// Strictly positive coefficients at the chosen point.
    pub n_active_at_selection: usize,
}

/// Result of one (algorithm × criterion) cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellReport {
    /// Algorithm label.
    pub algorithm: String,
    /// Criterion label.
    pub criterion: String,
    /// Library the model's term indices refer to.
    pub library: LibrarySpec,
    /// The refined model (metrics against the fit dataset).
    pub model: DiscoveredModel,
    /// Metrics against the reference dataset, when one was configured.
    pub reference_metrics: Option<ModelMetrics>,
    /// Selection summary.
    pub selection: SelectionSummary,
    /// Solver path truncation reason, if any.
    pub path_truncation: Option<String>,
    /// Non-fatal solver diagnostic recorded on the selected path point
    /// (e.g. a sweep-budget warning at the smallest penalty).
    pub point_warning: Option<String>,
}

/// Outcome of one cell: a report or an error message.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellOutcome {
    /// Algorithm label.
    pub algorithm: String,
    /// Criterion label.
    pub criterion: String,
    /// The report, when the cell succeeded.
    pub report: Option<CellReport>,
    /// The error, when it failed.
    pub error: Option<String>,
}

/// All outcomes of a discovery run.
#[derive(Debug, Clone)]
pub struct DiscoveryRun {
    /// One outcome per requested cell, in (algorithm, criterion) order.
    pub cells: Vec<CellOutcome>,
    /// The dataset the models were fitted to.
    pub dataset: Dataset,
    /// The reference dataset, when configured.
    pub reference: Option<Dataset>,
}

impl DiscoveryRun {
    /// Whether any requested cell failed.
    pub fn any_failed(&self) -> bool {
        self.cells.iter().any(|c| c.error.is_some())
    }

    /// Look up a successful cell report.
    pub fn report(&self, algorithm: Algorithm, criterion: Criterion) -> Option<&CellReport> {
        self.cells
            .iter()
            .find(|c| c.algorithm == algorithm.label() && c.criterion == criterion.label())
            .and_then(|c| c.report.as_ref())
    }
}

/// Resolve the fit dataset and the reference dataset of a config.
pub fn resolve_datasets(config: &RunConfig) -> Result<(Dataset, Option<Dataset>)> {
    let (fit, auto_reference) = match &config.dataset {
        DatasetSource::Csv { path, noise } => {
            if !path.exists() {
                return Err(Error::Config(format!(
                    "dataset file {} does not exist",
                    path.display()
                )));
            }
            let clean = load_csv(path)?;
            if *noise > 0.0 {
                let seed = config.seed.ok_or_else(|| {
                    Error::Config("seed is mandatory when noise is injected".into())
                })?;
                let spec = NoiseSpec {
                    relative_std: *noise,
                    seed,
                };
                (apply_noise(&clean, &spec), Some(clean))
            } else {
                (clean, None)
            }
        }
        DatasetSource::Synthetic(spec) => {
            let truth = spec.ground_truth()?;
            let modes = spec.loading_modes()?;
            let clean = generate_synthetic(
                &truth,
                &modes,
                spec.n_per_mode,
                spec.range,
                &NoiseSpec::none(),
            )?;
            if spec.noise > 0.0 {
                let seed = config.seed.ok_or_else(|| {
                    Error::Config("seed is mandatory when noise is injected".into())
                })?;
                let noisy = generate_synthetic(
                    &truth,
                    &modes,
                    spec.n_per_mode,
                    spec.range,
                    &NoiseSpec {
                        relative_std: spec.noise,
                        seed,
                    },
                )?;
                (noisy, Some(clean))
            } else {
                (clean, None)
            }
        }
    };
    let reference = match &config.reference_csv {
        Some(path) => {
            if !path.exists() {
                return Err(Error::Config(format!(
                    "reference file {} does not exist",
                    path.display()
                )));
            }
            Some(load_csv(path)?)
        }
        None => auto_reference,
    };
    Ok((fit, reference))
}

fn cell_requested(config: &RunConfig, alg: Algorithm, crit: Criterion) -> bool {
    match &config.cells {
        Some(cells) => cells.iter().any(|&(a, c)| a == alg && c == crit),
        None => true,
    }
}

fn validate(config: &RunConfig) -> Result<()> {
    if config.algorithms.is_empty() || config.criteria.is_empty() {
        return Err(Error::Config("no cells requested".into()));
    }
    let cv_requested = config.criteria.contains(&Criterion::Cv)
        && config
            .algorithms
            .iter()
            .any(|&a| cell_requested(config, a, Criterion::Cv));
    if cv_requested && config.seed.is_none() {
        return Err(Error::Config(
            "seed is mandatory when cross-validation is used".into(),
        ));
    }
    if config.k_folds < 2 {
        return Err(Error::Config("k_folds must be at least 2".into()));
    }
    if let Some(LambdaSpec::Values(v)) = &config.lambda {
        if v.is_empty() {
            return Err(Error::Config("empty penalty grid".into()));
        }
    }
    Ok(())
}

fn path_spec_for(algorithm: Algorithm, config: &RunConfig, system: &RegressionSystem) -> PathSpec {
    let max_steps = config
        .max_steps
        .unwrap_or_else(|| system.n_retained().min(system.n_obs().saturating_sub(1)));
    match algorithm {
        Algorithm::Lasso => {
            let lambdas = match &config.lambda {
                Some(LambdaSpec::Values(v)) => v.clone(),
                Some(LambdaSpec::Auto { n, min_ratio }) => {
                    let lmax = crate::solvers::lambda_max(system);
                    if lmax <= 0.0 || *n == 0 {
                        vec![]
                    } else {
                        let ratio = min_ratio.ln();
                        (0..*n)
                            .map(|i| lmax * (ratio * i as f64 / (*n - 1).max(1) as f64).exp())
                            .collect()
                    }
                }
                None => crate::solvers::auto_lambda_grid(system),
            };
            PathSpec::Lasso { lambdas }
        }
        Algorithm::Lars => PathSpec::Lars { max_steps },
        Algorithm::Omp => PathSpec::Omp {
            max_steps,
            corr_tol: crate::solvers::OMP_CORR_TOL,
        },
    }
}

struct AlgorithmArtifacts {
    algorithm: Algorithm,
    path: SolutionPath,
    cv: Option<CvCurve>,
    path_seconds: f64,
    cv_seconds: f64,
}

/// Run every requested (algorithm × criterion) cell of `config`.
///
/// Per cell: assemble → solve the path → select → back-transform → refine
/// → threshold → metrics. Cell failures are recorded per cell; the other
/// cells proceed. When `out_dir` is set, one JSON report per cell plus
/// CSVs for criterion curves, solution paths, activation grids, and
/// predicted-vs-measured stress curves are written there.
pub fn run_discovery(config: &RunConfig) -> Result<DiscoveryRun> {
    validate(config)?;
    let (dataset, reference) = resolve_datasets(config)?;
    let lib = config.library.build()?;
    let system = assemble(&dataset, &lib)?;

    let wants = |alg: Algorithm, crit: Criterion| -> bool { cell_requested(config, alg, crit) };
    let algorithms: Vec<Algorithm> = config
        .algorithms
        .iter()
        .copied()
        .filter(|&a| config.criteria.iter().any(|&c| wants(a, c)))
        .collect();
    let needs_cv = algorithms
        .iter()
        .any(|&a| config.criteria.contains(&Criterion::Cv) && wants(a, Criterion::Cv));
    let artifacts: Vec<(Algorithm, Result<AlgorithmArtifacts>)> = algorithms
        .par_iter()
        .map(|&algorithm| {
            let spec = path_spec_for(algorithm, config, &system);
            let build = || -> Result<AlgorithmArtifacts> {
                let t0 = Instant::now();
                let path = spec.run(&system)?;
                let path_seconds = t0.elapsed().as_secs_f64();
                let (cv, cv_seconds) = if needs_cv && wants(algorithm, Criterion::Cv) {
                    let t1 = Instant::now();
                    let curve = kfold_cv(
                        &system,
                        &spec,
                        &path,
                        config.k_folds,
                        config.seed.expect("validated"),
                    )?;
                    (Some(curve), t1.elapsed().as_secs_f64())
                } else {
                    (None, 0.0)
                };
                Ok(AlgorithmArtifacts {
                    algorithm,
                    path,
                    cv,
                    path_seconds,
                    cv_seconds,
                })
            };
            (algorithm, build())
        })
        .collect();

    let mut cells = Vec::new();
    for (algorithm, artifact) in &artifacts {
        match artifact {
            Err(e) => {
                for &criterion in &config.criteria {
                    if !wants(*algorithm, criterion) {
                        continue;
                    }
                    cells.push(CellOutcome {
                        algorithm: algorithm.label().into(),
                        criterion: criterion.label().into(),
                        report: None,
                        error: Some(e.to_string()),
                    });
                }
            }
            Ok(artifact) => {
                for &criterion in &config.criteria {
                    if !wants(*algorithm, criterion) {
                        continue;
                    }
                    let outcome = run_cell(
                        config,
                        &dataset,
                        reference.as_ref(),
                        &lib,
                        &system,
                        artifact,
                        criterion,
                    );
                    cells.push(match outcome {
                        Ok(report) => CellOutcome {
                            algorithm: artifact.algorithm.label().into(),
                            criterion: criterion.label().into(),
                            report: Some(report),
                            error: None,
                        },
                        Err(e) => CellOutcome {
                            algorithm: artifact.algorithm.label().into(),
                            criterion: criterion.label().into(),
                            report: None,
                            error: Some(e.to_string()),
                        },
                    });
                }
            }
        }
    }

    let run = DiscoveryRun {
        cells,
        dataset,
        reference,
    };
    if let Some(dir) = &config.out_dir {
        write_artifacts(dir, config, &run, &artifacts, &lib, &system)?;
    }
    Ok(run)
}

fn run_cell(
    config: &RunConfig,
    dataset: &Dataset,
    reference: Option<&Dataset>,
    lib: &ModelLibrary,
    system: &RegressionSystem,
    artifact: &AlgorithmArtifacts,
    criterion: Criterion,
) -> Result<CellReport> {
    let path = &artifact.path;
    let selection = select(path, criterion, system, artifact.cv.as_ref())?;
    let point = &path.points[selection.chosen_index];

    // Active set for refinement: strictly positive scaled coefficients,
    // mapped back to library column indices.
    let active: Vec<usize> = point
        .c_scaled
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0.0)
        .map(|(jj, _)| system.retained_cols[jj])
        .collect();
    if active.is_empty() {
        return Err(Error::DegenerateModel(format!(
            "criterion {} selected the empty model",
            criterion.label()
        )));
    }

    let t0 = Instant::now();
    let free_slots = active
        .iter()
        .any(|&idx| lib.terms[idx].has_nonlinear_slot());
    let mut model = if free_slots {
        refit_nonlinear(
            dataset,
            lib,
            &active,
            config.lambda_r,
            config.w_bounds,
            config.threshold,
        )?
    } else {
        refit_linear(dataset, lib, &active, config.lambda_r, config.threshold)?
    };
    let refine_seconds = t0.elapsed().as_secs_f64();

    model.provenance = Provenance {
        algorithm: Some(artifact.algorithm.label().into()),
        criterion: Some(criterion.label().into()),
        seed: config.seed,
        sparse_seconds: artifact.path_seconds
            + if criterion == Criterion::Cv {
                artifact.cv_seconds
            } else {
                0.0
            },
        refine_seconds,
    };

    let reference_metrics = match reference {
        Some(refdata) => Some(evaluate_metrics(&model, refdata, lib)?),
        None => None,
    };

    Ok(CellReport {
        algorithm: artifact.algorithm.label().into(),
        criterion: criterion.label().into(),
        library: config.library.clone(),
        model,
        reference_metrics,
        selection: SelectionSummary {
            chosen_index: selection.chosen_index,
            knob: point.knob,
            n_path_points: path.points.len(),
            n_active_at_selection: point.n_active(),
        },
        path_truncation: path.truncation.clone(),
        point_warning: point.warning.clone(),
    })
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_artifacts(
    dir: &Path,
    config: &RunConfig,
    run: &DiscoveryRun,
    artifacts: &[(Algorithm, Result<AlgorithmArtifacts>)],
    lib: &ModelLibrary,
    system: &RegressionSystem,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;

    for cell in &run.cells {
        if let Some(report) = &cell.report {
            let path = dir.join(format!("report_{}_{}.json", cell.algorithm, cell.criterion));
            std::fs::write(&path, serde_json::to_string_pretty(report)?)?;
            write_predictions(
                &dir.join(format!(
                    "predictions_{}_{}.csv",
                    cell.algorithm, cell.criterion
                )),
                report,
                run,
                lib,
            )?;
        }
    }

    for (_, artifact) in artifacts {
        let Ok(artifact) = artifact else { continue };
        let alg = artifact.algorithm.label();
        write_path_csv(&dir.join(format!("path_{alg}.csv")), &artifact.path)?;
        write_activation_csv(
            &dir.join(format!("activation_{alg}.csv")),
            &artifact.path,
            lib,
            system,
        )?;
        for &criterion in &config.criteria {
            let curve_path = dir.join(format!("criterion_curve_{alg}_{}.csv", criterion.label()));
            write_criterion_curve(&curve_path, artifact, criterion, system)?;
        }
    }
    Ok(())
}

fn write_criterion_curve(
    path: &Path,
    artifact: &AlgorithmArtifacts,
    criterion: Criterion,
    system: &RegressionSystem,
) -> Result<()> {
    let mut out = String::from("knob,score,std_err\n");
    match criterion {
        Criterion::Cv => {
            if let Some(curve) = &artifact.cv {
                for i in 0..curve.knobs.len() {
                    out.push_str(&format!(
                        "{},{},{}\n",
                        fmt(curve.knobs[i]),
                        fmt(curve.mean[i]),
                        fmt(curve.std_err[i])
                    ));
                }
            }
        }
        Criterion::Aic | Criterion::Bic => {
            // The same refit-based scores the selection stage minimizes.
            let n_obs = system.n_obs();
            let fits = crate::selection::refit_scores(system, &artifact.path);
            for (p, &(rss, k)) in artifact.path.points.iter().zip(&fits) {
                let score = match criterion {
                    Criterion::Aic => crate::selection::aic(rss, n_obs, k),
                    _ => crate::selection::bic(rss, n_obs, k),
                };
                out.push_str(&format!("{},{},\n", fmt(p.knob), fmt(score)));
            }
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn write_path_csv(path: &Path, solution: &SolutionPath) -> Result<()> {
    let mut out = String::from("point,knob,rss,n_active,active_set\n");
    for (i, p) in solution.points.iter().enumerate() {
        let active = p
            .active_set
            .iter()
            .map(|j| j.to_string())
            .collect::<Vec<_>>()
            .join(" ");
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            i,
            fmt(p.knob),
            fmt(p.rss),
            p.n_active(),
            active
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Term × step boolean activation grid (1 when the term's coefficient is
/// strictly positive at the step). Rows are labeled with the library
/// descriptors of the retained columns.
fn write_activation_csv(
    path: &Path,
    solution: &SolutionPath,
    lib: &ModelLibrary,
    system: &RegressionSystem,
) -> Result<()> {
    let mut out = String::from("column,descriptor");
    for i in 0..solution.points.len() {
        out.push_str(&format!(",step_{i}"));
    }
    out.push('\n');
    let n_cols = solution
        .points
        .first()
        .map(|p| p.c_scaled.len())
        .unwrap_or(0);
    for jj in 0..n_cols {
        let descriptor = system
            .retained_cols
            .get(jj)
            .and_then(|&j| lib.terms.get(j))
            .map(|t| t.describe())
            .unwrap_or_else(|| format!("col{jj}"));
        out.push_str(&format!("{jj},{descriptor}"));
        for p in &solution.points {
            out.push_str(if p.c_scaled[jj] > 0.0 { ",1" } else { ",0" });
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn write_predictions(
    path: &Path,
    report: &CellReport,
    run: &DiscoveryRun,
    lib: &ModelLibrary,
) -> Result<()> {
    let data = run.reference.as_ref().unwrap_or(&run.dataset);
    let pred = crate::refine::predict(&report.model, data, lib)?;
    let mut out = String::from("mode,block,p1,p2,component,measured,predicted\n");
    let mut row = 0usize;
    for (k, block) in data.blocks.iter().enumerate() {
        for sample in &block.samples {
            let p1 = fmt(sample.params[0]);
            let p2 = if sample.params.len() > 1 {
                fmt(sample.params[1])
            } else {
                String::new()
            };
            for (ci, comp) in block.mode.measured_components.iter().enumerate() {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    block.mode.kind.label(),
                    k,
                    p1,
                    p2,
                    comp.label(),
                    fmt(sample.values[ci]),
                    fmt(pred[row])
                ));
                row += 1;
            }
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

// ---------------------------------------------------------------------
// Benchmark sweeps
// ---------------------------------------------------------------------

/// One benchmark scenario: a ground truth at a noise level, or a CSV
/// dataset with an optional expected support.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioSpec {
    /// Scenario name in the summary table.
    pub name: String,
    /// Named ground truth for synthetic scenarios.
    #[serde(default)]
    pub truth: Option<String>,
    /// CSV dataset for experimental scenarios.
    #[serde(default)]
    pub csv: Option<PathBuf>,
    /// Library for CSV scenarios (synthetic scenarios reuse the truth's
    /// library).
    #[serde(default)]
    pub library: Option<LibrarySpec>,
    /// Expected active-term descriptors for the support-match flag of CSV
    /// scenarios.
    #[serde(default)]
    pub expected_terms: Option<Vec<String>>,
    /// Relative noise level.
    #[serde(default)]
    pub noise: f64,
    /// Scenario seed.
    #[serde(default)]
    pub seed: Option<u64>,
    /// Samples per mode for synthetic scenarios.
    #[serde(default = "default_n_per_mode")]
    pub n_per_mode: usize,
    /// Parameter range for synthetic scenarios.
    #[serde(default = "default_range")]
    pub range: (f64, f64),
}

/// One row of the benchmark summary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchmarkRow {
    /// Scenario name.
    pub scenario: String,
    /// Algorithm label.
    pub algorithm: String,
    /// Criterion label.
    pub criterion: String,
    /// `ok` or the error message.
    pub status: String,
    /// Whether the discovered support equals the configured truth.
    pub ground_truth_recovered: Option<bool>,
    /// Number of active terms after refinement.
    pub n_active: Option<usize>,
    /// Mode labels aligned with `r2_per_mode`.
    pub modes: Vec<String>,
    /// Per-mode R² against the reference data.
    pub r2_per_mode: Vec<Option<f64>>,
    /// Overall R² against the reference data.
    pub overall_r2: Option<f64>,
    /// Average NRMSE against the reference data.
    pub avg_nrmse: Option<f64>,
    /// Sparse-stage wall time (seconds).
    pub sparse_seconds: Option<f64>,
    /// Refinement wall time (seconds).
    pub refine_seconds: Option<f64>,
}

/// Run a set of benchmark scenarios and collect the summary rows. When
/// `out_dir` is set, writes `benchmark_summary.csv` and `.json` there
/// plus per-scenario artifacts in subdirectories.
pub fn benchmark(scenarios: &[ScenarioSpec], out_dir: Option<&Path>) -> Result<Vec<BenchmarkRow>> {
    // Scenarios run concurrently; every write is scenario-local and the
    // summary preserves input order.
    let per_scenario: Vec<Vec<BenchmarkRow>> = scenarios
        .par_iter()
        .map(|scenario| -> Result<Vec<BenchmarkRow>> {
            let config = scenario_config(scenario, out_dir)?;
            let expected = expected_support(scenario)?;
            Ok(match run_discovery(&config) {
                Ok(run) => run
                    .cells
                    .iter()
                    .map(|cell| benchmark_row(scenario, cell, &expected))
                    .collect(),
                Err(e) => vec![BenchmarkRow {
                    scenario: scenario.name.clone(),
                    algorithm: String::new(),
                    criterion: String::new(),
                    status: e.to_string(),
                    ground_truth_recovered: None,
                    n_active: None,
                    modes: vec![],
                    r2_per_mode: vec![],
                    overall_r2: None,
                    avg_nrmse: None,
                    sparse_seconds: None,
                    refine_seconds: None,
                }],
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<BenchmarkRow> = per_scenario.into_iter().flatten().collect();
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        std::fs::write(
            dir.join("benchmark_summary.json"),
            serde_json::to_string_pretty(&rows)?,
        )?;
        let mut csv = String::from(
            "scenario,algorithm,criterion,status,ground_truth_recovered,n_active,overall_r2,avg_nrmse,r2_per_mode,sparse_seconds,refine_seconds\n",
        );
        for r in &rows {
            let r2s = r
                .r2_per_mode
                .iter()
                .zip(&r.modes)
                .map(|(v, m)| match v {
                    Some(v) => format!("{m}:{v:.6}"),
                    None => format!("{m}:"),
                })
                .collect::<Vec<_>>()
                .join(" ");
            csv.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{}\n",
                r.scenario,
                r.algorithm,
                r.criterion,
                r.status,
                r.ground_truth_recovered
                    .map(|b| b.to_string())
                    .unwrap_or_default(),
                r.n_active.map(|n| n.to_string()).unwrap_or_default(),
                r.overall_r2.map(fmt).unwrap_or_default(),
                r.avg_nrmse.map(fmt).unwrap_or_default(),
                r2s,
                r.sparse_seconds.map(fmt).unwrap_or_default(),
                r.refine_seconds.map(fmt).unwrap_or_default(),
            ));
        }
        std::fs::write(dir.join("benchmark_summary.csv"), csv)?;
    }
    Ok(rows)
}

fn scenario_config(scenario: &ScenarioSpec, out_dir: Option<&Path>) -> Result<RunConfig> {
    let out = out_dir.map(|d| d.join(&scenario.name));
    let mut config = match (&scenario.truth, &scenario.csv) {
        (Some(truth_name), None) => {
            let truth = data::truths::by_name(truth_name)
                .ok_or_else(|| Error::Config(format!("unknown ground truth '{truth_name}'")))?;
            let library = library_spec_of(&truth.lib)?;
            RunConfig::new(
                DatasetSource::Synthetic(SyntheticSpec {
                    truth: Some(truth_name.clone()),
                    truth_file: None,
                    modes: None,
                    n_per_mode: scenario.n_per_mode,
                    range: scenario.range,
                    noise: scenario.noise,
                }),
                library,
            )
        }
        (None, Some(csv)) => RunConfig::new(
            DatasetSource::Csv {
                path: csv.clone(),
                noise: scenario.noise,
            },
            scenario
                .library
                .clone()
                .ok_or_else(|| Error::Config("csv scenario needs a library".into()))?,
        ),
        _ => {
            return Err(Error::Config(
                "scenario needs exactly one of 'truth' or 'csv'".into(),
            ))
        }
    };
    config.seed = scenario.seed;
    config.out_dir = out;
    Ok(config)
}

/// Expected support as library term descriptors.
fn expected_support(scenario: &ScenarioSpec) -> Result<Option<Vec<String>>> {
    if let Some(truth_name) = &scenario.truth {
        let truth = data::truths::by_name(truth_name)
            .ok_or_else(|| Error::Config(format!("unknown ground truth '{truth_name}'")))?;
        Ok(Some(
            truth
                .support()
                .iter()
                .map(|&j| truth.lib.terms[j].describe())
                .collect(),
        ))
    } else {
        Ok(scenario.expected_terms.clone())
    }
}

fn library_spec_of(lib: &ModelLibrary) -> Result<LibrarySpec> {
    let mut mr_order = 0u32;
    let mut alphas = Vec::new();
    let mut any_mr = false;
    for t in &lib.terms {
        match t.family {
            TermFamily::MooneyRivlin { j, k } => {
                any_mr = true;
                mr_order = mr_order.max(j + k);
            }
            TermFamily::Ogden { alpha } => alphas.push(alpha),
            TermFamily::Ortho { .. } => {
                return Err(Error::Config(
                    "synthetic scenarios use isotropic truths".into(),
                ))
            }
        }
    }
    Ok(if any_mr {
        LibrarySpec::Isotropic {
            mr_order,
            ogden_alphas: alphas,
        }
    } else {
        LibrarySpec::Ogden { alphas }
    })
}

fn benchmark_row(
    scenario: &ScenarioSpec,
    cell: &CellOutcome,
    expected: &Option<Vec<String>>,
) -> BenchmarkRow {
    match &cell.report {
        Some(report) => {
            let metrics = report
                .reference_metrics
                .as_ref()
                .unwrap_or(&report.model.metrics);
            let discovered: Vec<String> = report
                .model
                .terms
                .iter()
                .map(|t| t.descriptor.clone())
                .collect();
            let recovered = expected.as_ref().map(|exp| {
                let mut a = exp.clone();
                let mut b = discovered.clone();
                a.sort();
                b.sort();
                a == b
            });
            BenchmarkRow {
                scenario: scenario.name.clone(),
                algorithm: cell.algorithm.clone(),
                criterion: cell.criterion.clone(),
                status: "ok".into(),
                ground_truth_recovered: recovered,
                n_active: Some(report.model.terms.len()),
                modes: metrics.per_mode.iter().map(|m| m.mode.clone()).collect(),
                r2_per_mode: metrics.per_mode.iter().map(|m| m.r2).collect(),
                overall_r2: metrics.overall_r2,
                avg_nrmse: Some(metrics.avg_nrmse),
                sparse_seconds: Some(report.model.provenance.sparse_seconds),
                refine_seconds: Some(report.model.provenance.refine_seconds),
            }
        }
        None => BenchmarkRow {
            scenario: scenario.name.clone(),
            algorithm: cell.algorithm.clone(),
            criterion: cell.criterion.clone(),
            status: cell.error.clone().unwrap_or_else(|| "error".into()),
            ground_truth_recovered: None,
            n_active: None,
            modes: vec![],
            r2_per_mode: vec![],
            overall_r2: None,
            avg_nrmse: None,
            sparse_seconds: None,
            refine_seconds: None,
        },
    }
}
