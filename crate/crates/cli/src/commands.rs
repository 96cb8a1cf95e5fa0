use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use serde::Serialize;
use symfield_core::datasets::{self, GeneratorSpec};
use symfield_core::discrete::{
    fit_density_rotation, fit_discrete, rotation_element, similarity_matrix, DensityEvaluation, DensityRotationOptions,
    ParametricFamily, RotationSelection,
};
use symfield_core::features::{monomial_basis, monomial_basis_range, trig_atoms};
use symfield_core::geometry::{fit_map, pullback_metric, SmoothMapModel};
use symfield_core::model_fit::{
    extend_degenerate_columns, fit_level_set, fit_regression, kde_fit, project_onto_affine, select_components_elbow,
    AffineFrame, Bandwidth, ElbowTrace, DEFAULT_ELBOW_RATIO,
};
use symfield_core::similarity::{domain_from_data, similarity, IntegrationDomain, SimilarityMethod};
use symfield_core::vfield::{
    basis_restricted_search, escalate_vector_fields, estimate_flow_parameter, estimate_invariants,
    estimate_vector_fields, flow_integrate, GradientProvider, ESCALATION_THRESHOLD,
};
use symfield_core::{
    BasisVectorField, FeatureBasis, LevelSetModel, Matrix, OptimizerConfig, ScalarFunctionModel, VectorField,
};

use crate::artifact::{write_json, Artifact};
use crate::cli::*;
use crate::config::resolve_seed;
use crate::error::{CliError, Result};
use crate::table::Table;

/// Runs one parsed command line.
pub fn run(cli: Cli) -> Result<()> {
    if cli.threads == 0 {
        return Err(CliError::invalid("--threads must be at least 1"));
    }
    let threads = cli.threads;
    match cli.command {
        Command::Gen(a) => gen(&a),
        Command::FitFn(a) => fit_fn(&a),
        Command::FitLevelset(a) => fit_levelset(&a),
        Command::FitKde(a) => fit_kde(&a),
        Command::FindVf(a) => find_vf(&a),
        Command::FindInvariants(a) => find_invariants(&a),
        Command::FlowParam(a) => flow_param(&a),
        Command::Flow(a) => flow(&a),
        Command::Sim(a) => sim(&a),
        Command::Discrete(a) => discrete(&a),
        Command::Pullback(a) => pullback(&a, threads),
        Command::Transform(a) => transform(&a, threads),
        Command::Grid(a) => grid(&a, threads),
    }
}

struct Loaded {
    table: Table,
    x: Matrix,
}

impl Loaded {
    fn targets(&self, args: &DataArgs) -> Result<Vec<f64>> {
        self.table.column(&args.target)
    }
}

fn load_data(args: &DataArgs, extra_excluded: &[&str]) -> Result<Loaded> {
    let table = Table::read(&args.data)?;
    let names = match &args.columns {
        Some(c) => c.clone(),
        None => {
            let mut excluded = vec![args.target.as_str()];
            excluded.extend_from_slice(extra_excluded);
            table.names_except(&excluded)
        }
    };
    if names.is_empty() {
        return Err(CliError::invalid(format!("{}: no coordinate columns selected", args.data.display())));
    }
    if table.data.rows() == 0 {
        return Err(CliError::invalid(format!("{}: no data rows", args.data.display())));
    }
    let x = table.select(&names)?;
    if !x.is_finite() {
        return Err(CliError::invalid(format!("{}: coordinates must be finite", args.data.display())));
    }
    Ok(Loaded { table, x })
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    serde_json::from_str(&text).map_err(|source| CliError::Json { path: path.to_path_buf(), source })
}

fn build_basis(args: &BasisArgs, n: usize) -> Result<FeatureBasis> {
    if let Some(p) = &args.basis_file {
        let basis: FeatureBasis = read_json(p)?;
        if basis.dimension() != n {
            return Err(CliError::invalid(format!(
                "basis file is {}-dimensional but the data have {n} columns",
                basis.dimension()
            )));
        }
        return Ok(basis);
    }
    if args.min_degree > args.degree {
        return Err(CliError::invalid("--min-degree exceeds --degree"));
    }
    let poly = monomial_basis_range(n, args.min_degree, args.degree)?;
    if !args.trig {
        return Ok(poly);
    }
    let mut atoms = poly.atoms().to_vec();
    atoms.extend(trig_atoms(n));
    Ok(FeatureBasis::new(n, atoms)?)
}

fn parse_point(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|v| crate::table::parse_f64(v).ok_or_else(|| CliError::invalid(format!("`{v}` is not a number"))))
        .collect()
}

/// Maps `f` over `0..n` on `threads` scoped workers, preserving order.
fn par_map<T: Send, F: Fn(usize) -> Result<T> + Sync>(n: usize, threads: usize, f: F) -> Result<Vec<T>> {
    if threads <= 1 || n < 2 * threads {
        return (0..n).map(&f).collect();
    }
    let chunk = n.div_ceil(threads);
    let f = &f;
    let parts: Vec<Result<Vec<T>>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..n)
            .step_by(chunk)
            .map(|start| s.spawn(move || (start..(start + chunk).min(n)).map(f).collect::<Result<Vec<T>>>()))
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    let mut out = Vec::with_capacity(n);
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

fn rows_to_matrix(rows: Vec<Vec<f64>>, cols: usize) -> Matrix {
    let n = rows.len();
    Matrix::from_vec(n, cols, rows.into_iter().flatten().collect())
}

fn gen(a: &GenArgs) -> Result<()> {
    let size = match a.size {
        Some(s) => s,
        None => datasets::default_size(&a.name).ok_or_else(|| symfield_core::Error::UnknownGenerator(a.name.clone()))?,
    };
    let mut spec = GeneratorSpec::new(&a.name, size, resolve_seed(a.seed, None)?);
    for p in &a.params {
        let (k, v) = p.split_once('=').ok_or_else(|| CliError::invalid(format!("parameter `{p}` is not KEY=VALUE")))?;
        let v = crate::table::parse_f64(v).ok_or_else(|| CliError::invalid(format!("parameter `{p}`: not a number")))?;
        spec = spec.with_parameter(k.trim(), v);
    }
    let ds = datasets::generate(&spec)?;
    let n = ds.data.cols();
    let mut columns: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
    let data = match &ds.targets {
        Some(t) => {
            columns.push("target".into());
            let rows = (0..ds.data.rows())
                .map(|i| {
                    let mut r = ds.data.row(i).to_vec();
                    r.push(t[i]);
                    r
                })
                .collect();
            rows_to_matrix(rows, n + 1)
        }
        None => ds.data.clone(),
    };
    Table::new(columns, data)?.write(Some(&a.out))?;
    let spec_path = a.spec_out.clone().unwrap_or_else(|| sidecar_path(&a.out));
    #[derive(Serialize)]
    struct Sidecar<'a> {
        spec: &'a GeneratorSpec,
        source_columns: &'a [String],
    }
    write_json(Some(&spec_path), &Sidecar { spec: &spec, source_columns: &ds.columns })
}

fn sidecar_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "data".into());
    out.with_file_name(format!("{stem}.spec.json"))
}

fn fit_fn(a: &FitFnArgs) -> Result<()> {
    let d = load_data(&a.data, &[])?;
    let targets = d.targets(&a.data)?;
    let basis = build_basis(&a.basis, d.x.cols())?;
    let fit = fit_regression(&d.x, &targets, &basis)?;
    write_json(a.out.as_deref(), &Artifact::Scalar { model: fit.model, rms_residual: Some(fit.rms_residual) })
}

/// One level-set stage: a fixed component count or an elbow search.
struct Stage {
    model: LevelSetModel,
    loss: f64,
    elbow: Option<ElbowTrace>,
}

fn fit_stage(
    data: &Matrix,
    basis: &FeatureBasis,
    k: usize,
    k_max: Option<usize>,
    ratio: f64,
    config: &OptimizerConfig,
) -> Result<Stage> {
    match k_max {
        Some(k_max) => {
            let search = select_components_elbow(data, basis, k_max, config, ratio)?;
            let chosen = &search.fits[search.trace.selected - 1];
            Ok(Stage { model: chosen.model.clone(), loss: chosen.trace.final_loss, elbow: Some(search.trace) })
        }
        None => {
            let fit = fit_level_set(data, basis, k, config)?;
            Ok(Stage { model: fit.model, loss: fit.trace.final_loss, elbow: None })
        }
    }
}

fn levelset_of(artifact: &Artifact, what: &str) -> Result<LevelSetModel> {
    match artifact {
        Artifact::Levelset { model, frame: None, .. } => Ok(model.clone()),
        Artifact::Levelset { .. } => Err(CliError::invalid(format!("{what} must be fitted in ambient coordinates"))),
        other => Err(CliError::invalid(format!("{what} must be a levelset file, got {}", other.kind()))),
    }
}

fn fit_levelset(a: &FitLevelsetArgs) -> Result<()> {
    let d = load_data(&a.data, &[])?;
    let resolved = a.optim.resolve()?;
    let config = resolved.optimizer;
    let ratio = a.elbow_ratio.or(resolved.file.elbow_ratio).unwrap_or(DEFAULT_ELBOW_RATIO);
    let n = d.x.cols();

    let mut affine: Option<(LevelSetModel, AffineFrame)> = None;
    let mut traces: BTreeMap<&str, ElbowTrace> = BTreeMap::new();
    let mut data = d.x.clone();

    if a.affine_then_quadratic {
        let k_max = a.affine_k_max.unwrap_or(n);
        let stage = fit_stage(&data, &monomial_basis(n, 1, true)?, 1, Some(k_max), ratio, &config)?;
        let (reduced, frame) = project_onto_affine(&data, &stage.model)?;
        traces.insert("affine", stage.elbow.expect("elbow search"));
        affine = Some((stage.model, frame));
        data = reduced;
    } else if let Some(p) = &a.project_affine {
        let model = levelset_of(&Artifact::load(p)?, "--project-affine")?;
        let (reduced, frame) = project_onto_affine(&data, &model)?;
        affine = Some((model, frame));
        data = reduced;
    }
    if data.cols() == 0 {
        return Err(CliError::invalid("the affine subspace is a single point; nothing left to fit"));
    }

    let basis = if a.affine_then_quadratic {
        monomial_basis(data.cols(), 2, true)?
    } else {
        build_basis(&a.basis, data.cols())?
    };
    let basis = match &a.extend_columns {
        Some(p) => {
            let known = Artifact::load(p)?.scalar_functions()?;
            extend_degenerate_columns(&basis, &known, a.extend_degree.unwrap_or(a.basis.degree))?
        }
        None => basis,
    };
    let stage = fit_stage(&data, &basis, a.k, a.k_max, ratio, &config)?;
    let model = if a.extend_columns.is_some() { stage.model.without_artificial()? } else { stage.model };
    if let Some(t) = &stage.elbow {
        traces.insert(if affine.is_some() { "quadratic" } else { "levelset" }, t.clone());
    }

    if let Some(path) = &a.elbow_out {
        match traces.len() {
            0 => return Err(CliError::invalid("--elbow-out needs an elbow search (--k-max or --affine-then-quadratic)")),
            1 => write_json(Some(path), traces.values().next().expect("one trace"))?,
            _ => write_json(Some(path), &traces)?,
        }
    }
    if let Some(path) = &a.reduced_out {
        let Some((_, frame)) = &affine else {
            return Err(CliError::invalid("--reduced-out needs a projection"));
        };
        let names = (1..=frame.reduced_dimension()).map(|i| format!("u{i}")).collect();
        Table::new(names, data.clone())?.write(Some(path))?;
    }
    let (affine, frame) = match affine {
        Some((m, f)) => (Some(m), Some(f)),
        None => (None, None),
    };
    write_json(
        a.out.as_deref(),
        &Artifact::Levelset { model, loss: Some(stage.loss), elbow: stage.elbow, frame, affine, optimizer: Some(config) },
    )
}

fn fit_kde(a: &FitKdeArgs) -> Result<()> {
    let excluded: Vec<&str> = a.weight_column.iter().map(String::as_str).collect();
    let d = load_data(&a.data, &excluded)?;
    let weights = match &a.weight_column {
        Some(c) => Some(d.table.column(c)?.iter().map(|w| w.powf(a.weight_power)).collect::<Vec<_>>()),
        None => None,
    };
    let bandwidth = if a.bandwidth.eq_ignore_ascii_case("scott") {
        Bandwidth::Scott
    } else {
        Bandwidth::Fixed(
            crate::table::parse_f64(&a.bandwidth)
                .ok_or_else(|| CliError::invalid(format!("--bandwidth `{}` is neither `scott` nor a number", a.bandwidth)))?,
        )
    };
    let model = kde_fit(&d.x, weights.as_deref(), bandwidth)?;
    if model.dimension_warning() {
        eprintln!(
            "warning: kernel density estimates in {} dimensions are unreliable at this sample size",
            model.dimension()
        );
    }
    write_json(a.out.as_deref(), &Artifact::Kde { model })
}

/// Brings ambient data into the coordinates of `frame` when needed.
fn in_frame(data: Matrix, frame: Option<&AffineFrame>) -> Result<Matrix> {
    match frame {
        Some(f) if data.cols() == f.ambient_dimension() && data.cols() != f.reduced_dimension() => {
            Ok(f.reduce_all(&data))
        }
        _ => Ok(data),
    }
}

fn find_vf(a: &FindVfArgs) -> Result<()> {
    let artifacts = a.models.iter().map(|p| Artifact::load(p)).collect::<Result<Vec<_>>>()?;
    let frame = artifacts.iter().find_map(Artifact::frame).cloned();
    let provider = match artifacts.as_slice() {
        [Artifact::Levelset { model, .. }] => GradientProvider::LevelSet(model.clone()),
        [Artifact::Kde { model }] => GradientProvider::Density(model.clone()),
        many => {
            let mut fs = Vec::new();
            for art in many {
                fs.extend(art.scalar_functions().map_err(|_| {
                    CliError::invalid(format!(
                        "{} files cannot be combined with other models; pass a single file",
                        art.kind()
                    ))
                })?);
            }
            GradientProvider::Functions(fs)
        }
    };
    let d = load_data(&a.data, &[])?;
    let data = in_frame(d.x.clone(), frame.as_ref())?;
    if data.cols() != provider.dimension() {
        return Err(CliError::invalid(format!(
            "model is {}-dimensional but the data have {} columns",
            provider.dimension(),
            data.cols()
        )));
    }
    let resolved = a.optim.resolve()?;
    let config = resolved.optimizer;

    if let Some(p) = &a.basis_fields {
        let GradientProvider::Functions(fs) = &provider else {
            return Err(CliError::invalid("--basis-fields needs a single scalar function"));
        };
        let [f] = fs.as_slice() else {
            return Err(CliError::invalid("--basis-fields needs a single scalar function"));
        };
        let fields = Artifact::load(p)?.vector_fields()?;
        let search = basis_restricted_search(&fields, f, &data, &config)?;
        let field = search.combined_field(&fields)?;
        return write_json(
            a.out.as_deref(),
            &Artifact::Combination { coefficients: search.coefficients, field, loss: search.trace.final_loss },
        );
    }

    let artifact = if a.escalate {
        let threshold = a.threshold.or(resolved.file.escalation_threshold).unwrap_or(ESCALATION_THRESHOLD);
        let result = escalate_vector_fields(&provider, &data, a.c, &config, threshold)?;
        if result.threshold_missed {
            eprintln!("warning: no component family reached loss {threshold:e}; reporting the lowest-loss fit");
        }
        let chosen = result.chosen_fit();
        Artifact::VectorFields {
            model: chosen.model.clone(),
            loss: chosen.trace.final_loss,
            family: Some(result.chosen_family()),
            attempts: result.attempts.iter().map(|(f, fit)| (*f, fit.trace.final_loss)).collect(),
            threshold_missed: result.threshold_missed,
            frame,
            optimizer: Some(config),
        }
    } else {
        let basis = build_basis(&a.basis, data.cols())?;
        let fit = estimate_vector_fields(&provider, &data, &basis, a.c, &config)?;
        Artifact::VectorFields {
            model: fit.model,
            loss: fit.trace.final_loss,
            family: None,
            attempts: Vec::new(),
            threshold_missed: false,
            frame,
            optimizer: Some(config),
        }
    };
    write_json(a.out.as_deref(), &artifact)
}

fn pick_fields(artifact: &Artifact, indices: &[usize]) -> Result<Vec<BasisVectorField>> {
    let all = artifact.vector_fields()?;
    indices
        .iter()
        .map(|&i| {
            all.get(i)
                .cloned()
                .ok_or_else(|| CliError::invalid(format!("field index {i} out of range (file has {})", all.len())))
        })
        .collect()
}

fn check_field_dim(fields: &[BasisVectorField], n: usize) -> Result<()> {
    match fields.iter().find(|f| f.dimension != n) {
        Some(f) => Err(CliError::invalid(format!("field is {}-dimensional but the data have {n} columns", f.dimension))),
        None => Ok(()),
    }
}

fn find_invariants(a: &FindInvariantsArgs) -> Result<()> {
    let artifact = Artifact::load(&a.fields)?;
    let count = artifact.vector_fields()?.len();
    let indices = a.field_index.clone().unwrap_or_else(|| (0..count).collect());
    let fields = pick_fields(&artifact, &indices)?;
    let d = load_data(&a.data, &[])?;
    let data = in_frame(d.x.clone(), artifact.frame())?;
    check_field_dim(&fields, data.cols())?;
    let basis = build_basis(&a.basis, data.cols())?.without_constant();
    let config = a.optim.resolve()?.optimizer;
    let refs: Vec<&dyn VectorField> = fields.iter().map(|f| f as &dyn VectorField).collect();
    let fit = estimate_invariants(&refs, &data, &basis, a.q, &config)?;
    write_json(
        a.out.as_deref(),
        &Artifact::Invariants {
            invariants: fit.invariants,
            loss: fit.trace.final_loss,
            correlations: fit.correlations,
            optimizer: Some(config),
        },
    )
}

fn flow_param(a: &FlowParamArgs) -> Result<()> {
    let artifact = Artifact::load(&a.fields)?;
    let field = pick_fields(&artifact, &[a.field_index])?.remove(0);
    let d = load_data(&a.data, &[])?;
    let data = in_frame(d.x.clone(), artifact.frame())?;
    check_field_dim(std::slice::from_ref(&field), data.cols())?;
    let basis = build_basis(&a.basis, data.cols())?.without_constant();
    let fit = estimate_flow_parameter(&field, &data, &basis)?;
    if fit.no_polynomial_flow_parameter {
        eprintln!(
            "warning: no flow parameter in this basis (rms residual {:e}); consider `transform --flow-param angle`",
            fit.rms_residual
        );
    }
    write_json(
        a.out.as_deref(),
        &Artifact::FlowParameter {
            model: fit.model,
            rms_residual: fit.rms_residual,
            no_polynomial_flow_parameter: fit.no_polynomial_flow_parameter,
        },
    )
}

fn flow(a: &FlowArgs) -> Result<()> {
    let field = pick_fields(&Artifact::load(&a.fields)?, &[a.field_index])?.remove(0);
    let states = flow_integrate(&field, &a.x0, a.time, a.steps)?;
    let n = a.x0.len();
    let mut columns = vec!["t".to_string()];
    columns.extend((1..=n).map(|i| format!("x{i}")));
    let h = a.time / a.steps as f64;
    let rows = states
        .into_iter()
        .enumerate()
        .map(|(i, s)| {
            let t = match i {
                0 => 0.0,
                i if i == a.steps => a.time,
                i => i as f64 * h,
            };
            std::iter::once(t).chain(s).collect()
        })
        .collect();
    Table::new(columns, rows_to_matrix(rows, n + 1))?.write(a.out.as_deref())
}

fn sim(a: &SimArgs) -> Result<()> {
    let truth = pick_fields(&Artifact::load(&a.truth)?, &[a.truth_index])?.remove(0);
    let estimate = pick_fields(&Artifact::load(&a.estimate)?, &[a.estimate_index])?.remove(0);
    let domain = match (&a.domain_data, &a.lower, &a.upper) {
        (Some(path), _, _) => {
            let args = DataArgs { data: path.clone(), columns: a.columns.clone(), target: "target".into() };
            domain_from_data(&load_data(&args, &[])?.x)?
        }
        (None, Some(lo), Some(hi)) => IntegrationDomain::new(lo.clone(), hi.clone())?,
        _ => return Err(CliError::invalid("give --domain-data or both --lower and --upper")),
    };
    if domain.is_degenerate() {
        eprintln!("warning: data do not vary along axes {:?}; the domain was widened", domain.degenerate_axes);
    }
    let polynomial = truth.polynomial_components().is_some() && estimate.polynomial_components().is_some();
    let method = match a.method {
        SimMethodArg::Analytic => SimilarityMethod::Analytic,
        SimMethodArg::Auto if polynomial => SimilarityMethod::Analytic,
        SimMethodArg::Auto | SimMethodArg::MonteCarlo => {
            SimilarityMethod::MonteCarlo { samples: a.samples, seed: resolve_seed(a.seed, None)? }
        }
    };
    let report = similarity(&truth, &estimate, &domain, Some(method))?;
    write_json(a.out.as_deref(), &report)
}

fn discrete(a: &DiscreteArgs) -> Result<()> {
    let artifact = Artifact::load(&a.model)?;
    let d = load_data(&a.data, &[])?;
    let reference = a.reference_order.map(|k| {
        if k == 0 {
            Err(CliError::invalid("--reference-order must be positive"))
        } else {
            Ok(rotation_element(TAU / f64::from(k)))
        }
    });
    let reference = reference.transpose()?;
    let generator_similarity = |theta: f64| -> Result<Option<f64>> {
        reference.as_ref().map(|r| similarity_matrix(theta, r)).transpose().map_err(CliError::from)
    };

    let out = match a.family {
        DiscreteFamilyArg::DensityRotation => {
            let Artifact::Kde { model } = &artifact else {
                return Err(CliError::invalid(format!("density-rotation needs a kde file, got {}", artifact.kind())));
            };
            let options = DensityRotationOptions {
                starts: a.starts,
                evaluation: if a.direct { DensityEvaluation::Direct } else { DensityRotationOptions::default().evaluation },
                selection: match a.selection {
                    SelectionArg::FirstLocalMinimum => RotationSelection::FirstLocalMinimum,
                    SelectionArg::LowestLoss => RotationSelection::LowestLoss { tie_fraction: a.tie_fraction },
                },
                ..DensityRotationOptions::default()
            };
            let fit = fit_density_rotation(model, &d.x, a.theta_min, &options)?;
            let theta = fit.result.parameters[0];
            Artifact::Discrete {
                family: "density-rotation".into(),
                matrix: symfield_core::discrete::rotation_2d(theta),
                generator_similarity: generator_similarity(theta)?,
                local_minima: fit.local_minima,
                result: fit.result,
            }
        }
        DiscreteFamilyArg::Reflection | DiscreteFamilyArg::Rotation => {
            let fs = artifact.scalar_functions()?;
            let [f] = fs.as_slice() else {
                return Err(CliError::invalid("reflection and rotation fits need a single scalar function"));
            };
            let (family, name) = if a.family == DiscreteFamilyArg::Reflection {
                (ParametricFamily::Reflection2d, "reflection")
            } else {
                (ParametricFamily::Rotation2d { lo: a.theta_min, hi: TAU - a.theta_min }, "rotation")
            };
            let config = a.optim.resolve()?.optimizer;
            let (result, _) = fit_discrete(f, &d.x, &family, &config)?;
            let generator_similarity = match family {
                ParametricFamily::Rotation2d { .. } => generator_similarity(result.parameters[0])?,
                _ => None,
            };
            Artifact::Discrete {
                family: name.into(),
                matrix: family.matrix(&result.parameters),
                generator_similarity,
                local_minima: Vec::new(),
                result,
            }
        }
    };
    write_json(a.out.as_deref(), &out)
}

fn pullback(a: &PullbackArgs, threads: usize) -> Result<()> {
    let (map, rms_residuals) = match (&a.map, &a.source, &a.image) {
        (Some(p), _, _) => match Artifact::load(p)? {
            Artifact::Map { map, rms_residuals } => (map, rms_residuals),
            other => (SmoothMapModel::new(other.scalar_functions()?)?, Vec::new()),
        },
        (None, Some(src), Some(img)) => {
            let source = Table::read(src)?.data;
            let image = Table::read(img)?.data;
            let basis = build_basis(&a.basis, source.cols())?;
            let fit = fit_map(&source, &image, &basis)?;
            (fit.map, fit.rms_residuals)
        }
        _ => return Err(CliError::invalid("give --map or both --source and --image")),
    };
    if let Some(p) = &a.map_out {
        write_json(Some(p), &Artifact::Map { map: map.clone(), rms_residuals: rms_residuals.clone() })?;
    }
    let mut points = a.at.iter().map(|s| parse_point(s)).collect::<Result<Vec<_>>>()?;
    if let Some(p) = &a.points {
        let t = Table::read(p)?;
        points.extend((0..t.data.rows()).map(|i| t.data.row(i).to_vec()));
    }
    let metrics = par_map(points.len(), threads, |i| Ok(pullback_metric(&map, &points[i])?))?;
    #[derive(Serialize)]
    struct Report {
        points: Vec<Vec<f64>>,
        metrics: Vec<Matrix>,
        #[serde(skip_serializing_if = "Vec::is_empty")]
        rms_residuals: Vec<f64>,
    }
    write_json(a.out.as_deref(), &Report { points, metrics, rms_residuals })
}

enum FlowCoordinate {
    Model(ScalarFunctionModel),
    Angle,
}

fn transform(a: &TransformArgs, threads: usize) -> Result<()> {
    let d = load_data(&a.data, &[])?;
    let n = d.x.cols();
    let mut invariants = Vec::new();
    for p in &a.invariants {
        invariants.extend(Artifact::load(p)?.scalar_functions()?);
    }
    let flow = match a.flow_param.as_deref() {
        None => None,
        Some("angle") => {
            if n != 2 {
                return Err(CliError::invalid(format!("the polar angle needs 2-D data, got {n} columns")));
            }
            Some(FlowCoordinate::Angle)
        }
        Some(p) => {
            let fs = Artifact::load(Path::new(p))?.scalar_functions()?;
            let [f] = <[ScalarFunctionModel; 1]>::try_from(fs)
                .map_err(|_| CliError::invalid("a flow-parameter file must hold one function"))?;
            Some(FlowCoordinate::Model(f))
        }
    };
    for h in invariants.iter().chain(match &flow {
        Some(FlowCoordinate::Model(f)) => Some(f),
        _ => None,
    }) {
        if h.dimension() != n {
            return Err(symfield_core::Error::DimensionMismatch {
                expected: n,
                found: h.dimension(),
                context: "transform model dimension",
            }
            .into());
        }
    }
    if invariants.is_empty() && flow.is_none() {
        return Err(CliError::invalid("nothing to compute: give --invariants and/or --flow-param"));
    }
    let target = if a.keep_target { Some(d.targets(&a.data)?) } else { None };
    let mut columns: Vec<String> = (1..=invariants.len()).map(|i| format!("h{i}")).collect();
    if flow.is_some() {
        columns.push("theta".into());
    }
    if target.is_some() {
        columns.push(a.data.target.clone());
    }
    let width = columns.len();
    let rows = par_map(d.x.rows(), threads, |i| {
        let x = d.x.row(i);
        let mut r = invariants.iter().map(|h| h.value(x)).collect::<symfield_core::Result<Vec<_>>>()?;
        match &flow {
            Some(FlowCoordinate::Model(f)) => r.push(f.value(x)?),
            Some(FlowCoordinate::Angle) => r.push(x[1].atan2(x[0])),
            None => {}
        }
        if let Some(t) = &target {
            r.push(t[i]);
        }
        Ok(r)
    })?;
    Table::new(columns, rows_to_matrix(rows, width))?.write(a.out.as_deref())
}

/// Total grid size above which `grid` refuses to run.
const MAX_GRID_NODES: usize = 50_000_000;

fn grid(a: &GridArgs, threads: usize) -> Result<()> {
    let artifact = Artifact::load(&a.model)?;
    let n = a.lower.len();
    if n == 0 || a.upper.len() != n {
        return Err(CliError::invalid("--lower and --upper need the same nonzero number of values"));
    }
    if a.lower.iter().zip(&a.upper).any(|(l, u)| !(l < u) || !l.is_finite() || !u.is_finite()) {
        return Err(CliError::invalid("grid bounds need finite lower < upper on every axis"));
    }
    if a.steps < 2 {
        return Err(CliError::invalid("--steps must be at least 2"));
    }
    let total = (0..n).try_fold(1usize, |acc, _| acc.checked_mul(a.steps)).filter(|t| *t <= MAX_GRID_NODES);
    let Some(total) = total else {
        return Err(CliError::invalid(format!("grid of {}^{n} nodes is too large", a.steps)));
    };
    type Evaluator = Box<dyn Fn(&[f64]) -> symfield_core::Result<Vec<f64>> + Sync>;
    let evaluate: Evaluator = match &artifact {
        Artifact::Kde { model } => {
            let m = model.clone();
            Box::new(move |x| Ok(vec![m.density(x)?]))
        }
        other => {
            let fs = other.scalar_functions()?;
            Box::new(move |x| fs.iter().map(|f| f.value(x)).collect())
        }
    };
    let probe = evaluate(&a.lower)?;
    let mut columns: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
    columns.extend(if probe.len() == 1 { vec!["value".to_string()] } else { (1..=probe.len()).map(|i| format!("f{i}")).collect() });
    let width = columns.len();
    let node = |axis: usize, k: usize| {
        if k == a.steps - 1 {
            a.upper[axis]
        } else {
            a.lower[axis] + (a.upper[axis] - a.lower[axis]) * k as f64 / (a.steps - 1) as f64
        }
    };
    // The last axis varies fastest.
    let rows = par_map(total, threads, |idx| {
        let mut rest = idx;
        let mut x = vec![0.0; n];
        for axis in (0..n).rev() {
            x[axis] = node(axis, rest % a.steps);
            rest /= a.steps;
        }
        let values = evaluate(&x)?;
        x.extend(values);
        Ok(x)
    })?;
    Table::new(columns, rows_to_matrix(rows, width))?.write(a.out.as_deref())
}
