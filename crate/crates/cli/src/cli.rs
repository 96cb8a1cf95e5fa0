use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::OptimArgs;

#[derive(Parser, Debug)]
#[command(name = "symfield", version, about = "Discover continuous and discrete symmetries of functions estimated from tabular data")]
pub struct Cli {
    /// Worker threads for row-parallel evaluation (grid, transform, pullback).
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic dataset as CSV plus a JSON record of its spec.
    Gen(GenArgs),
    /// Least-squares regression of the target column on a feature basis.
    FitFn(FitFnArgs),
    /// Fit level-set components `F(x) = 0` of the data.
    FitLevelset(FitLevelsetArgs),
    /// Gaussian kernel density estimate of the data.
    FitKde(FitKdeArgs),
    /// Estimate vector fields annihilating a fitted function.
    FindVf(FindVfArgs),
    /// Estimate features invariant under fitted vector fields.
    FindInvariants(FindInvariantsArgs),
    /// Solve `X(θ) = 1` for a flow parameter of one field.
    FlowParam(FlowParamArgs),
    /// Integrate the flow of a field from a starting point.
    Flow(FlowArgs),
    /// Similarity score between two vector fields.
    Sim(SimArgs),
    /// Fit a discrete symmetry (reflection or rotation).
    Discrete(DiscreteArgs),
    /// Pull the ambient Euclidean metric back through a smooth map.
    Pullback(PullbackArgs),
    /// Rewrite data in invariant and flow-parameter coordinates.
    Transform(TransformArgs),
    /// Tabulate a fitted function on a regular grid.
    Grid(GridArgs),
}

#[derive(Args, Debug, Clone)]
pub struct DataArgs {
    /// Input CSV with a header row.
    #[arg(long)]
    pub data: PathBuf,
    /// Coordinate columns, comma separated (default: every column except
    /// the target).
    #[arg(long, value_delimiter = ',')]
    pub columns: Option<Vec<String>>,
    /// Name of the target column.
    #[arg(long, default_value = "target")]
    pub target: String,
}

#[derive(Args, Debug, Clone)]
pub struct BasisArgs {
    /// Highest monomial degree.
    #[arg(long, default_value_t = 2)]
    pub degree: u32,
    /// Lowest monomial degree (0 includes the constant).
    #[arg(long, default_value_t = 0)]
    pub min_degree: u32,
    /// Add sin and cos of every coordinate.
    #[arg(long)]
    pub trig: bool,
    /// Read the basis (`{"dimension", "atoms"}`) from a JSON file instead.
    #[arg(long)]
    pub basis_file: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct GenArgs {
    /// Generator name, e.g. gaussian-quadratic or disc-rot.
    #[arg(long)]
    pub name: String,
    /// Number of samples (default: the size used in the experiments).
    #[arg(long)]
    pub size: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Generator parameter `key=value`, repeatable.
    #[arg(long = "param", value_name = "KEY=VALUE")]
    pub params: Vec<String>,
    #[arg(long)]
    pub out: PathBuf,
    /// Where to record the spec (default: `<out stem>.spec.json`).
    #[arg(long)]
    pub spec_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct FitFnArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub basis: BasisArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct FitLevelsetArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub basis: BasisArgs,
    /// Number of components.
    #[arg(long, default_value_t = 1, conflicts_with = "k_max")]
    pub k: usize,
    /// Fit 1..=K components and keep the count before the first loss jump.
    #[arg(long)]
    pub k_max: Option<usize>,
    /// Loss ratio that counts as a jump.
    #[arg(long)]
    pub elbow_ratio: Option<f64>,
    /// Project the data onto the affine subspace of this level-set file
    /// and fit in its coordinates.
    #[arg(long, value_name = "LEVELSET_JSON")]
    pub project_affine: Option<PathBuf>,
    /// Append `h·f` columns for the known components in this file so that
    /// their multiples are not rediscovered.
    #[arg(long, value_name = "MODEL_JSON")]
    pub extend_columns: Option<PathBuf>,
    /// Total degree of the appended `h·f` columns (default: `--degree`).
    #[arg(long)]
    pub extend_degree: Option<u32>,
    /// Affine elbow search, projection, then a quadratic fit in the
    /// projected coordinates.
    #[arg(long, conflicts_with_all = ["project_affine", "extend_columns"])]
    pub affine_then_quadratic: bool,
    /// Largest affine component count tried by `--affine-then-quadratic`
    /// (default: the dimension).
    #[arg(long)]
    pub affine_k_max: Option<usize>,
    /// Write the elbow trace(s) here.
    #[arg(long)]
    pub elbow_out: Option<PathBuf>,
    /// Write the projected data here when a projection is made.
    #[arg(long)]
    pub reduced_out: Option<PathBuf>,
    #[command(flatten)]
    pub optim: OptimArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct FitKdeArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// `scott` or a positive number.
    #[arg(long, default_value = "scott")]
    pub bandwidth: String,
    /// Column of per-sample weights (excluded from the coordinates).
    #[arg(long)]
    pub weight_column: Option<String>,
    /// Raise the weights to this power.
    #[arg(long, default_value_t = 1.0)]
    pub weight_power: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct FindVfArgs {
    /// Model file(s): scalar functions, one level set, or one density.
    #[arg(long = "model", required = true)]
    pub models: Vec<PathBuf>,
    #[command(flatten)]
    pub data: DataArgs,
    /// Basis of the field components (ignored with `--escalate`).
    #[command(flatten)]
    pub basis: BasisArgs,
    /// Number of fields.
    #[arg(long, default_value_t = 1)]
    pub c: usize,
    /// Try constant, linear, affine, quadratic components in turn.
    #[arg(long, conflicts_with = "basis_fields")]
    pub escalate: bool,
    /// Loss below which escalation stops.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Search only unit combinations of these closed-form fields.
    #[arg(long, value_name = "FIELDS_JSON")]
    pub basis_fields: Option<PathBuf>,
    #[command(flatten)]
    pub optim: OptimArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct FindInvariantsArgs {
    #[arg(long)]
    pub fields: PathBuf,
    /// Use only these fields (default: all).
    #[arg(long, value_delimiter = ',')]
    pub field_index: Option<Vec<usize>>,
    #[command(flatten)]
    pub data: DataArgs,
    /// Candidate basis; the constant is always dropped.
    #[command(flatten)]
    pub basis: BasisArgs,
    /// Number of invariants.
    #[arg(long, default_value_t = 1)]
    pub q: usize,
    #[command(flatten)]
    pub optim: OptimArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct FlowParamArgs {
    #[arg(long)]
    pub fields: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub field_index: usize,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub basis: BasisArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct FlowArgs {
    #[arg(long)]
    pub fields: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub field_index: usize,
    /// Starting point, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub x0: Vec<f64>,
    /// Total flow time (may be negative).
    #[arg(long, allow_hyphen_values = true)]
    pub time: f64,
    #[arg(long, default_value_t = 1000)]
    pub steps: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SimMethodArg {
    Auto,
    Analytic,
    MonteCarlo,
}

#[derive(Args, Debug)]
pub struct SimArgs {
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub truth_index: usize,
    #[arg(long)]
    pub estimate: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub estimate_index: usize,
    /// Integrate over the bounding box of this CSV.
    #[arg(long, conflicts_with_all = ["lower", "upper"])]
    pub domain_data: Option<PathBuf>,
    /// Columns of `--domain-data` to use (default: all but `target`).
    #[arg(long, value_delimiter = ',')]
    pub columns: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, requires = "upper")]
    pub lower: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, requires = "lower")]
    pub upper: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value_t = SimMethodArg::Auto)]
    pub method: SimMethodArg,
    /// Monte-Carlo sample count.
    #[arg(long, default_value_t = symfield_core::similarity::DEFAULT_MC_SAMPLES)]
    pub samples: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DiscreteFamilyArg {
    Reflection,
    Rotation,
    DensityRotation,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SelectionArg {
    FirstLocalMinimum,
    LowestLoss,
}

#[derive(Args, Debug)]
pub struct DiscreteArgs {
    /// Scalar model (reflection, rotation) or density (density-rotation).
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum)]
    pub family: DiscreteFamilyArg,
    /// Rotations are searched in `[θ_min, 2π − θ_min]`.
    #[arg(long, default_value_t = std::f64::consts::FRAC_PI_6)]
    pub theta_min: f64,
    /// Report the similarity of the fitted rotation to the rotation by
    /// `2π / k`.
    #[arg(long)]
    pub reference_order: Option<u32>,
    /// Grid angles used to bracket local minima (density-rotation).
    #[arg(long, default_value_t = 64)]
    pub starts: usize,
    /// Evaluate the density exactly instead of on an interpolated grid.
    #[arg(long)]
    pub direct: bool,
    #[arg(long, value_enum, default_value_t = SelectionArg::FirstLocalMinimum)]
    pub selection: SelectionArg,
    /// Loss tolerance, as a fraction of the loss range, for `lowest-loss`.
    #[arg(long, default_value_t = 0.01)]
    pub tie_fraction: f64,
    #[command(flatten)]
    pub optim: OptimArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PullbackArgs {
    /// Map file; alternatively fit one with `--source` and `--image`.
    #[arg(long, conflicts_with_all = ["source", "image"])]
    pub map: Option<PathBuf>,
    /// CSV of source coordinates (all columns).
    #[arg(long, requires = "image")]
    pub source: Option<PathBuf>,
    /// CSV of image coordinates, row-aligned with `--source`.
    #[arg(long, requires = "source")]
    pub image: Option<PathBuf>,
    /// Basis of the fitted map components.
    #[command(flatten)]
    pub basis: BasisArgs,
    /// Save the fitted map.
    #[arg(long)]
    pub map_out: Option<PathBuf>,
    /// Evaluation point, comma separated; repeatable.
    #[arg(long = "at", allow_hyphen_values = true)]
    pub at: Vec<String>,
    /// CSV of evaluation points.
    #[arg(long)]
    pub points: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TransformArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Files of invariant features, repeatable.
    #[arg(long = "invariants")]
    pub invariants: Vec<PathBuf>,
    /// Flow-parameter model file, or `angle` for the polar angle of 2-D data.
    #[arg(long)]
    pub flow_param: Option<String>,
    /// Append the target column to the output.
    #[arg(long)]
    pub keep_target: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct GridArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub lower: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub upper: Vec<f64>,
    /// Nodes per axis.
    #[arg(long, default_value_t = 101)]
    pub steps: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}
