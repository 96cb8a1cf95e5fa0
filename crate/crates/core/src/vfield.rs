//! Vector fields `X = αⁱ∂ᵢ`: estimation from annihilation conditions
//! `X(f) = 0`, invariant features `X(h) = 0`, flow parameters `X(θ) = 1`,
//! and numerical flows.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_dim, Error, Result};
use crate::features::{evaluate_terms, monomial_basis, monomial_basis_range, terms_as_polynomial, FeatureBasis, Polynomial, Term};
use crate::linalg::Matrix;
use crate::manifold_opt::{self, OptimizationTrace, OptimizerConfig};
use crate::math;
use crate::model_fit::{KdeModel, LevelSetModel, ScalarFunctionModel};

/// Loss below which a degree family counts as annihilating during degree
/// escalation.
pub const ESCALATION_THRESHOLD: f64 = 1e-4;

/// Root-mean-square residual of `X(θ) = 1` above which no polynomial flow
/// parameter is reported as found.
pub const FLOW_PARAMETER_TOL: f64 = 1e-4;

/// Anything that assigns a tangent vector to each point of `Rⁿ`.
pub trait VectorField {
    fn dimension(&self) -> usize;

    /// Components `(α¹(x), …, αⁿ(x))`. `x` must have length `dimension()`.
    fn components_at(&self, x: &[f64]) -> Vec<f64>;

    /// Monomial expansion of each component, if every component is a
    /// polynomial.
    fn polynomial_components(&self) -> Option<Vec<Polynomial>>;

    /// `X(f)(x) = ∇f(x) · α(x)`.
    fn apply(&self, gradient: &[f64], x: &[f64]) -> f64 {
        math::dot(gradient, &self.components_at(x))
    }
}

/// `c` vector fields whose components are linear combinations of one
/// shared basis. Field `j` has coefficient column `j` of an `(n·m) × c`
/// matrix, made of `n` consecutive blocks of `m` coefficients, block `i`
/// giving `αⁱ`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "crate::serde_impls::FieldModelRepr", into = "crate::serde_impls::FieldModelRepr"))]
pub struct VectorFieldModel {
    basis: FeatureBasis,
    coefficients: Matrix,
}

impl VectorFieldModel {
    pub fn new(basis: FeatureBasis, coefficients: Matrix) -> Result<Self> {
        check_dim(basis.dimension() * basis.len(), coefficients.rows(), "VectorFieldModel coefficient rows")?;
        if !coefficients.is_finite() {
            return Err(Error::InvalidArgument("vector field coefficients must be finite".into()));
        }
        Ok(Self { basis, coefficients })
    }

    /// Builds a model from `columns[j][i]` = coefficients of `αⁱ` of field `j`.
    pub fn from_blocks(basis: FeatureBasis, columns: &[Vec<Vec<f64>>]) -> Result<Self> {
        let (n, m) = (basis.dimension(), basis.len());
        let mut coefficients = Matrix::zeros(n * m, columns.len());
        for (j, blocks) in columns.iter().enumerate() {
            check_dim(n, blocks.len(), "vector field block count")?;
            for (i, block) in blocks.iter().enumerate() {
                check_dim(m, block.len(), "vector field block length")?;
                for (k, c) in block.iter().enumerate() {
                    coefficients[(i * m + k, j)] = *c;
                }
            }
        }
        Self::new(basis, coefficients)
    }

    pub fn basis(&self) -> &FeatureBasis {
        &self.basis
    }

    pub fn coefficients(&self) -> &Matrix {
        &self.coefficients
    }

    pub fn dimension(&self) -> usize {
        self.basis.dimension()
    }

    pub fn field_count(&self) -> usize {
        self.coefficients.cols()
    }

    /// The `n` coefficient blocks of field `j`.
    pub fn blocks(&self, j: usize) -> Vec<Vec<f64>> {
        let m = self.basis.len();
        let col = self.coefficients.column(j);
        col.chunks(m).map(<[f64]>::to_vec).collect()
    }

    /// `αⁱ` of field `j` at `x`.
    pub fn component_value(&self, j: usize, i: usize, x: &[f64]) -> Result<f64> {
        let b = self.basis.evaluate(x)?;
        let m = self.basis.len();
        Ok((0..m).map(|k| self.coefficients[(i * m + k, j)] * b[k]).sum())
    }

    /// `αⁱ` of field `j` as a scalar model.
    pub fn component_model(&self, j: usize, i: usize) -> ScalarFunctionModel {
        let m = self.basis.len();
        let coefs = (0..m).map(|k| self.coefficients[(i * m + k, j)]).collect();
        ScalarFunctionModel::new(self.basis.clone(), coefs).expect("block length matches basis")
    }

    pub fn field(&self, j: usize) -> FieldView<'_> {
        assert!(j < self.field_count(), "field index {j} out of range");
        FieldView { model: self, index: j }
    }

    pub fn fields(&self) -> Vec<FieldView<'_>> {
        (0..self.field_count()).map(|j| self.field(j)).collect()
    }

    /// A model holding only field `j`.
    pub fn single(&self, j: usize) -> Self {
        Self { basis: self.basis.clone(), coefficients: self.coefficients.select_columns(&[j]) }
    }

    /// Field `j` as closed-form component expressions.
    pub fn to_basis_field(&self, j: usize) -> BasisVectorField {
        let components = (0..self.dimension()).map(|i| self.component_model(j, i).terms()).collect();
        BasisVectorField { dimension: self.dimension(), components }
    }
}

/// One field of a [`VectorFieldModel`].
#[derive(Clone, Copy, Debug)]
pub struct FieldView<'a> {
    model: &'a VectorFieldModel,
    index: usize,
}

impl VectorField for FieldView<'_> {
    fn dimension(&self) -> usize {
        self.model.dimension()
    }

    fn components_at(&self, x: &[f64]) -> Vec<f64> {
        let b = self.model.basis.evaluate(x).expect("point dimension matches field");
        let m = b.len();
        (0..self.dimension())
            .map(|i| (0..m).map(|k| self.model.coefficients[(i * m + k, self.index)] * b[k]).sum())
            .collect()
    }

    fn polynomial_components(&self) -> Option<Vec<Polynomial>> {
        (0..self.dimension()).map(|i| self.model.component_model(self.index, i).as_polynomial()).collect()
    }
}

/// A field given by explicit component expressions, e.g. a supplied
/// Killing basis element or a ground-truth generator.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BasisVectorField {
    pub dimension: usize,
    /// `components[i]` is `αⁱ` as a sum of terms.
    pub components: Vec<Vec<Term>>,
}

impl BasisVectorField {
    pub fn new(dimension: usize, components: Vec<Vec<Term>>) -> Result<Self> {
        check_dim(dimension, components.len(), "BasisVectorField components")?;
        for t in components.iter().flatten() {
            t.atom.validate(dimension)?;
            if !t.coef.is_finite() {
                return Err(Error::InvalidArgument("field coefficients must be finite".into()));
            }
        }
        Ok(Self { dimension, components })
    }

    /// Builds a field from per-component `(coefficient, exponents)` lists.
    pub fn from_monomials(dimension: usize, components: &[&[(f64, &[u32])]]) -> Result<Self> {
        let comps = components
            .iter()
            .map(|c| c.iter().map(|(coef, e)| Term::new(*coef, crate::features::FeatureAtom::monomial(e))).collect())
            .collect();
        Self::new(dimension, comps)
    }

    /// `h · X` for a scalar expression `h` given as terms over monomials.
    pub fn scaled_by(&self, factor: &[Term]) -> Result<Self> {
        let fp = terms_as_polynomial(factor)
            .ok_or_else(|| Error::InvalidArgument("field rescaling needs a polynomial factor".into()))?;
        let mut comps = Vec::with_capacity(self.dimension);
        for c in &self.components {
            let cp = terms_as_polynomial(c)
                .ok_or_else(|| Error::InvalidArgument("field rescaling needs polynomial components".into()))?;
            let mut out = Vec::new();
            for (ea, ca) in &fp {
                for (eb, cb) in &cp {
                    let e: Vec<u32> = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                    out.push(Term::new(ca * cb, crate::features::FeatureAtom::Monomial { exponents: e }));
                }
            }
            comps.push(out);
        }
        Self::new(self.dimension, comps)
    }
}

impl VectorField for BasisVectorField {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn components_at(&self, x: &[f64]) -> Vec<f64> {
        self.components.iter().map(|c| evaluate_terms(c, x)).collect()
    }

    fn polynomial_components(&self) -> Option<Vec<Polynomial>> {
        self.components.iter().map(|c| terms_as_polynomial(c)).collect()
    }
}

/// Source of the Jacobians `J(F)(x)` (`k × n`) of the function whose
/// symmetries are sought.
#[derive(Clone, Debug)]
pub enum GradientProvider {
    Functions(Vec<ScalarFunctionModel>),
    LevelSet(LevelSetModel),
    Density(KdeModel),
}

impl GradientProvider {
    pub fn dimension(&self) -> usize {
        match self {
            GradientProvider::Functions(fs) => fs.first().map_or(0, ScalarFunctionModel::dimension),
            GradientProvider::LevelSet(m) => m.dimension(),
            GradientProvider::Density(k) => k.dimension(),
        }
    }

    /// Number of scalar components `k`.
    pub fn components(&self) -> usize {
        match self {
            GradientProvider::Functions(fs) => fs.len(),
            GradientProvider::LevelSet(m) => m.components_count(),
            GradientProvider::Density(_) => 1,
        }
    }

    pub fn jacobian(&self, x: &[f64]) -> Result<Matrix> {
        match self {
            GradientProvider::Functions(fs) => {
                let rows = fs.iter().map(|f| f.gradient(x)).collect::<Result<Vec<_>>>()?;
                Matrix::from_rows(&rows)
            }
            GradientProvider::LevelSet(m) => m.jacobian(x),
            GradientProvider::Density(k) => Ok(Matrix::from_rows(&[k.gradient(x)?])?),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.components() == 0 {
            return Err(Error::InvalidArgument("gradient provider has no components".into()));
        }
        if let GradientProvider::Functions(fs) = self {
            let n = self.dimension();
            for f in fs {
                check_dim(n, f.dimension(), "gradient provider functions")?;
            }
        }
        Ok(())
    }
}

/// The matrix `M` with `(M·W)[(i, l), j] = Xⱼ(f_l)(xᵢ)`, rows ordered by
/// point then component.
pub fn extended_feature_matrix(provider: &GradientProvider, data: &Matrix, vf_basis: &FeatureBasis) -> Result<Matrix> {
    provider.validate()?;
    let n = provider.dimension();
    check_dim(n, data.cols(), "extended_feature_matrix data")?;
    check_dim(n, vf_basis.dimension(), "extended_feature_matrix basis")?;
    let k = provider.components();
    let m = vf_basis.len();
    let mut out = Matrix::zeros(k * data.rows(), n * m);
    let mut b = vec![0.0; m];
    for i in 0..data.rows() {
        let x = data.row(i);
        let j = provider.jacobian(x)?;
        vf_basis.evaluate_into(x, &mut b);
        for l in 0..k {
            let row = out.row_mut(i * k + l);
            for r in 0..n {
                let jr = j[(l, r)];
                for (dst, bk) in row[r * m..(r + 1) * m].iter_mut().zip(&b) {
                    *dst = jr * bk;
                }
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct VectorFieldFit {
    pub model: VectorFieldModel,
    pub trace: OptimizationTrace,
}

/// Estimates `c` orthonormal fields annihilating the provider's function.
pub fn estimate_vector_fields(
    provider: &GradientProvider,
    data: &Matrix,
    vf_basis: &FeatureBasis,
    c: usize,
    config: &OptimizerConfig,
) -> Result<VectorFieldFit> {
    let m_ext = extended_feature_matrix(provider, data, vf_basis)?;
    if c == 0 || c > m_ext.cols() {
        return Err(Error::InvalidArgument(alloc::format!("need 1 ≤ c ≤ {}, got {c}", m_ext.cols())));
    }
    let (w, trace) = manifold_opt::minimize(&m_ext, c, config, None)?;
    Ok(VectorFieldFit { model: VectorFieldModel::new(vf_basis.clone(), w.into_matrix())?, trace })
}

/// Component families tried in order by [`escalate_vector_fields`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum ComponentFamily {
    Constant,
    Linear,
    Affine,
    Quadratic,
}

impl ComponentFamily {
    pub const ALL: [ComponentFamily; 4] =
        [ComponentFamily::Constant, ComponentFamily::Linear, ComponentFamily::Affine, ComponentFamily::Quadratic];

    pub fn basis(self, n: usize) -> Result<FeatureBasis> {
        match self {
            ComponentFamily::Constant => monomial_basis(n, 0, true),
            ComponentFamily::Linear => monomial_basis_range(n, 1, 1),
            ComponentFamily::Affine => monomial_basis(n, 1, true),
            ComponentFamily::Quadratic => monomial_basis(n, 2, true),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ComponentFamily::Constant => "constant",
            ComponentFamily::Linear => "linear",
            ComponentFamily::Affine => "affine",
            ComponentFamily::Quadratic => "quadratic",
        }
    }
}

#[derive(Clone, Debug)]
pub struct EscalationResult {
    /// Every family tried, lowest degree first.
    pub attempts: Vec<(ComponentFamily, VectorFieldFit)>,
    /// Index into `attempts` of the reported fit.
    pub chosen: usize,
    /// No family reached the threshold; the lowest-loss fit was chosen.
    pub threshold_missed: bool,
}

impl EscalationResult {
    pub fn chosen_fit(&self) -> &VectorFieldFit {
        &self.attempts[self.chosen].1
    }

    pub fn chosen_family(&self) -> ComponentFamily {
        self.attempts[self.chosen].0
    }
}

/// Searches constant, linear, affine, then quadratic component families and
/// stops at the first whose final loss is below `threshold`.
pub fn escalate_vector_fields(
    provider: &GradientProvider,
    data: &Matrix,
    c: usize,
    config: &OptimizerConfig,
    threshold: f64,
) -> Result<EscalationResult> {
    let n = provider.dimension();
    let mut attempts = Vec::new();
    for family in ComponentFamily::ALL {
        let basis = family.basis(n)?;
        if c > n * basis.len() {
            continue;
        }
        let fit = estimate_vector_fields(provider, data, &basis, c, config)?;
        let done = fit.trace.final_loss < threshold;
        attempts.push((family, fit));
        if done {
            let chosen = attempts.len() - 1;
            return Ok(EscalationResult { attempts, chosen, threshold_missed: false });
        }
    }
    if attempts.is_empty() {
        return Err(Error::InvalidArgument(alloc::format!("too many fields requested: {c}")));
    }
    let chosen = (0..attempts.len())
        .min_by(|&a, &b| attempts[a].1.trace.final_loss.total_cmp(&attempts[b].1.trace.final_loss))
        .expect("nonempty");
    Ok(EscalationResult { attempts, chosen, threshold_missed: true })
}

/// The matrix `M₂` with `(M₂·v)[(i, j)] = Xⱼ(h)(xᵢ)` for `h = Σ vₖ bₖ`,
/// rows ordered by point then field.
pub fn invariant_feature_matrix(
    fields: &[&dyn VectorField],
    data: &Matrix,
    candidate_basis: &FeatureBasis,
) -> Result<Matrix> {
    let n = candidate_basis.dimension();
    check_dim(n, data.cols(), "invariant_feature_matrix data")?;
    for f in fields {
        check_dim(n, f.dimension(), "invariant_feature_matrix field")?;
    }
    let c = fields.len();
    let m2 = candidate_basis.len();
    let mut out = Matrix::zeros(c * data.rows(), m2);
    for i in 0..data.rows() {
        let x = data.row(i);
        let jac = candidate_basis.jacobian(x)?;
        for (j, field) in fields.iter().enumerate() {
            let alpha = field.components_at(x);
            let row = out.row_mut(i * c + j);
            for (k, dst) in row.iter_mut().enumerate() {
                *dst = math::dot(jac.row(k), &alpha);
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct InvariantFit {
    pub invariants: Vec<ScalarFunctionModel>,
    pub trace: OptimizationTrace,
    /// Pearson correlations of the invariants' values over the data, a
    /// diagnostic for functional dependence.
    pub correlations: Matrix,
}

/// Estimates `q` invariant features `h` with `Xⱼ(h) = 0` for every field.
pub fn estimate_invariants(
    fields: &[&dyn VectorField],
    data: &Matrix,
    candidate_basis: &FeatureBasis,
    q: usize,
    config: &OptimizerConfig,
) -> Result<InvariantFit> {
    if candidate_basis.atoms().iter().any(|a| a.is_constant()) {
        return Err(Error::InvalidArgument(
            "invariant candidate basis must not contain the constant atom (it is trivially invariant)".into(),
        ));
    }
    if fields.is_empty() {
        return Err(Error::InvalidArgument("at least one vector field is required".into()));
    }
    let m2 = invariant_feature_matrix(fields, data, candidate_basis)?;
    if q == 0 || q > m2.cols() {
        return Err(Error::InvalidArgument(alloc::format!("need 1 ≤ q ≤ {}, got {q}", m2.cols())));
    }
    let (v, trace) = manifold_opt::minimize(&m2, q, config, None)?;
    let v = v.into_matrix();
    let invariants = (0..q)
        .map(|j| ScalarFunctionModel::new(candidate_basis.clone(), v.column(j)))
        .collect::<Result<Vec<_>>>()?;
    let values = invariants.iter().map(|h| h.values(data)).collect::<Result<Vec<_>>>()?;
    let correlations = correlation_matrix(&values);
    Ok(InvariantFit { invariants, trace, correlations })
}

fn correlation_matrix(series: &[Vec<f64>]) -> Matrix {
    let q = series.len();
    let centred: Vec<Vec<f64>> = series
        .iter()
        .map(|s| {
            let mean = s.iter().sum::<f64>() / s.len().max(1) as f64;
            s.iter().map(|v| v - mean).collect()
        })
        .collect();
    let mut out = Matrix::identity(q);
    for a in 0..q {
        for b in a + 1..q {
            let den = math::norm(&centred[a]) * math::norm(&centred[b]);
            let r = if den > 0.0 { math::dot(&centred[a], &centred[b]) / den } else { 0.0 };
            out[(a, b)] = r;
            out[(b, a)] = r;
        }
    }
    out
}

#[derive(Clone, Debug)]
pub struct FlowParameterFit {
    pub model: ScalarFunctionModel,
    /// Root-mean-square of `X(θ)(xᵢ) − 1`.
    pub rms_residual: f64,
    /// The residual exceeds [`FLOW_PARAMETER_TOL`]: the candidate basis
    /// holds no flow parameter (e.g. the polar angle of a rotation).
    pub no_polynomial_flow_parameter: bool,
}

/// Least-squares solution of `X(θ) = 1` over the candidate basis.
pub fn estimate_flow_parameter(
    field: &dyn VectorField,
    data: &Matrix,
    candidate_basis: &FeatureBasis,
) -> Result<FlowParameterFit> {
    let m2 = invariant_feature_matrix(&[field], data, candidate_basis)?;
    let ones = vec![1.0; m2.rows()];
    let v = manifold_opt::minimize_affine_target(&m2, &ones)?;
    let fitted = m2.mul_vec(&v);
    let rms = math::sqrt(fitted.iter().map(|f| (f - 1.0) * (f - 1.0)).sum::<f64>() / fitted.len().max(1) as f64);
    Ok(FlowParameterFit {
        model: ScalarFunctionModel::new(candidate_basis.clone(), v)?,
        rms_residual: rms,
        no_polynomial_flow_parameter: !(rms <= FLOW_PARAMETER_TOL),
    })
}

/// Classical fixed-step RK4 for `dx/dt = α(x)` from `x0` over time `t`.
/// Returns `steps + 1` states, starting with `x0`.
pub fn flow_integrate(field: &dyn VectorField, x0: &[f64], t: f64, steps: usize) -> Result<Vec<Vec<f64>>> {
    check_dim(field.dimension(), x0.len(), "flow_integrate start point")?;
    if steps == 0 {
        return Err(Error::InvalidArgument("flow integration needs at least one step".into()));
    }
    if !t.is_finite() || x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("flow time and start point must be finite".into()));
    }
    let h = t / steps as f64;
    let axpy = |x: &[f64], k: &[f64], s: f64| -> Vec<f64> { x.iter().zip(k).map(|(a, b)| a + s * b).collect() };
    let mut states = Vec::with_capacity(steps + 1);
    let mut x = x0.to_vec();
    states.push(x.clone());
    for step in 1..=steps {
        let k1 = field.components_at(&x);
        let k2 = field.components_at(&axpy(&x, &k1, h / 2.0));
        let k3 = field.components_at(&axpy(&x, &k2, h / 2.0));
        let k4 = field.components_at(&axpy(&x, &k3, h));
        for i in 0..x.len() {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::FlowDiverged { step });
        }
        states.push(x.clone());
    }
    Ok(states)
}

#[derive(Clone, Debug)]
pub struct RestrictedSearch {
    /// Unit-norm combination weights `a`.
    pub coefficients: Vec<f64>,
    pub trace: OptimizationTrace,
}

impl RestrictedSearch {
    /// `Σ aᵢ Xᵢ` as a single closed-form field.
    pub fn combined_field(&self, basis_fields: &[BasisVectorField]) -> Result<BasisVectorField> {
        let n = basis_fields.first().map_or(0, |f| f.dimension);
        let mut comps = vec![Vec::new(); n];
        for (a, f) in self.coefficients.iter().zip(basis_fields) {
            for (dst, src) in comps.iter_mut().zip(&f.components) {
                dst.extend(src.iter().map(|t| Term::new(a * t.coef, t.atom.clone())));
            }
        }
        BasisVectorField::new(n, comps)
    }
}

/// Minimises `loss(Σ aⱼ Xⱼ(f)(xᵢ))` over unit vectors `a`, searching only
/// combinations of the supplied fields.
pub fn basis_restricted_search(
    basis_fields: &[BasisVectorField],
    f: &ScalarFunctionModel,
    data: &Matrix,
    config: &OptimizerConfig,
) -> Result<RestrictedSearch> {
    if basis_fields.is_empty() {
        return Err(Error::InvalidArgument("restricted search needs at least one basis field".into()));
    }
    let n = f.dimension();
    check_dim(n, data.cols(), "basis_restricted_search data")?;
    for b in basis_fields {
        check_dim(n, b.dimension, "basis_restricted_search field")?;
    }
    let mut a = Matrix::zeros(data.rows(), basis_fields.len());
    for i in 0..data.rows() {
        let x = data.row(i);
        let g = f.gradient(x)?;
        for (j, b) in basis_fields.iter().enumerate() {
            a[(i, j)] = b.apply(&g, x);
        }
    }
    let (w, trace) = manifold_opt::minimize(&a, 1, config, None)?;
    Ok(RestrictedSearch { coefficients: w.column(0), trace })
}

/// Human-readable rendering of a polynomial-or-trig expression, used in
/// reports.
pub fn format_terms(terms: &[Term], names: &[String]) -> String {
    use core::fmt::Write;
    let mut s = String::new();
    for (idx, t) in terms.iter().enumerate() {
        let sign = if t.coef < 0.0 { "-" } else { "+" };
        if idx == 0 {
            if t.coef < 0.0 {
                s.push('-');
            }
        } else {
            let _ = write!(s, " {sign} ");
        }
        let atom = atom_name(&t.atom, names);
        if atom.is_empty() {
            let _ = write!(s, "{}", t.coef.abs());
        } else {
            let _ = write!(s, "{}*{}", t.coef.abs(), atom);
        }
    }
    if s.is_empty() {
        s.push('0');
    }
    s
}

fn atom_name(atom: &crate::features::FeatureAtom, names: &[String]) -> String {
    use crate::features::FeatureAtom;
    use core::fmt::Write;
    let name = |i: usize| names.get(i).cloned().unwrap_or_else(|| alloc::format!("x{}", i + 1));
    match atom {
        FeatureAtom::Monomial { exponents } => {
            let mut parts = Vec::new();
            for (i, &e) in exponents.iter().enumerate() {
                match e {
                    0 => {}
                    1 => parts.push(name(i)),
                    _ => parts.push(alloc::format!("{}^{e}", name(i))),
                }
            }
            parts.join("*")
        }
        FeatureAtom::Sin { axis } => alloc::format!("sin({})", name(*axis)),
        FeatureAtom::Cos { axis } => alloc::format!("cos({})", name(*axis)),
        FeatureAtom::Product { monomial, factor } => {
            let mut s = atom_name(&FeatureAtom::Monomial { exponents: monomial.clone() }, names);
            let _ = write!(s, "*({})", format_terms(factor, names));
            s
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureAtom;
    use crate::manifold_opt::Loss;

    fn rotation() -> BasisVectorField {
        BasisVectorField::from_monomials(2, &[&[(-1.0, &[0, 1])], &[(1.0, &[1, 0])]]).unwrap()
    }

    fn dx_field() -> BasisVectorField {
        BasisVectorField::from_monomials(2, &[&[(1.0, &[0, 0])], &[]]).unwrap()
    }

    #[test]
    fn extended_matrix_for_coordinate_function() {
        let f = ScalarFunctionModel::from_terms(2, &[Term::new(1.0, FeatureAtom::coordinate(2, 0))]).unwrap();
        let provider = GradientProvider::Functions(vec![f]);
        let data = Matrix::from_row_slice(2, 2, &[0.3, 0.1, -2.0, 5.0]);
        let basis = monomial_basis(2, 0, true).unwrap();
        let m = extended_feature_matrix(&provider, &data, &basis).unwrap();
        assert_eq!(m.as_slice(), &[1.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn extended_matrix_annihilated_by_rotation() {
        let f = ScalarFunctionModel::from_terms(
            2,
            &[Term::new(1.0, FeatureAtom::monomial(&[2, 0])), Term::new(1.0, FeatureAtom::monomial(&[0, 2]))],
        )
        .unwrap();
        let provider = GradientProvider::Functions(vec![f]);
        let data = Matrix::from_row_slice(1, 2, &[1.0, 2.0]);
        let basis = monomial_basis(2, 1, true).unwrap();
        let m = extended_feature_matrix(&provider, &data, &basis).unwrap();
        assert_eq!(m.row(0), &[2.0, 2.0, 4.0, 4.0, 4.0, 8.0]);
        // X = −y∂x + x∂y: block x = (0, 0, −1), block y = (0, 1, 0).
        let w = [0.0, 0.0, -1.0, 0.0, 1.0, 0.0];
        assert_eq!(math::dot(m.row(0), &w), 0.0);
    }

    #[test]
    fn rotation_flow_quarter_turn() {
        let path = flow_integrate(&rotation(), &[1.0, 0.0], core::f64::consts::FRAC_PI_2, 1000).unwrap();
        let end = path.last().unwrap();
        assert_eq!(path.len(), 1001);
        assert!(end[0].abs() < 1e-8 && (end[1] - 1.0).abs() < 1e-8, "{end:?}");
    }

    #[test]
    fn translation_flow_is_exact() {
        let path = flow_integrate(&dx_field(), &[0.0, 0.0], 3.0, 4).unwrap();
        assert_eq!(path.last().unwrap(), &vec![3.0, 0.0]);
    }

    #[test]
    fn flow_parameter_for_translation() {
        let data = Matrix::from_row_slice(3, 2, &[0.0, 1.0, 2.0, -1.0, 0.5, 3.0]);
        let basis = monomial_basis_range(2, 1, 1).unwrap();
        let fit = estimate_flow_parameter(&dx_field(), &data, &basis).unwrap();
        assert!((fit.model.coefficients()[0] - 1.0).abs() < 1e-10);
        assert!(fit.model.coefficients()[1].abs() < 1e-10);
        assert!(fit.rms_residual <= 1e-10 && !fit.no_polynomial_flow_parameter);
    }

    #[test]
    fn polar_angle_is_not_polynomial() {
        let mut rows = Vec::new();
        for i in 0..40 {
            let a = i as f64 * 0.157;
            rows.push(vec![math::cos(a), math::sin(a)]);
        }
        let data = Matrix::from_rows(&rows).unwrap();
        let basis = monomial_basis_range(2, 1, 3).unwrap();
        let fit = estimate_flow_parameter(&rotation(), &data, &basis).unwrap();
        assert!(fit.no_polynomial_flow_parameter);
    }

    #[test]
    fn invariant_of_translation_is_y() {
        let data = Matrix::from_row_slice(3, 2, &[0.0, 1.0, 2.0, -1.0, 0.5, 3.0]);
        let basis = monomial_basis_range(2, 1, 1).unwrap();
        let field = dx_field();
        let m2 = invariant_feature_matrix(&[&field], &data, &basis).unwrap();
        assert_eq!(m2.as_slice(), &[1.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
        let cfg = OptimizerConfig::adagrad(Loss::MeanSquared, 0.1, 2000, 0);
        let fit = estimate_invariants(&[&field], &data, &basis, 1, &cfg).unwrap();
        let v = fit.invariants[0].coefficients();
        assert!(v[0].abs() < 1e-4 && (v[1] - 1.0).abs() < 1e-8, "{v:?}");
        assert!(fit.trace.final_loss <= 1e-8);
    }

    #[test]
    fn constant_candidate_rejected() {
        let data = Matrix::zeros(2, 2);
        let basis = monomial_basis(2, 1, true).unwrap();
        let field = dx_field();
        assert!(estimate_invariants(&[&field], &data, &basis, 1, &OptimizerConfig::default()).is_err());
    }

    #[test]
    fn restricted_search_picks_dy() {
        let f = ScalarFunctionModel::from_terms(2, &[Term::new(1.0, FeatureAtom::coordinate(2, 0))]).unwrap();
        let dy = BasisVectorField::from_monomials(2, &[&[], &[(1.0, &[0, 0])]]).unwrap();
        let data = Matrix::from_row_slice(3, 2, &[0.0, 1.0, 2.0, -1.0, 0.5, 3.0]);
        let cfg = OptimizerConfig::adagrad(Loss::MeanSquared, 0.1, 2000, 1);
        let res = basis_restricted_search(&[dx_field(), dy], &f, &data, &cfg).unwrap();
        let a = &res.coefficients;
        assert!(a[0].abs() < 1e-4 && (a[1] - 1.0).abs() < 1e-8, "{a:?}");
    }

    #[test]
    fn formatting() {
        let t = [Term::new(-0.5, FeatureAtom::monomial(&[0, 0])), Term::new(2.0, FeatureAtom::monomial(&[2, 1]))];
        let names = [String::from("x"), String::from("y")];
        assert_eq!(format_terms(&t, &names), "-0.5 + 2*x^2*y");
    }
}
