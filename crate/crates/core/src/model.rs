//! The catalog of subspace mixture parameterizations, their parameter
//! counts, and the fitted-parameter container.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// How the subspace orientations relate across components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    FreeOrientation,
    CommonOrientation,
    CommonCovariance,
    Baseline,
}

/// Sharing pattern of the subspace eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AStructure {
    /// `a_ij`: one value per component and per retained direction.
    PerClassPerDim,
    /// `a_j`: one value per retained direction, shared by components.
    PerDimShared,
    /// `a_i`: one value per component.
    PerClass,
    /// `a`: a single value.
    Global,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BStructure {
    PerClass,
    Global,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DStructure {
    PerClass,
    Common,
}

/// Classical Gaussian mixture covariance structures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BaselineKind {
    Full,
    Com,
    Diag,
    Sphe,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 4] = [Self::Full, Self::Com, Self::Diag, Self::Sphe];

    pub fn name(self) -> &'static str {
        match self {
            Self::Full => "Full-GMM",
            Self::Com => "Com-GMM",
            Self::Diag => "Diag-GMM",
            Self::Sphe => "Sphe-GMM",
        }
    }
}

/// A subspace model `[a b Q d]`. Only admissible combinations can be built.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SubspaceModel {
    family: Family,
    a: AStructure,
    b: BStructure,
    d: DStructure,
}

impl SubspaceModel {
    pub fn new(family: Family, a: AStructure, b: BStructure, d: DStructure) -> Result<Self> {
        use AStructure::*;
        use BStructure as B;
        use DStructure as D;
        let ok = match family {
            Family::FreeOrientation => !(a == PerDimShared && d == D::PerClass),
            Family::CommonOrientation => {
                d == D::Common
                    && matches!(
                        (a, b),
                        (PerClass, B::PerClass) | (Global, B::PerClass) | (PerClass, B::Global)
                    )
            }
            Family::CommonCovariance => {
                d == D::Common && b == B::Global && matches!(a, PerDimShared | Global)
            }
            Family::Baseline => false,
        };
        let model = Self { family, a, b, d };
        if ok {
            Ok(model)
        } else if family == Family::CommonOrientation {
            Err(Error::InvalidInput(format!(
                "{} has common orientation with a structure whose estimation needs the \
                 Flury-Gautschi algorithm; it is reserved but not supported",
                model.name()
            )))
        } else {
            Err(Error::InvalidInput(format!(
                "{} is not an admissible model",
                model.name()
            )))
        }
    }

    pub fn family(&self) -> Family {
        self.family
    }
    pub fn a(&self) -> AStructure {
        self.a
    }
    pub fn b(&self) -> BStructure {
        self.b
    }
    pub fn d(&self) -> DStructure {
        self.d
    }

    pub fn shares_orientation(&self) -> bool {
        self.family != Family::FreeOrientation
    }

    fn name(&self) -> String {
        let a = match self.a {
            AStructure::PerClassPerDim => "a_ij",
            AStructure::PerDimShared => "a_j",
            AStructure::PerClass => "a_i",
            AStructure::Global => "a",
        };
        let b = match self.b {
            BStructure::PerClass => "b_i",
            BStructure::Global => "b",
        };
        let q = if self.family == Family::FreeOrientation {
            "Q_i"
        } else {
            "Q"
        };
        let d = match self.d {
            DStructure::PerClass => "d_i",
            DStructure::Common => "d",
        };
        format!("[{a} {b} {q} {d}]")
    }
}

/// Any model the engine can fit: a subspace model or a classical baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Subspace(SubspaceModel),
    Baseline(BaselineKind),
}

impl ModelKind {
    pub fn family(&self) -> Family {
        match self {
            ModelKind::Subspace(m) => m.family,
            ModelKind::Baseline(_) => Family::Baseline,
        }
    }

    pub fn subspace(&self) -> Option<SubspaceModel> {
        match self {
            ModelKind::Subspace(m) => Some(*m),
            ModelKind::Baseline(_) => None,
        }
    }

    /// Whether all components must share one intrinsic dimension.
    pub fn common_dim(&self) -> bool {
        matches!(self, ModelKind::Subspace(m) if m.d == DStructure::Common)
    }

    /// Shorthand used in tests and examples; panics on inadmissible input.
    pub fn parse_known(name: &str) -> ModelKind {
        name.parse().unwrap_or_else(|e| panic!("{name}: {e}"))
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelKind::Subspace(m) => f.write_str(&m.name()),
            ModelKind::Baseline(b) => f.write_str(b.name()),
        }
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    /// Bracket notation such as `[a_i b_i Q_i d_i]` or `[abQd]`; whitespace
    /// inside the brackets is ignored. Baselines by name, e.g. `Full-GMM`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(b) = BaselineKind::ALL.into_iter().find(|b| b.name() == s) {
            return Ok(ModelKind::Baseline(b));
        }
        let bad = || Error::Parse(format!("unknown model name {s:?}"));
        let inner = s
            .strip_prefix('[')
            .and_then(|r| r.strip_suffix(']'))
            .ok_or_else(bad)?;
        let compact: String = inner.chars().filter(|c| !c.is_whitespace()).collect();
        let mut rest = compact.as_str();
        let mut take = |prefix: &str| -> bool {
            if let Some(r) = rest.strip_prefix(prefix) {
                rest = r;
                true
            } else {
                false
            }
        };
        if !take("a") {
            return Err(bad());
        }
        let a = if take("_ij") {
            AStructure::PerClassPerDim
        } else if take("_j") {
            AStructure::PerDimShared
        } else if take("_i") {
            AStructure::PerClass
        } else {
            AStructure::Global
        };
        if !take("b") {
            return Err(bad());
        }
        let b = if take("_i") {
            BStructure::PerClass
        } else {
            BStructure::Global
        };
        if !take("Q") {
            return Err(bad());
        }
        let free_q = take("_i");
        if !take("d") {
            return Err(bad());
        }
        let d = if take("_i") {
            DStructure::PerClass
        } else {
            DStructure::Common
        };
        if !rest.is_empty() {
            return Err(bad());
        }
        let family = if free_q {
            Family::FreeOrientation
        } else if b == BStructure::Global
            && d == DStructure::Common
            && matches!(a, AStructure::PerDimShared | AStructure::Global)
        {
            Family::CommonCovariance
        } else {
            Family::CommonOrientation
        };
        SubspaceModel::new(family, a, b, d).map(ModelKind::Subspace)
    }
}

/// The admissible catalog in table order, optionally restricted to one family.
pub fn enumerate_models(filter: Option<Family>) -> Vec<ModelKind> {
    use AStructure::*;
    use BStructure as B;
    use DStructure as D;
    let free = [
        (PerClassPerDim, B::PerClass, D::PerClass),
        (PerClassPerDim, B::Global, D::PerClass),
        (PerClass, B::PerClass, D::PerClass),
        (Global, B::PerClass, D::PerClass),
        (PerClass, B::Global, D::PerClass),
        (Global, B::Global, D::PerClass),
        (PerClassPerDim, B::PerClass, D::Common),
        (PerDimShared, B::PerClass, D::Common),
        (PerClassPerDim, B::Global, D::Common),
        (PerDimShared, B::Global, D::Common),
        (PerClass, B::PerClass, D::Common),
        (Global, B::PerClass, D::Common),
        (PerClass, B::Global, D::Common),
        (Global, B::Global, D::Common),
    ];
    let common_orientation = [
        (PerClass, B::PerClass, D::Common),
        (Global, B::PerClass, D::Common),
        (PerClass, B::Global, D::Common),
    ];
    let common_covariance = [(PerDimShared, B::Global, D::Common), (Global, B::Global, D::Common)];
    let mut out = Vec::with_capacity(23);
    for (family, combos) in [
        (Family::FreeOrientation, &free[..]),
        (Family::CommonOrientation, &common_orientation[..]),
        (Family::CommonCovariance, &common_covariance[..]),
    ] {
        for &(a, b, d) in combos {
            let m = SubspaceModel::new(family, a, b, d).expect("catalog entry is admissible");
            out.push(ModelKind::Subspace(m));
        }
    }
    out.extend(BaselineKind::ALL.map(ModelKind::Baseline));
    match filter {
        Some(f) => out.into_iter().filter(|m| m.family() == f).collect(),
        None => out,
    }
}

/// Inputs of the parameter-count formulas.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamCountInputs {
    pub k: usize,
    pub p: usize,
    pub dims: Vec<usize>,
}

impl ParamCountInputs {
    pub fn common(k: usize, p: usize, d: usize) -> Self {
        Self {
            k,
            p,
            dims: vec![d; k],
        }
    }
}

/// Number of free parameters of `model`, intrinsic dimensions included.
pub fn param_count(model: ModelKind, inputs: &ParamCountInputs) -> Result<usize> {
    let ParamCountInputs { k, p, ref dims } = *inputs;
    if k == 0 || p == 0 {
        return Err(Error::InvalidInput("k and p must be positive".into()));
    }
    let rho = k * p + k - 1;
    let m = match model {
        ModelKind::Baseline(kind) => return Ok(baseline_param_count(kind, k, p)),
        ModelKind::Subspace(m) => m,
    };
    if dims.len() != k {
        return Err(Error::InvalidInput(format!(
            "{} dimensions given for {k} components",
            dims.len()
        )));
    }
    if let Some(&d) = dims.iter().find(|&&d| d == 0 || d >= p) {
        return Err(Error::InvalidInput(format!(
            "intrinsic dimension {d} outside [1, {}]",
            p - 1
        )));
    }
    let orient = |d: usize| d * (2 * p - d - 1) / 2;
    let tau_bar: usize = dims.iter().map(|&d| orient(d)).sum();
    let big_d: usize = dims.iter().sum();
    if m.d == DStructure::Common && dims.iter().any(|&d| d != dims[0]) {
        return Err(Error::InvalidInput(format!(
            "{} needs a common intrinsic dimension, got {dims:?}",
            ModelKind::Subspace(m)
        )));
    }
    let d = dims[0];
    let tau = orient(d);
    use AStructure::*;
    use BStructure as B;
    let extra = match (m.family, m.d, m.a, m.b) {
        (Family::FreeOrientation, DStructure::PerClass, PerClassPerDim, B::PerClass) => tau_bar + 2 * k + big_d,
        (Family::FreeOrientation, DStructure::PerClass, PerClassPerDim, B::Global) => tau_bar + k + big_d + 1,
        (Family::FreeOrientation, DStructure::PerClass, PerClass, B::PerClass) => tau_bar + 3 * k,
        (Family::FreeOrientation, DStructure::PerClass, Global, B::PerClass) => tau_bar + 2 * k + 1,
        (Family::FreeOrientation, DStructure::PerClass, PerClass, B::Global) => tau_bar + 2 * k + 1,
        (Family::FreeOrientation, DStructure::PerClass, Global, B::Global) => tau_bar + k + 2,
        (Family::FreeOrientation, DStructure::Common, PerClassPerDim, B::PerClass) => k * (tau + d + 1) + 1,
        (Family::FreeOrientation, DStructure::Common, PerDimShared, B::PerClass) => k * (tau + 1) + d + 1,
        (Family::FreeOrientation, DStructure::Common, PerClassPerDim, B::Global) => k * (tau + d) + 2,
        (Family::FreeOrientation, DStructure::Common, PerDimShared, B::Global) => k * tau + d + 2,
        (Family::FreeOrientation, DStructure::Common, PerClass, B::PerClass) => k * (tau + 2) + 1,
        (Family::FreeOrientation, DStructure::Common, Global, B::PerClass) => k * (tau + 1) + 2,
        (Family::FreeOrientation, DStructure::Common, PerClass, B::Global) => k * (tau + 1) + 2,
        (Family::FreeOrientation, DStructure::Common, Global, B::Global) => k * tau + 3,
        (Family::CommonOrientation, _, PerClass, B::PerClass) => tau + 2 * k + 1,
        (Family::CommonOrientation, _, Global, B::PerClass) => tau + k + 2,
        (Family::CommonOrientation, _, PerClass, B::Global) => tau + k + 2,
        (Family::CommonCovariance, _, PerDimShared, _) => tau + d + 2,
        (Family::CommonCovariance, _, Global, _) => tau + 3,
        _ => unreachable!("inadmissible models cannot be constructed"),
    };
    Ok(rho + extra)
}

/// Parameter counts of the classical Gaussian mixtures.
pub fn baseline_param_count(kind: BaselineKind, k: usize, p: usize) -> usize {
    let rho = k * p + k - 1;
    rho + match kind {
        BaselineKind::Full => k * p * (p + 1) / 2,
        BaselineKind::Com => p * (p + 1) / 2,
        BaselineKind::Diag => k * p,
        BaselineKind::Sphe => k,
    }
}

/// One fitted mixture component. The discarded eigen-directions are never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub pi: f64,
    pub mean: DVector<f64>,
    /// `p × d` matrix with orthonormal columns spanning the specific subspace.
    pub orientation: DMatrix<f64>,
    /// Subspace eigenvalues, descending, length `d`.
    pub a: Vec<f64>,
    /// Noise variance outside the subspace.
    pub b: f64,
}

impl Component {
    pub fn dim(&self) -> usize {
        self.a.len()
    }
}

/// Fitted parameters of a subspace mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureParams {
    pub p: usize,
    pub components: Vec<Component>,
}

impl MixtureParams {
    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.components.iter().map(Component::dim).collect()
    }
}

/// Problems found by [`validate_params`]; empty means valid.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks every structural invariant of `params` under `model`.
pub fn validate_params(params: &MixtureParams, model: ModelKind) -> ValidationReport {
    let mut v = Vec::new();
    let p = params.p;
    let comps = &params.components;
    if comps.is_empty() {
        v.push("no components".to_string());
        return ValidationReport { violations: v };
    }
    let pi_sum: f64 = comps.iter().map(|c| c.pi).sum();
    if (pi_sum - 1.0).abs() > 1e-12 {
        v.push(format!("proportions sum to {pi_sum}"));
    }
    for (i, c) in comps.iter().enumerate() {
        if !(c.pi > 0.0 && c.pi <= 1.0) {
            v.push(format!("component {i}: proportion {} outside (0, 1]", c.pi));
        }
        if c.mean.len() != p {
            v.push(format!("component {i}: mean has length {}", c.mean.len()));
        }
        let d = c.dim();
        if d == 0 || d >= p {
            v.push(format!("component {i}: intrinsic dimension {d} outside [1, {}]", p.saturating_sub(1)));
        }
        if c.orientation.shape() != (p, d) {
            v.push(format!(
                "component {i}: orientation is {:?}, expected ({p}, {d})",
                c.orientation.shape()
            ));
        } else {
            let gram = c.orientation.tr_mul(&c.orientation);
            if (gram - DMatrix::identity(d, d)).amax() > 1e-10 {
                v.push(format!("component {i}: orientation columns not orthonormal"));
            }
        }
        if !(c.b > 0.0) {
            v.push(format!("component {i}: b = {} not positive", c.b));
        }
        if c.a.iter().any(|&a| a < c.b) {
            v.push(format!("component {i}: a below b"));
        }
        if c.a.windows(2).any(|w| w[1] > w[0]) {
            v.push(format!("component {i}: a not descending"));
        }
    }
    let Some(m) = model.subspace() else {
        v.push(format!("{model} is not a subspace model"));
        return ValidationReport { violations: v };
    };
    let first = &comps[0];
    let all_equal = |f: &dyn Fn(&Component) -> bool| comps.iter().all(f);
    if m.b == BStructure::Global && !all_equal(&|c| c.b == first.b) {
        v.push("global b but b differs across components".into());
    }
    if m.d == DStructure::Common && !all_equal(&|c| c.dim() == first.dim()) {
        v.push("common d but dimensions differ across components".into());
    }
    match m.a {
        AStructure::PerClassPerDim => {}
        AStructure::PerDimShared => {
            if !all_equal(&|c| c.a == first.a) {
                v.push("shared a_j but a differs across components".into());
            }
        }
        AStructure::PerClass => {
            for (i, c) in comps.iter().enumerate() {
                if c.a.iter().any(|&a| a != c.a[0]) {
                    v.push(format!("component {i}: a_i not constant within component"));
                }
            }
        }
        AStructure::Global => {
            let a0 = first.a.first().copied();
            if !all_equal(&|c| c.a.iter().all(|&a| Some(a) == a0)) {
                v.push("global a but a differs".into());
            }
        }
    }
    if m.shares_orientation() && !all_equal(&|c| c.orientation == first.orientation) {
        v.push("common orientation but orientations differ".into());
    }
    ValidationReport { violations: v }
}
