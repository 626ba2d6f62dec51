//! JSON and CSV interchange: kernel/target specifications, sweep
//! configurations and results, model export, and the rate/functional CSV
//! tables. Numeric CSV cells are printed with 17 significant digits so
//! files are byte-stable and re-read exactly.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use krrlab_core::kernels::{BaseKernel1D, BaseKernelKind, ProductKernel};
use krrlab_core::krr::KrrModel;
use krrlab_core::rates::{LogFactor, RateCase, RateCurveRow};
use krrlab_core::targets::{make_target, TargetKind, TargetSpec};

#[derive(Debug)]
pub enum FormatError {
    /// A config field is missing or out of range; the string names the field.
    Field { field: String, message: String },
    Json(serde_json::Error),
    Io(std::io::Error),
}

impl std::fmt::Display for FormatError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FormatError::Field { field, message } => write!(f, "config field `{field}`: {message}"),
            FormatError::Json(e) => write!(f, "JSON error: {e}"),
            FormatError::Io(e) => write!(f, "IO error: {e}"),
        }
    }
}

impl std::error::Error for FormatError {}

impl From<serde_json::Error> for FormatError {
    fn from(e: serde_json::Error) -> Self {
        FormatError::Json(e)
    }
}

impl From<std::io::Error> for FormatError {
    fn from(e: std::io::Error) -> Self {
        FormatError::Io(e)
    }
}

fn field_err(field: &str, message: impl Into<String>) -> FormatError {
    FormatError::Field { field: field.into(), message: message.into() }
}

/// Serializable kernel description:
/// `{"kind": ..., "params": {...}, "d": ..., "factors": [...]}`; the
/// optional `factors` list overrides `kind`/`params` per coordinate.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct KernelSpec {
    pub kind: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    pub d: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub factors: Option<Vec<FactorSpec>>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct FactorSpec {
    pub kind: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

fn kind_from_name(
    kind: &str,
    params: &BTreeMap<String, f64>,
    field: &str,
) -> Result<BaseKernelKind, FormatError> {
    let get = |name: &str| {
        params
            .get(name)
            .copied()
            .ok_or_else(|| field_err(&format!("{field}.params.{name}"), "missing parameter"))
    };
    match kind {
        "gaussian" => Ok(BaseKernelKind::GaussianOnGaussian { ell: get("ell")?, sigma: get("sigma")? }),
        "mehler" => Ok(BaseKernelKind::Mehler { theta: get("theta")?, sigma: get("sigma")? }),
        "laguerre" => Ok(BaseKernelKind::Laguerre { theta: get("theta")?, alpha: get("alpha")? }),
        other => Err(field_err(
            &format!("{field}.kind"),
            format!("unknown kernel kind `{other}` (expected gaussian, mehler, or laguerre)"),
        )),
    }
}

fn kind_to_name(kind: &BaseKernelKind) -> (&'static str, BTreeMap<String, f64>) {
    let mut params = BTreeMap::new();
    match kind {
        BaseKernelKind::GaussianOnGaussian { ell, sigma } => {
            params.insert("ell".into(), *ell);
            params.insert("sigma".into(), *sigma);
            ("gaussian", params)
        }
        BaseKernelKind::Mehler { theta, sigma } => {
            params.insert("theta".into(), *theta);
            params.insert("sigma".into(), *sigma);
            ("mehler", params)
        }
        BaseKernelKind::Laguerre { theta, alpha } => {
            params.insert("theta".into(), *theta);
            params.insert("alpha".into(), *alpha);
            ("laguerre", params)
        }
    }
}

impl KernelSpec {
    pub fn build(&self) -> Result<ProductKernel, FormatError> {
        if self.d == 0 {
            return Err(field_err("kernel.d", "dimension must be positive"));
        }
        let pk = match &self.factors {
            Some(factors) => {
                if factors.len() != self.d {
                    return Err(field_err(
                        "kernel.factors",
                        format!("{} factors given for d = {}", factors.len(), self.d),
                    ));
                }
                let built = factors
                    .iter()
                    .enumerate()
                    .map(|(i, f)| {
                        let kind =
                            kind_from_name(&f.kind, &f.params, &format!("kernel.factors[{i}]"))?;
                        BaseKernel1D::new(kind, self.d).map_err(|e| {
                            field_err(&format!("kernel.factors[{i}]"), e.to_string())
                        })
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                ProductKernel::from_factors(built)
                    .map_err(|e| field_err("kernel.factors", e.to_string()))?
            }
            None => {
                let kind = kind_from_name(&self.kind, &self.params, "kernel")?;
                ProductKernel::uniform(kind, self.d)
                    .map_err(|e| field_err("kernel", e.to_string()))?
            }
        };
        Ok(pk)
    }

    pub fn from_kernel(pk: &ProductKernel) -> Self {
        if pk.is_uniform() {
            let (kind, params) = kind_to_name(&pk.factors()[0].kind());
            Self { kind: kind.into(), params, d: pk.d(), factors: None }
        } else {
            let factors = pk
                .factors()
                .iter()
                .map(|f| {
                    let (kind, params) = kind_to_name(&f.kind());
                    FactorSpec { kind: kind.into(), params }
                })
                .collect();
            Self {
                kind: "mixed".into(),
                params: BTreeMap::new(),
                d: pk.d(),
                factors: Some(factors),
            }
        }
    }

    /// The same factor recipe at a different ambient dimension (sweep
    /// templates). Only uniform specs can be re-dimensioned.
    pub fn with_dimension(&self, d: usize) -> Result<Self, FormatError> {
        if self.factors.is_some() {
            return Err(field_err(
                "kernel.factors",
                "sweep kernel templates must be uniform (no explicit factor list)",
            ));
        }
        Ok(Self { kind: self.kind.clone(), params: self.params.clone(), d, factors: None })
    }
}

/// Serializable target description.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetSpecJson {
    /// Sum of kernel sections; either explicit anchors or a count to draw
    /// from the product measure.
    KernelSections {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        count: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        anchors: Option<Vec<Vec<f64>>>,
    },
    /// Product eigenfunction by staircase level and within-level index.
    Eigenfunction {
        level: usize,
        #[serde(default)]
        index: u64,
    },
}

impl TargetSpecJson {
    pub fn build<R: Rng + ?Sized>(
        &self,
        kernel: &ProductKernel,
        rng: &mut R,
    ) -> Result<TargetSpec, FormatError> {
        match self {
            TargetSpecJson::KernelSections { count, anchors } => match (count, anchors) {
                (_, Some(anchors)) => TargetSpec::kernel_sections(kernel, anchors.clone())
                    .map_err(|e| field_err("target.anchors", e.to_string())),
                (Some(count), None) => {
                    make_target(kernel, &TargetKind::KernelSections { count: *count }, rng)
                        .map_err(|e| field_err("target.count", e.to_string()))
                }
                (None, None) => {
                    Err(field_err("target", "kernel_sections needs `count` or `anchors`"))
                }
            },
            TargetSpecJson::Eigenfunction { level, index } => {
                TargetSpec::eigenfunction(kernel, *level, *index as u128)
                    .map_err(|e| field_err("target", e.to_string()))
            }
        }
    }
}

/// Rule selecting the per-`d` regularization of a sweep.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum LambdaRule {
    /// `lambda = constant * d^-l` with `l` from the exact-rate schedule at
    /// `(gamma, source_s)`; the first-block schedule multiplies by `ln d`.
    TheoreticalSchedule {
        #[serde(default = "default_constant")]
        constant: f64,
    },
    Fixed {
        value: f64,
    },
    /// Pilot-trial grid search over `lambda = d^-l`, `l` in a fixed grid.
    GridSearchOracle,
}

fn default_constant() -> f64 {
    1.0
}

fn default_test_m() -> usize {
    2000
}

fn default_drop_fraction() -> f64 {
    0.2
}

fn default_slope_tolerance() -> f64 {
    0.2
}

/// Full sweep configuration; the JSON field names are the interchange
/// format.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SweepConfig {
    /// Kernel template; `d` is replaced by each entry of `d_list`.
    pub kernel: KernelSpec,
    pub gamma: f64,
    pub d_list: Vec<usize>,
    pub trials: usize,
    pub sigma_eps: f64,
    pub lambda_rule: LambdaRule,
    pub target: TargetSpecJson,
    /// Source exponent driving the theoretical schedule and the theory
    /// comparison.
    pub source_s: f64,
    #[serde(default = "default_test_m")]
    pub test_m: usize,
    pub root_seed: u64,
    #[serde(default = "default_drop_fraction")]
    pub drop_fraction: f64,
    #[serde(default = "default_slope_tolerance")]
    pub slope_tolerance: f64,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<(), FormatError> {
        if !(self.gamma > 0.0) {
            return Err(field_err("gamma", "must be positive"));
        }
        if self.d_list.is_empty() {
            return Err(field_err("d_list", "must be nonempty"));
        }
        if !self.d_list.windows(2).all(|w| w[0] < w[1]) {
            return Err(field_err("d_list", "must be strictly increasing"));
        }
        if self.d_list[0] == 0 {
            return Err(field_err("d_list", "dimensions must be positive"));
        }
        if self.trials == 0 {
            return Err(field_err("trials", "must be at least 1"));
        }
        if !(self.sigma_eps >= 0.0) {
            return Err(field_err("sigma_eps", "must be nonnegative"));
        }
        if !(self.source_s > 0.0) {
            return Err(field_err("source_s", "must be positive"));
        }
        if self.test_m == 0 {
            return Err(field_err("test_m", "must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.drop_fraction) {
            return Err(field_err("drop_fraction", "must lie in [0, 1)"));
        }
        if !(self.slope_tolerance > 0.0) {
            return Err(field_err("slope_tolerance", "must be positive"));
        }
        match &self.lambda_rule {
            LambdaRule::Fixed { value } if !(*value > 0.0) => {
                return Err(field_err("lambda_rule.value", "must be positive"));
            }
            LambdaRule::TheoreticalSchedule { constant } if !(*constant > 0.0) => {
                return Err(field_err("lambda_rule.constant", "must be positive"));
            }
            _ => {}
        }
        self.kernel.with_dimension(self.d_list[0])?.build()?;
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, FormatError> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// Hex SHA-256 of the canonical JSON, truncated to 16 characters; names
    /// the result files.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let digest = Sha256::digest(self.to_canonical_json().as_bytes());
        let mut out = String::new();
        for byte in digest.iter().take(8) {
            write!(out, "{byte:02x}").unwrap();
        }
        out
    }
}

/// One dimension's aggregated sweep outcome.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SweepPoint {
    pub d: usize,
    pub n: usize,
    pub lambda: f64,
    pub mean_error: f64,
    pub std_error: f64,
    pub trial_errors: Vec<f64>,
    pub failed_trials: usize,
}

/// Sweep output. Wall-clock timing is kept in memory but never serialized,
/// so result files are byte-identical across reruns of the same config.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SweepResult {
    pub config_hash: String,
    pub config: SweepConfig,
    pub points: Vec<SweepPoint>,
    #[serde(skip)]
    pub wall_seconds: f64,
}

impl SweepResult {
    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("result serializes");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<Self, FormatError> {
        Ok(serde_json::from_str(text)?)
    }

    /// `d,n,lambda,mean_error,stderr` table.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("d,n,lambda,mean_error,stderr\n");
        for p in &self.points {
            writeln!(
                out,
                "{},{},{},{},{}",
                p.d,
                p.n,
                fmt_float(p.lambda),
                fmt_float(p.mean_error),
                fmt_float(p.std_error)
            )
            .unwrap();
        }
        out
    }
}

/// 17-significant-digit scientific notation; round-trips through `f64`
/// parsing bit-exactly.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt_float(x: Option<f64>) -> String {
    x.map(fmt_float).unwrap_or_default()
}

fn case_name(case: RateCase) -> &'static str {
    match case {
        RateCase::I => "I",
        RateCase::II => "II",
        RateCase::III => "III",
        RateCase::MinimaxI => "minimax_i",
        RateCase::MinimaxII => "minimax_ii",
        RateCase::NotCovered => "not_covered",
    }
}

fn log_flag_name(flag: LogFactor) -> &'static str {
    match flag {
        LogFactor::None => "none",
        LogFactor::Ln2N => "ln2n",
        LogFactor::EpsSlack => "eps_slack",
    }
}

/// Rate-curve CSV with the fixed schema
/// `gamma,exact_d_exp,exact_n_exp,exact_case,exact_p,lambda_exp,log_flag,minimax_d_exp,minimax_n_exp,minimax_case`.
/// Uncovered or unselected entries leave their cells empty.
pub fn rate_curve_csv(rows: &[RateCurveRow]) -> String {
    let mut out = String::from(
        "gamma,exact_d_exp,exact_n_exp,exact_case,exact_p,lambda_exp,log_flag,minimax_d_exp,minimax_n_exp,minimax_case\n",
    );
    for row in rows {
        let exact = row.exact.as_ref();
        let minimax = row.minimax.as_ref();
        let exact_cells = match exact {
            Some(e) => (
                fmt_opt_float(e.d_exponent),
                fmt_opt_float(e.n_exponent),
                case_name(e.case).to_string(),
                e.p.to_string(),
                fmt_opt_float(e.lambda_exponent),
                log_flag_name(e.log_factor).to_string(),
            ),
            None => Default::default(),
        };
        let minimax_cells = match minimax {
            Some(m) => (
                fmt_opt_float(m.d_exponent),
                fmt_opt_float(m.n_exponent),
                case_name(m.case).to_string(),
            ),
            None => Default::default(),
        };
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            fmt_float(row.gamma),
            exact_cells.0,
            exact_cells.1,
            exact_cells.2,
            exact_cells.3,
            exact_cells.4,
            exact_cells.5,
            minimax_cells.0,
            minimax_cells.1,
            minimax_cells.2,
        )
        .unwrap();
    }
    out
}

/// One row of the spectrum-functional sweep CSV.
pub struct FunctionalRow {
    pub lambda: f64,
    pub n1: f64,
    pub n2: f64,
    pub r2: f64,
    pub flam_bound: f64,
    pub tail_err: f64,
}

/// `lambda,n1,n2,r2,flam_bound,tail_err` table.
pub fn functional_csv(rows: &[FunctionalRow]) -> String {
    let mut out = String::from("lambda,n1,n2,r2,flam_bound,tail_err\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            fmt_float(r.lambda),
            fmt_float(r.n1),
            fmt_float(r.n2),
            fmt_float(r.r2),
            fmt_float(r.flam_bound),
            fmt_float(r.tail_err)
        )
        .unwrap();
    }
    out
}

/// Model export: kernel spec, lambda, and base64 row-major little-endian
/// doubles for the retained inputs and dual coefficients.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelExport {
    pub kernel: KernelSpec,
    pub lambda: f64,
    pub n: usize,
    pub d: usize,
    pub x_base64: String,
    pub alpha_base64: String,
    pub jitter: f64,
    pub dual_residual: f64,
}

fn encode_f64s(values: impl Iterator<Item = f64>) -> String {
    use base64::Engine;
    let mut bytes = Vec::new();
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    base64::engine::general_purpose::STANDARD.encode(bytes)
}

pub fn decode_f64s(text: &str) -> Result<Vec<f64>, FormatError> {
    use base64::Engine;
    let bytes = base64::engine::general_purpose::STANDARD
        .decode(text)
        .map_err(|e| field_err("base64", e.to_string()))?;
    if bytes.len() % 8 != 0 {
        return Err(field_err("base64", "byte length not a multiple of 8"));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

impl ModelExport {
    pub fn from_model(model: &KrrModel, inputs: &[Vec<f64>]) -> Self {
        Self {
            kernel: KernelSpec::from_kernel(model.kernel()),
            lambda: model.lambda(),
            n: model.n(),
            d: model.kernel().d(),
            x_base64: encode_f64s(inputs.iter().flatten().copied()),
            alpha_base64: encode_f64s(model.alpha().iter().copied()),
            jitter: model.jitter(),
            dual_residual: model.dual_residual(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_spec_round_trips() {
        let spec: KernelSpec = serde_json::from_str(
            r#"{"kind": "gaussian", "params": {"ell": 1.0, "sigma": 1.0}, "d": 4}"#,
        )
        .unwrap();
        let pk = spec.build().unwrap();
        assert_eq!(pk.d(), 4);
        let back = KernelSpec::from_kernel(&pk);
        assert_eq!(back, spec);
    }

    #[test]
    fn heterogeneous_factor_list_round_trips() {
        let text = r#"{
            "kind": "mixed", "d": 3,
            "factors": [
                {"kind": "gaussian", "params": {"ell": 1.0, "sigma": 1.0}},
                {"kind": "mehler", "params": {"theta": 0.5, "sigma": 1.0}},
                {"kind": "laguerre", "params": {"theta": 0.5, "alpha": 0.5}}
            ]
        }"#;
        let spec: KernelSpec = serde_json::from_str(text).unwrap();
        let pk = spec.build().unwrap();
        assert!(!pk.is_uniform());
        let back = KernelSpec::from_kernel(&pk);
        assert_eq!(back.build().unwrap().d(), 3);
    }

    #[test]
    fn build_errors_name_the_field() {
        let spec: KernelSpec =
            serde_json::from_str(r#"{"kind": "gaussian", "params": {"ell": 1.0}, "d": 4}"#)
                .unwrap();
        let err = spec.build().unwrap_err();
        assert!(err.to_string().contains("kernel.params.sigma"), "{err}");

        let spec: KernelSpec =
            serde_json::from_str(r#"{"kind": "sobolev", "params": {}, "d": 4}"#).unwrap();
        let err = spec.build().unwrap_err();
        assert!(err.to_string().contains("kernel.kind"), "{err}");
    }

    #[test]
    fn float_format_is_17_digits_and_round_trips() {
        for &x in &[1.5, -0.000123456789012345678, 3.0_f64.sqrt() * 1e17, 7e-300] {
            let text = fmt_float(x);
            assert_eq!(text.parse::<f64>().unwrap(), x, "{text}");
        }
        assert_eq!(fmt_float(1.5), "1.5000000000000000e0");
    }

    #[test]
    fn config_hash_is_stable_and_sensitive() {
        let base = r#"{
            "kernel": {"kind": "gaussian", "params": {"ell": 1.0, "sigma": 1.0}, "d": 1},
            "gamma": 1.5,
            "d_list": [5, 8],
            "trials": 2,
            "sigma_eps": 0.1,
            "lambda_rule": {"rule": "theoretical_schedule"},
            "target": {"kind": "kernel_sections", "count": 3},
            "source_s": 1.0,
            "root_seed": 7
        }"#;
        let a = SweepConfig::from_json(base).unwrap();
        let b = SweepConfig::from_json(base).unwrap();
        assert_eq!(a.hash(), b.hash());
        let mut c = a.clone();
        c.root_seed = 8;
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn config_validation_errors_name_fields() {
        let mut cfg: SweepConfig = serde_json::from_str(
            r#"{
            "kernel": {"kind": "gaussian", "params": {"ell": 1.0, "sigma": 1.0}, "d": 1},
            "gamma": 1.5,
            "d_list": [5, 8],
            "trials": 2,
            "sigma_eps": 0.1,
            "lambda_rule": {"rule": "fixed", "value": 1e-3},
            "target": {"kind": "eigenfunction", "level": 1},
            "source_s": 1.0,
            "root_seed": 7
        }"#,
        )
        .unwrap();
        cfg.validate().unwrap();
        cfg.d_list = vec![8, 5];
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("d_list"), "{err}");
    }

    #[test]
    fn base64_round_trips_doubles() {
        let values = vec![0.0, -1.5, std::f64::consts::PI, 1e-300];
        let text = encode_f64s(values.iter().copied());
        assert_eq!(decode_f64s(&text).unwrap(), values);
    }
}
