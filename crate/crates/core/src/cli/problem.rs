//! Problem files: TOML documents with complex entries written as `[re, im]`.

use num_complex::Complex64;
use serde::Deserialize;

use crate::grid::FrequencyGrid;
use crate::linalg::{zeros, CMat};
use crate::physreal::{slh_to_statespace, SlhModel};
use crate::stabilization::{coprime_factorization_with_tol, gains_for, modify_plant, CoprimeFactorization, GainPair, GainPolicy, ModifiedPlant, PartitionSpec};
use crate::statespace::{FreqResponse, StateSpace};
use crate::synthesis::DescentConfig;
use crate::youla::{YoulaParameter, DEFAULT_BETA, DEFAULT_ORDER};

/// Rows of `[re, im]` pairs.
pub type MatrixText = Vec<Vec<[f64; 2]>>;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub plant: PlantSection,
    pub partition: Option<PartitionSection>,
    #[serde(default)]
    pub gains: GainsSection,
    #[serde(default)]
    pub weights: WeightsSection,
    #[serde(default)]
    pub youla: YoulaSection,
    #[serde(default)]
    pub descent: DescentSection,
    #[serde(default)]
    pub grid: GridSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantSection {
    pub slh: Option<SlhSection>,
    pub abcd: Option<AbcdSection>,
    /// How `abcd` is laid out; SLH plants are always doubled.
    #[serde(default)]
    pub layout: Layout,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layout {
    /// Doubled-up field ordering `(a, a#)`; the partition counts fields.
    #[default]
    Doubled,
    /// Already in `[r; u] -> [z; y]` order; the partition counts columns.
    Plain,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlhSection {
    pub n: Option<usize>,
    pub m: Option<usize>,
    pub s: MatrixText,
    pub h1: MatrixText,
    pub h2: MatrixText,
    pub l1: MatrixText,
    pub l2: MatrixText,
    pub f1: Option<MatrixText>,
    pub f2: Option<MatrixText>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbcdSection {
    pub a: MatrixText,
    pub b: MatrixText,
    pub c: MatrixText,
    pub d: MatrixText,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionSection {
    pub n_r: usize,
    pub n_u: usize,
    pub n_z: usize,
    pub n_y: usize,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyName {
    #[default]
    Reflect,
    Ladder,
    Zero,
    Poles,
    Matrices,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainsSection {
    #[serde(default)]
    pub policy: PolicyName,
    pub min_decay: Option<f64>,
    pub state: Option<Vec<[f64; 2]>>,
    pub observer: Option<Vec<[f64; 2]>>,
    pub f: Option<MatrixText>,
    pub l: Option<MatrixText>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum WeightSpec {
    Named(String),
    Lag(LagSection),
    Abcd(AbcdSection),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LagSection {
    pub gain: f64,
    pub pole: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsSection {
    pub w_in: WeightSpec,
    pub w_out: WeightSpec,
}

impl Default for WeightsSection {
    fn default() -> Self {
        Self { w_in: WeightSpec::Named("identity".into()), w_out: WeightSpec::Named("identity".into()) }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct YoulaSection {
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_order")]
    pub order: usize,
    pub q_init: Option<Vec<MatrixText>>,
    pub from_controller: Option<AbcdSection>,
}

fn default_beta() -> f64 {
    DEFAULT_BETA
}
fn default_order() -> usize {
    DEFAULT_ORDER
}

impl Default for YoulaSection {
    fn default() -> Self {
        Self { beta: DEFAULT_BETA, order: DEFAULT_ORDER, q_init: None, from_controller: None }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DescentSection {
    pub alpha0: Option<f64>,
    pub backtrack_ratio: Option<f64>,
    pub max_iters: Option<usize>,
    pub grad_tol: Option<f64>,
    pub constraint_tol: Option<f64>,
    pub correction_period: Option<usize>,
    pub precondition: Option<bool>,
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridKind {
    #[default]
    Log,
    SymmetricLog,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default)]
    pub kind: GridKind,
    #[serde(default = "default_wmin")]
    pub omega_min: f64,
    #[serde(default = "default_wmax")]
    pub omega_max: f64,
    #[serde(default = "default_points")]
    pub points: usize,
}

fn default_wmin() -> f64 {
    1e-3
}
fn default_wmax() -> f64 {
    1e3
}
fn default_points() -> usize {
    129
}

impl Default for GridSection {
    fn default() -> Self {
        Self { kind: GridKind::Log, omega_min: 1e-3, omega_max: 1e3, points: 129 }
    }
}

/// File holding a Youla parameter and optionally its controller, as written
/// by `synthesize-h2`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResultFile {
    pub youla: YoulaSection,
    pub controller: Option<AbcdSection>,
}

/// An input problem, reported with its location when possible.
#[derive(Debug)]
pub struct InputError(pub String);

impl std::fmt::Display for InputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<crate::Error> for InputError {
    fn from(e: crate::Error) -> Self {
        InputError(e.to_string())
    }
}

pub type InputResult<T> = std::result::Result<T, InputError>;

pub fn parse_problem(text: &str) -> InputResult<ProblemFile> {
    toml::from_str(text).map_err(|e| InputError(e.to_string()))
}

pub fn parse_result(text: &str) -> InputResult<ResultFile> {
    toml::from_str(text).map_err(|e| InputError(e.to_string()))
}

pub fn read_file(path: &std::path::Path) -> InputResult<String> {
    std::fs::read_to_string(path).map_err(|e| InputError(format!("{}: {e}", path.display())))
}

/// Matrix from its text form. An empty row list has `cols_hint` columns.
pub fn to_cmat(m: &MatrixText, what: &str, cols_hint: Option<usize>) -> InputResult<CMat> {
    let rows = m.len();
    let cols = match m.first() {
        Some(r) => r.len(),
        None => cols_hint.unwrap_or(0),
    };
    let mut out = zeros(rows, cols);
    for (i, row) in m.iter().enumerate() {
        if row.len() != cols {
            return Err(InputError(format!("{what}: row {} has {} entries, expected {cols}", i + 1, row.len())));
        }
        for (j, z) in row.iter().enumerate() {
            if !z[0].is_finite() || !z[1].is_finite() {
                return Err(InputError(format!("{what}: entry ({}, {}) is not finite", i + 1, j + 1)));
            }
            out[(i, j)] = Complex64::new(z[0], z[1]);
        }
    }
    Ok(out)
}

impl AbcdSection {
    pub fn to_statespace(&self, what: &str) -> InputResult<StateSpace> {
        let d = to_cmat(&self.d, &format!("{what}.d"), None)?;
        let a = to_cmat(&self.a, &format!("{what}.a"), Some(0))?;
        let n = a.nrows();
        let b = to_cmat(&self.b, &format!("{what}.b"), Some(d.ncols()))?;
        let c = to_cmat(&self.c, &format!("{what}.c"), Some(n))?;
        // `c = []` is allowed for a static system with outputs taken from `d`
        let c = if c.nrows() == 0 && n == 0 { zeros(d.nrows(), 0) } else { c };
        StateSpace::new(a, b, c, d).map_err(|e| InputError(format!("{what}: {e}")))
    }
}

impl SlhSection {
    /// `strict` also requires a unitary `S`.
    pub fn to_model(&self, strict: bool) -> InputResult<SlhModel> {
        let s = to_cmat(&self.s, "plant.slh.s", None)?;
        let h1 = to_cmat(&self.h1, "plant.slh.h1", None)?;
        let h2 = to_cmat(&self.h2, "plant.slh.h2", None)?;
        let l1 = to_cmat(&self.l1, "plant.slh.l1", None)?;
        let l2 = to_cmat(&self.l2, "plant.slh.l2", None)?;
        let f = match (&self.f1, &self.f2) {
            (Some(f1), Some(f2)) => Some((to_cmat(f1, "plant.slh.f1", None)?, to_cmat(f2, "plant.slh.f2", None)?)),
            (None, None) => None,
            _ => return Err(InputError("plant.slh: f1 and f2 must be given together".into())),
        };
        if let Some(n) = self.n {
            if n != h1.nrows() {
                return Err(InputError(format!("plant.slh: n = {n} but h1 is {}x{}", h1.nrows(), h1.ncols())));
            }
        }
        if let Some(m) = self.m {
            if m != s.nrows() {
                return Err(InputError(format!("plant.slh: m = {m} but s is {}x{}", s.nrows(), s.ncols())));
            }
        }
        let model = if strict { SlhModel::new(s, h1, h2, l1, l2, f) } else { SlhModel::new_candidate(s, h1, h2, l1, l2, f) };
        model.map_err(|e| InputError(format!("plant.slh: {e}")))
    }
}

impl PlantSection {
    pub fn to_statespace(&self, strict: bool) -> InputResult<StateSpace> {
        match (&self.slh, &self.abcd) {
            (Some(slh), None) => {
                if self.layout != Layout::Doubled {
                    return Err(InputError("plant: an slh plant is always in the doubled layout".into()));
                }
                Ok(slh_to_statespace(&slh.to_model(strict)?)?)
            }
            (None, Some(abcd)) => abcd.to_statespace("plant.abcd"),
            _ => Err(InputError("plant: give exactly one of [plant.slh] or [plant.abcd]".into())),
        }
    }

    /// Number of field channels `m` of the plant.
    pub fn n_fields(sys: &StateSpace) -> InputResult<usize> {
        if !sys.n_inputs().is_multiple_of(2) || sys.n_inputs() != sys.n_outputs() {
            return Err(InputError(format!(
                "plant: a {}x{} transfer matrix is not a square doubled-up system",
                sys.n_outputs(),
                sys.n_inputs()
            )));
        }
        Ok(sys.n_inputs() / 2)
    }
}

impl GridSection {
    pub fn build(&self, points_override: Option<usize>) -> InputResult<FrequencyGrid> {
        let points = points_override.unwrap_or(self.points);
        let g = match self.kind {
            GridKind::Log => FrequencyGrid::log(self.omega_min, self.omega_max, points),
            GridKind::SymmetricLog => FrequencyGrid::symmetric_log(self.omega_min, self.omega_max, points, true),
        };
        g.map_err(|e| InputError(format!("grid: {e}")))
    }
}

impl DescentSection {
    pub fn build(&self) -> InputResult<DescentConfig> {
        let d = DescentConfig::default();
        let cfg = DescentConfig {
            alpha0: self.alpha0.unwrap_or(d.alpha0),
            backtrack_ratio: self.backtrack_ratio.unwrap_or(d.backtrack_ratio),
            max_iters: self.max_iters.unwrap_or(d.max_iters),
            grad_tol: self.grad_tol.unwrap_or(d.grad_tol),
            constraint_tol: self.constraint_tol.unwrap_or(d.constraint_tol),
            correction_period: self.correction_period.unwrap_or(d.correction_period),
            precondition: self.precondition.unwrap_or(d.precondition),
        };
        cfg.validate().map_err(|e| InputError(format!("descent: {e}")))?;
        Ok(cfg)
    }
}

fn complex_list(v: &[[f64; 2]]) -> Vec<Complex64> {
    v.iter().map(|z| Complex64::new(z[0], z[1])).collect()
}

impl GainsSection {
    /// Either a policy to run, or explicit gain matrices.
    pub fn build(&self) -> InputResult<GainChoice> {
        let unused = |name: &str, present: bool| {
            if present {
                Err(InputError(format!("gains: `{name}` is not used by this policy")))
            } else {
                Ok(())
            }
        };
        match self.policy {
            PolicyName::Reflect => {
                unused("state", self.state.is_some())?;
                unused("f", self.f.is_some() || self.l.is_some())?;
                Ok(GainChoice::Policy(GainPolicy::ReflectUnstable { min_decay: self.min_decay.unwrap_or(1.0) }))
            }
            PolicyName::Ladder | PolicyName::Zero => {
                unused("min_decay", self.min_decay.is_some())?;
                unused("state", self.state.is_some() || self.observer.is_some())?;
                unused("f", self.f.is_some() || self.l.is_some())?;
                Ok(GainChoice::Policy(if matches!(self.policy, PolicyName::Ladder) { GainPolicy::Ladder } else { GainPolicy::Zero }))
            }
            PolicyName::Poles => match (&self.state, &self.observer) {
                (Some(s), Some(o)) => Ok(GainChoice::Policy(GainPolicy::Explicit { state: complex_list(s), observer: complex_list(o) })),
                _ => Err(InputError("gains: policy \"poles\" needs `state` and `observer`".into())),
            },
            PolicyName::Matrices => match (&self.f, &self.l) {
                (Some(f), Some(l)) => Ok(GainChoice::Matrices(GainPair { f: to_cmat(f, "gains.f", None)?, l: to_cmat(l, "gains.l", None)? })),
                _ => Err(InputError("gains: policy \"matrices\" needs `f` and `l`".into())),
            },
        }
    }
}

#[derive(Debug, Clone)]
pub enum GainChoice {
    Policy(GainPolicy),
    Matrices(GainPair),
}

impl WeightSpec {
    pub fn build(&self, width: usize, what: &str) -> InputResult<StateSpace> {
        let sys = match self {
            WeightSpec::Named(n) if n == "identity" => StateSpace::identity(width),
            WeightSpec::Named(n) => return Err(InputError(format!("{what}: unknown weight `{n}`"))),
            WeightSpec::Lag(l) => StateSpace::first_order_lag(width, l.gain, l.pole),
            WeightSpec::Abcd(s) => s.to_statespace(what)?,
        };
        if sys.n_inputs() != width || sys.n_outputs() != width {
            return Err(InputError(format!("{what}: expected {width}x{width}, got {}x{}", sys.n_outputs(), sys.n_inputs())));
        }
        Ok(sys)
    }
}

impl YoulaSection {
    /// Initial parameter: explicit coefficients, a controller to convert, or
    /// zero.
    pub fn initial(&self, cf: Option<&CoprimeFactorization>, rows: usize, cols: usize) -> crate::Result<YoulaParameter> {
        match (&self.q_init, &self.from_controller) {
            (Some(_), Some(_)) => Err(crate::Error::InvalidConfig("youla: give q_init or from_controller, not both".into())),
            (Some(qs), None) => {
                if qs.len() > self.order + 1 {
                    return Err(crate::Error::InvalidConfig(format!("youla: {} coefficients for order {}", qs.len(), self.order)));
                }
                let mut coeffs = Vec::with_capacity(self.order + 1);
                for (k, q) in qs.iter().enumerate() {
                    let m = to_cmat(q, &format!("youla.q_init[{k}]"), Some(cols)).map_err(|e| crate::Error::InvalidConfig(e.0))?;
                    coeffs.push(m);
                }
                coeffs.resize(self.order + 1, zeros(rows, cols));
                YoulaParameter::new(self.beta, coeffs)
            }
            (None, Some(k)) => {
                let cf = cf.ok_or_else(|| crate::Error::InvalidConfig("youla.from_controller needs a plant".into()))?;
                let k = k.to_statespace("youla.from_controller").map_err(|e| crate::Error::InvalidConfig(e.0))?;
                YoulaParameter::from_controller(cf, &k, self.beta, self.order)
            }
            (None, None) => YoulaParameter::zeros(self.beta, self.order, rows, cols),
        }
    }
}

/// Plant data resolved from a problem file.
#[derive(Debug, Clone)]
pub struct LoadedPlant {
    pub raw: StateSpace,
    pub plant: ModifiedPlant,
}

impl ProblemFile {
    pub fn raw_plant(&self) -> InputResult<StateSpace> {
        self.plant.to_statespace(true)
    }

    /// Plant for a realizability check: SLH data with a non-unitary `S` is
    /// accepted so that the check can report it.
    pub fn candidate_plant(&self) -> InputResult<StateSpace> {
        self.plant.to_statespace(false)
    }

    pub fn modified_plant(&self) -> InputResult<LoadedPlant> {
        let raw = self.raw_plant()?;
        let p = self.partition.ok_or_else(|| InputError("missing [partition] section".into()))?;
        let spec = PartitionSpec::new(p.n_r, p.n_u, p.n_z, p.n_y).map_err(|e| InputError(format!("partition: {e}")))?;
        let plant = match self.plant.layout {
            Layout::Doubled => modify_plant(&raw, spec),
            Layout::Plain => ModifiedPlant::from_full(raw.clone(), spec),
        }
        .map_err(|e| InputError(format!("partition: {e}")))?;
        Ok(LoadedPlant { raw, plant })
    }
}

/// Gains for `mp` from the file's choice. PBH and placement failures are
/// domain errors, not input errors.
pub fn resolve_gains(choice: &GainChoice, mp: &ModifiedPlant) -> crate::Result<GainPair> {
    match choice {
        GainChoice::Policy(p) => gains_for(mp, p),
        GainChoice::Matrices(g) => Ok(g.clone()),
    }
}

/// Factors without a residual gate; callers judge `bezout_residual`.
pub fn factorize(choice: &GainChoice, mp: &ModifiedPlant) -> crate::Result<CoprimeFactorization> {
    let gains = resolve_gains(choice, mp)?;
    coprime_factorization_with_tol(mp, &gains, f64::INFINITY)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn short_complex_entry_names_line() {
        let text = "[plant.abcd]\na = []\nb = []\nc = []\nd = [[[1]]]\n";
        let err = parse_problem(text).unwrap_err().0;
        assert!(err.contains("line 5"), "{err}");
    }

    #[test]
    fn unknown_key_rejected() {
        let text = "[plant.abcd]\na = []\nb = []\nc = []\nd = [[[1, 0]]]\nextra = 1\n";
        assert!(parse_problem(text).is_err());
    }

    #[test]
    fn static_abcd() {
        let text = "[plant.abcd]\na = []\nb = []\nc = []\nd = [[[1, 0], [0, 2]]]\n";
        let p = parse_problem(text).unwrap();
        let s = p.raw_plant().unwrap();
        assert_eq!((s.n_outputs(), s.n_inputs(), s.n_states()), (1, 2, 0));
    }
}
