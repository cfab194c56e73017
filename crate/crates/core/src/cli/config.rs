//! TOML run configuration.

use serde::{Deserialize, Serialize};

use crate::interface1d::{MassProfile, StencilOrder};
use crate::ribbon::{PerturbationKind, Rect, RibbonGrid};
use crate::symbol::{identity_flat, DiracBlock, DiracModel, MassSpec, Side};

/// Only this configuration version is understood.
pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    pub model: Option<ModelConfig>,
    #[serde(default)]
    pub bulk: BulkConfig,
    pub interface: Option<InterfaceConfig>,
    pub flow: Option<FlowConfig>,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default)]
    pub clifford: CliffordConfig,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        let value: toml::Table = text.parse().map_err(|e: toml::de::Error| e.to_string())?;
        match value.get("version") {
            None => return Err("missing mandatory field `version`".into()),
            Some(toml::Value::Integer(v)) if *v == CONFIG_VERSION as i64 => {}
            Some(v) => return Err(format!("unsupported config version {v}; expected {CONFIG_VERSION}")),
        }
        toml::from_str(text).map_err(|e| e.to_string())
    }

    /// Configuration used when no file is given.
    pub fn empty() -> Self {
        RunConfig {
            version: CONFIG_VERSION,
            model: None,
            bulk: BulkConfig::default(),
            interface: None,
            flow: None,
            verify: VerifyConfig::default(),
            clifford: CliffordConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub d: usize,
    #[serde(default)]
    pub eta: f64,
    pub blocks: Vec<BlockConfig>,
}

/// One block: cone matrix `a` (row-major, identity when omitted) and either
/// a constant mass `m` or the wall asymptotes `m_minus`, `m_plus`.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct BlockConfig {
    pub a: Option<Vec<f64>>,
    pub m: Option<f64>,
    pub m_minus: Option<f64>,
    pub m_plus: Option<f64>,
}

impl ModelConfig {
    pub fn build(&self) -> crate::Result<DiracModel> {
        let mut blocks = Vec::with_capacity(self.blocks.len());
        for (i, b) in self.blocks.iter().enumerate() {
            let mass = match (b.m, b.m_minus, b.m_plus) {
                (Some(m), None, None) => MassSpec::Constant(m),
                (None, Some(minus), Some(plus)) => MassSpec::Wall { minus, plus },
                _ => {
                    return Err(crate::Error::InvalidParameter(format!(
                        "block {i}: give either m or both m_minus and m_plus"
                    )))
                }
            };
            let a = b.a.clone().unwrap_or_else(|| identity_flat(self.d));
            blocks.push(DiracBlock::with_mass(self.d, a, mass, self.eta)?);
        }
        DiracModel::new(blocks)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BulkMethod {
    #[default]
    All,
    ClosedForm,
    Curvature,
    Degree,
    Winding,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct BulkConfig {
    #[serde(default)]
    pub method: BulkMethod,
    /// Which asymptote of wall blocks to evaluate.
    #[serde(default = "bulk_side")]
    pub side: Side,
    #[serde(default = "bulk_tol")]
    pub tol: f64,
}

fn bulk_side() -> Side {
    Side::Bulk
}

fn bulk_tol() -> f64 {
    1e-8
}

impl Default for BulkConfig {
    fn default() -> Self {
        BulkConfig { method: BulkMethod::All, side: Side::Bulk, tol: bulk_tol() }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct InterfaceConfig {
    pub profile: MassProfile,
    #[serde(default)]
    pub eta: f64,
    #[serde(default = "one")]
    pub ax: f64,
    #[serde(default = "one")]
    pub ay: f64,
    /// Grid spacing; the extent follows from the profile.
    #[serde(default = "interface_h")]
    pub h: f64,
    #[serde(default = "interface_samples")]
    pub samples: usize,
    /// Half-width of the spectral switch; must stay below the gap bound.
    pub delta: Option<f64>,
    #[serde(default)]
    pub order: StencilOrder,
}

fn one() -> f64 {
    1.0
}

fn interface_h() -> f64 {
    1.0 / 32.0
}

fn interface_samples() -> usize {
    41
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationConfig {
    pub kind: PerturbationKind,
    pub amplitude: f64,
    /// Defaults to x ∈ [−1, 1] over the whole circle.
    pub support: Option<Rect>,
    #[serde(default = "correlation_length")]
    pub correlation_length: f64,
}

fn correlation_length() -> f64 {
    0.5
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct FlowConfig {
    /// One profile per model block, with the block's asymptotes.
    pub profiles: Vec<MassProfile>,
    #[serde(default = "e_star")]
    pub e_star: f64,
    #[serde(default = "theta_steps")]
    pub theta_steps: usize,
    /// Half-width of the tracked window around `e_star`; defaults to m₀/2.
    pub window: Option<f64>,
    /// More levels than this in the window is reported as a closed gap.
    #[serde(default = "max_window_states")]
    pub max_window_states: usize,
    pub grid: Option<RibbonGrid>,
    pub perturbation: Option<PerturbationConfig>,
    /// Number of consecutive seeds starting at the base seed.
    #[serde(default = "seeds")]
    pub seeds: usize,
    #[serde(default)]
    pub seed: u64,
}

fn e_star() -> f64 {
    0.3
}

fn theta_steps() -> usize {
    32
}

fn max_window_states() -> usize {
    64
}

fn seeds() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Identities,
    Calculus,
    Clifford,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    #[serde(default = "suites")]
    pub suites: Vec<Suite>,
    /// Pairs (y₁, y₂) for the planar identities.
    #[serde(default = "planar_pairs")]
    pub planar_pairs: Vec<[[f64; 2]; 2]>,
    #[serde(default = "cutoff")]
    pub cutoff: f64,
    /// Point sets y₀..y₃ for the three-dimensional identity.
    #[serde(default = "odd_configs")]
    pub odd_configs: Vec<[[f64; 3]; 4]>,
    #[serde(default = "mc_samples")]
    pub mc_samples: usize,
    #[serde(default = "hs_matrices")]
    pub hs_matrices: usize,
    #[serde(default = "hs_dim")]
    pub hs_dim: usize,
    #[serde(default = "hs_order")]
    pub hs_order: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "verify_tol")]
    pub tol: f64,
}

fn suites() -> Vec<Suite> {
    vec![Suite::Identities, Suite::Calculus, Suite::Clifford]
}

fn planar_pairs() -> Vec<[[f64; 2]; 2]> {
    vec![[[1.0, 0.0], [0.0, 1.0]], [[0.7, -0.2], [0.3, 1.1]]]
}

fn cutoff() -> f64 {
    200.0
}

fn odd_configs() -> Vec<[[f64; 3]; 4]> {
    vec![[[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]]
}

fn mc_samples() -> usize {
    2_000_000
}

fn hs_matrices() -> usize {
    3
}

fn hs_dim() -> usize {
    8
}

fn hs_order() -> usize {
    3
}

fn verify_tol() -> f64 {
    1e-6
}

impl Default for VerifyConfig {
    fn default() -> Self {
        toml::from_str("").expect("defaults deserialize")
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct CliffordConfig {
    #[serde(default = "clifford_dims")]
    pub dims: Vec<usize>,
    /// Include the matrices themselves as [re, im] pairs.
    #[serde(default)]
    pub emit_matrices: bool,
}

fn clifford_dims() -> Vec<usize> {
    (1..=8).collect()
}

impl Default for CliffordConfig {
    fn default() -> Self {
        CliffordConfig { dims: clifford_dims(), emit_matrices: false }
    }
}
