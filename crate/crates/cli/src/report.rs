//! Report documents emitted by every subcommand.

use linflow::flag::FlowClassification;
use linflow::floquet::IntegrationStats;
use linflow::io::rows_of;
use linflow::jordan::{AdditiveJordan, Certificate, LinearFlow, MultiplicativeJordan, TimeKind};
use linflow::linalg::SpectralData;
use linflow::TolerancePolicy;
use serde::{Deserialize, Serialize};

pub const SCHEMA: &str = "jf-schema-1";

pub type Rows = Vec<Vec<f64>>;

/// Envelope shared by all commands; `result` is command specific.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Report<I, R> {
    pub schema: String,
    pub command: String,
    pub input: InputEcho<I>,
    pub tolerances: TolerancePolicy,
    pub result: R,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputEcho<I> {
    /// SHA-256 of the raw input bytes.
    pub sha256: String,
    pub content: I,
}

impl<I, R> Report<I, R> {
    pub fn new(
        command: &str,
        input: InputEcho<I>,
        tolerances: TolerancePolicy,
        result: R,
        warnings: Vec<String>,
    ) -> Self {
        Self {
            schema: SCHEMA.into(),
            command: command.into(),
            input,
            tolerances,
            result,
            warnings,
        }
    }
}

/// `None` for infinite or undefined margins.
pub fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EigenvalueEntry {
    pub re: f64,
    pub im: f64,
    pub multiplicity: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumSummary {
    /// Clusters, conjugate pairs listed once with `im > 0`.
    pub clusters: Vec<EigenvalueEntry>,
    pub separation_margin: Option<f64>,
    pub projection_condition: f64,
}

impl SpectrumSummary {
    pub fn from_spectrum(s: &SpectralData) -> Self {
        Self {
            clusters: s
                .clusters
                .iter()
                .map(|c| EigenvalueEntry {
                    re: c.eigenvalue.0,
                    im: c.eigenvalue.1,
                    multiplicity: c.multiplicity,
                })
                .collect(),
            separation_margin: finite(s.separation_margin),
            projection_condition: s.projection_condition,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Factors {
    Additive {
        #[serde(rename = "E")]
        e: Rows,
        #[serde(rename = "H")]
        h: Rows,
        #[serde(rename = "N")]
        n: Rows,
        certificate: Certificate,
    },
    Multiplicative {
        e: Rows,
        h: Rows,
        u: Rows,
        log_h: Rows,
        log_u: Rows,
        certificate: Certificate,
    },
}

impl Factors {
    pub fn additive(d: &AdditiveJordan) -> Self {
        Self::Additive {
            e: rows_of(&d.e),
            h: rows_of(&d.h),
            n: rows_of(&d.n),
            certificate: d.certificate,
        }
    }

    pub fn multiplicative(d: &MultiplicativeJordan) -> Self {
        Self::Multiplicative {
            e: rows_of(&d.e),
            h: rows_of(&d.h),
            u: rows_of(&d.u),
            log_h: rows_of(&d.log_h),
            log_u: rows_of(&d.log_u),
            certificate: d.certificate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateEntry {
    pub rate: f64,
    pub dim: usize,
}

pub fn rate_entries(flow: &LinearFlow) -> Vec<RateEntry> {
    flow.rates
        .iter()
        .map(|r| RateEntry {
            rate: r.rate,
            dim: r.dim,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecomposeResult {
    pub time: TimeKind,
    pub spectrum: SpectrumSummary,
    pub factors: Factors,
    pub rates: Vec<RateEntry>,
}

/// One row of the Morse component table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentRow {
    pub index: usize,
    /// `assignment[i][j]`: dimensions of rate cluster `j` in increment `i`.
    pub assignment: Vec<Vec<usize>>,
    pub dim: usize,
    /// `n_w`.
    pub unstable_dim: usize,
    pub stable_dim: usize,
    pub attractor: bool,
    pub repeller: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassificationSummary {
    pub flag_dims: Vec<usize>,
    pub manifold_dim: usize,
    pub h_regular: bool,
    pub conformal: bool,
    pub structurally_stable: bool,
    /// `log10` margin of the regularity (and stability) verdict.
    pub rate_margin: f64,
    /// `log10` margin of the conformality verdict.
    pub conformal_margin: f64,
    pub attractor_index: usize,
    pub repeller_index: usize,
    pub components: Vec<ComponentRow>,
}

impl ClassificationSummary {
    pub fn new(cls: &FlowClassification, flag_dims: &[usize], manifold_dim: usize) -> Self {
        Self {
            flag_dims: flag_dims.to_vec(),
            manifold_dim,
            h_regular: cls.h_regular,
            conformal: cls.conformal,
            structurally_stable: cls.structurally_stable,
            rate_margin: cls.rate_margin,
            conformal_margin: cls.conformal_margin,
            attractor_index: cls.attractor_index,
            repeller_index: cls.repeller_index,
            components: cls
                .components
                .iter()
                .enumerate()
                .map(|(index, c)| ComponentRow {
                    index,
                    assignment: c.assignment.clone(),
                    dim: c.dim,
                    unstable_dim: c.unstable_dim,
                    stable_dim: c.stable_dim,
                    attractor: index == cls.attractor_index,
                    repeller: index == cls.repeller_index,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSummary {
    pub starts: usize,
    pub seed: u64,
    /// Simulated time in each direction.
    pub horizon: f64,
    pub forward_matches: usize,
    pub backward_matches: usize,
    /// Largest distance from a simulated endpoint to its nearest component.
    pub worst_distance: f64,
    /// Smallest `log10` rank margin met while predicting cells.
    pub min_cell_margin: Option<f64>,
}

impl SimulationSummary {
    pub fn passed(&self) -> bool {
        self.forward_matches == self.starts && self.backward_matches == self.starts
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeResult {
    pub time: TimeKind,
    pub factors: Factors,
    pub rates: Vec<RateEntry>,
    pub classification: ClassificationSummary,
    pub simulation: Option<SimulationSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainOracleSummary {
    pub n: usize,
    pub resolution: usize,
    pub eps: f64,
    pub min_time: f64,
    pub covering_radius: f64,
    pub edges: usize,
    pub cyclic_components: usize,
    pub marked_count: usize,
    pub predicted_count: usize,
    /// Fraction of grid points where marking and prediction agree.
    pub agreement: f64,
    /// Unit representatives of the marked grid points.
    pub marked_points: Rows,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FloquetResult {
    pub period: f64,
    pub integration: IntegrationStats,
    pub monodromy: Rows,
    pub m: u32,
    /// `mT`, the period of `a(t)`.
    pub factor_period: f64,
    pub generator: Rows,
    pub factors: Factors,
    pub rates: Vec<RateEntry>,
    /// `|g(T)^m - exp(mTX)| / max(1, |g(T)^m|)`.
    pub log_residual: f64,
    /// `sup |g(t) - a(t) exp(tX)|` over `reconstruction_samples` times in `[0, 3mT]`.
    pub reconstruction_residual: f64,
    pub reconstruction_samples: usize,
    pub classification: ClassificationSummary,
}
