//! The four analyses behind the subcommands, from input text to report.

use linflow::flag::{
    bruhat_cell, classify_flow, enumerate_morse_components, nearest_component, simulate_flag,
    unstable_cell, Flag, FlagType,
};
use linflow::floquet::{integrate_fundamental, reconstruction_residual, FloquetData};
use linflow::io::{parse_json, rows_of, MatrixFile, PeriodicFile};
use linflow::jordan::{additive_jordan, multiplicative_jordan, LinearFlow, TimeKind};
use linflow::linalg::Mat;
use linflow::projective::{chain_oracle, time_grid};
use linflow::sampling::seeded;
use linflow::{Error, Result, TolerancePolicy};
use sha2::{Digest, Sha256};

use crate::report::*;

/// Margins (in decades) below this are flagged in the warnings.
const MARGIN_WARNING: f64 = 1.0;
const RECONSTRUCTION_SAMPLES: usize = 64;
const MAX_HORIZON: f64 = 1e4;
/// Extra decades of contraction beyond `sim_tol` allowed for constants and
/// polynomial factors.
const HORIZON_SLACK: f64 = 10.0;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn read_matrix(text: &str) -> Result<(MatrixFile, Mat)> {
    let file: MatrixFile = parse_json(text)?;
    let m = file.to_mat()?;
    Ok((file, m))
}

fn flow_of(m: &Mat, time: TimeKind, pol: &TolerancePolicy) -> Result<LinearFlow> {
    match time {
        TimeKind::Continuous => LinearFlow::continuous(m, pol),
        TimeKind::Discrete => LinearFlow::discrete(m, pol),
    }
}

fn factors_of(m: &Mat, time: TimeKind, pol: &TolerancePolicy) -> Result<Factors> {
    Ok(match time {
        TimeKind::Continuous => Factors::additive(&additive_jordan(m, pol)?),
        TimeKind::Discrete => Factors::multiplicative(&multiplicative_jordan(m, pol)?),
    })
}

fn spectrum_warnings(flow: &LinearFlow, out: &mut Vec<String>) {
    let s = &flow.spectrum;
    if s.separation_margin.is_finite() && s.separation_margin < 10f64.powf(MARGIN_WARNING) {
        out.push(format!(
            "eigenvalue clusters are only {:.3} merge thresholds apart",
            s.separation_margin
        ));
    }
    if s.projection_condition > 1e6 {
        out.push(format!(
            "spectral projections are ill conditioned (norm {:.3e})",
            s.projection_condition
        ));
    }
}

fn classification_warnings(c: &ClassificationSummary, out: &mut Vec<String>) {
    if c.rate_margin.abs() < MARGIN_WARNING {
        out.push(format!(
            "regularity verdict has a margin of {:.3} decades",
            c.rate_margin
        ));
    }
    if c.conformal_margin.abs() < MARGIN_WARNING {
        out.push(format!(
            "conformality verdict has a margin of {:.3} decades",
            c.conformal_margin
        ));
    }
}

pub type DecomposeReport = Report<MatrixFile, DecomposeResult>;

pub fn decompose(text: &str, time: TimeKind, pol: &TolerancePolicy) -> Result<DecomposeReport> {
    pol.validate()?;
    let (file, m) = read_matrix(text)?;
    let flow = flow_of(&m, time, pol)?;
    let mut warnings = Vec::new();
    spectrum_warnings(&flow, &mut warnings);
    let result = DecomposeResult {
        time,
        spectrum: SpectrumSummary::from_spectrum(&flow.spectrum),
        factors: factors_of(&m, time, pol)?,
        rates: rate_entries(&flow),
    };
    let input = InputEcho {
        sha256: sha256_hex(text.as_bytes()),
        content: file,
    };
    Ok(Report::new("decompose", input, *pol, result, warnings))
}

pub struct AnalyzeOptions {
    pub time: TimeKind,
    pub flag_dims: Vec<usize>,
    pub simulate: usize,
    pub seed: u64,
    /// Samples per direction recorded for the trajectory table; 0 skips it.
    pub trajectory_samples: usize,
}

/// One sample of a simulated flag trajectory.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct TrajectoryRow {
    pub start: usize,
    pub time: f64,
    pub nearest: usize,
    pub distance: f64,
    /// Basis entries in row-major order.
    pub basis: Vec<f64>,
}

pub type AnalyzeReport = Report<MatrixFile, AnalyzeResult>;

/// Horizon after which trajectories are within `sim_tol` of their limit
/// component, from the smallest gap between distinct rates.
fn horizon(flow: &LinearFlow, time: TimeKind) -> f64 {
    let gap = flow
        .rate_values()
        .windows(2)
        .map(|w| w[0] - w[1])
        .fold(f64::INFINITY, f64::min);
    let t = if gap.is_finite() {
        ((-flow.policy.sim_tol.log10() + HORIZON_SLACK) * std::f64::consts::LN_10 / gap)
            .min(MAX_HORIZON)
    } else {
        1.0
    };
    match time {
        TimeKind::Continuous => t,
        TimeKind::Discrete => t.ceil(),
    }
}

pub fn analyze(
    text: &str,
    opts: &AnalyzeOptions,
    pol: &TolerancePolicy,
) -> Result<(AnalyzeReport, Vec<TrajectoryRow>)> {
    pol.validate()?;
    let (file, m) = read_matrix(text)?;
    let flow = flow_of(&m, opts.time, pol)?;
    let ft = FlagType::new(flow.dim(), opts.flag_dims.clone())?;
    let cls = classify_flow(&flow, &ft)?;
    let classification = ClassificationSummary::new(&cls, ft.dims(), ft.manifold_dim());
    let mut warnings = Vec::new();
    spectrum_warnings(&flow, &mut warnings);
    classification_warnings(&classification, &mut warnings);

    let mut trajectory = Vec::new();
    let simulation = if opts.simulate > 0 {
        let comps = enumerate_morse_components(&flow.rate_values(), &flow.multiplicities(), &ft);
        let t_end = horizon(&flow, opts.time);
        let steps = opts.trajectory_samples.max(1);
        let grid = |sign: f64| -> Vec<f64> {
            let g = time_grid(sign * t_end, steps);
            match opts.time {
                TimeKind::Continuous => g,
                TimeKind::Discrete => {
                    let mut g: Vec<f64> = g.into_iter().map(f64::round).collect();
                    g.dedup();
                    g
                }
            }
        };
        let (forward, backward) = (grid(1.0), grid(-1.0));
        let mut rng = seeded(opts.seed);
        let mut summary = SimulationSummary {
            starts: opts.simulate,
            seed: opts.seed,
            horizon: t_end,
            forward_matches: 0,
            backward_matches: 0,
            worst_distance: 0.0,
            min_cell_margin: None,
        };
        let mut min_margin = f64::INFINITY;
        for start in 0..opts.simulate {
            let f = Flag::random(&ft, &mut rng);
            for (times, reverse) in [(&forward, false), (&backward, true)] {
                let cell = if reverse {
                    unstable_cell(&f, &flow, &comps)?
                } else {
                    bruhat_cell(&f, &flow, &comps)?
                };
                min_margin = min_margin.min(cell.margin);
                let path = simulate_flag(&flow, &f, times)?;
                let (k, d) = nearest_component(path.last().unwrap(), &comps, &flow);
                summary.worst_distance = summary.worst_distance.max(d);
                if k == cell.index && d <= pol.sim_tol {
                    if reverse {
                        summary.backward_matches += 1;
                    } else {
                        summary.forward_matches += 1;
                    }
                }
                if opts.trajectory_samples > 0 {
                    for (x, &t) in path.iter().zip(times.iter()) {
                        if reverse && t == 0.0 {
                            continue;
                        }
                        let (nearest, distance) = nearest_component(x, &comps, &flow);
                        trajectory.push(TrajectoryRow {
                            start,
                            time: t,
                            nearest,
                            distance,
                            basis: rows_of(x.basis()).concat(),
                        });
                    }
                }
            }
        }
        summary.min_cell_margin = finite(min_margin);
        if min_margin < MARGIN_WARNING {
            warnings.push(format!(
                "a cell prediction had a rank margin of {min_margin:.3} decades"
            ));
        }
        Some(summary)
    } else {
        None
    };
    trajectory.sort_by(|a, b| a.start.cmp(&b.start).then(a.time.total_cmp(&b.time)));

    let result = AnalyzeResult {
        time: opts.time,
        factors: factors_of(&m, opts.time, pol)?,
        rates: rate_entries(&flow),
        classification,
        simulation,
    };
    let input = InputEcho {
        sha256: sha256_hex(text.as_bytes()),
        content: file,
    };
    Ok((
        Report::new("analyze", input, *pol, result, warnings),
        trajectory,
    ))
}

pub struct ChainOptions {
    pub time: TimeKind,
    pub resolution: usize,
    pub eps: f64,
    pub min_time: f64,
}

pub type ChainReport = Report<MatrixFile, ChainOracleSummary>;

pub fn chain(text: &str, opts: &ChainOptions, pol: &TolerancePolicy) -> Result<ChainReport> {
    pol.validate()?;
    let (file, m) = read_matrix(text)?;
    if m.nrows() > 3 {
        return Err(Error::UnsupportedDimension(m.nrows()));
    }
    let flow = flow_of(&m, opts.time, pol)?;
    let res = chain_oracle(&flow, opts.resolution, opts.eps, opts.min_time)?;
    let marked_points = res
        .graph
        .grid
        .iter()
        .zip(&res.marked)
        .filter(|(_, &mk)| mk)
        .map(|(p, _)| p.rep().iter().copied().collect())
        .collect();
    let mut warnings = Vec::new();
    spectrum_warnings(&flow, &mut warnings);
    if opts.eps <= res.graph.covering_radius {
        warnings.push(format!(
            "eps {} does not exceed the grid covering radius {:.3e}",
            opts.eps, res.graph.covering_radius
        ));
    }
    let result = ChainOracleSummary {
        n: flow.dim(),
        resolution: opts.resolution,
        eps: opts.eps,
        min_time: opts.min_time,
        covering_radius: res.graph.covering_radius,
        edges: res.graph.edges.len(),
        cyclic_components: res.cyclic_components,
        marked_count: res.marked.iter().filter(|&&b| b).count(),
        predicted_count: res.predicted.iter().filter(|&&b| b).count(),
        agreement: res.agreement,
        marked_points,
    };
    let input = InputEcho {
        sha256: sha256_hex(text.as_bytes()),
        content: file,
    };
    Ok(Report::new("chain-oracle", input, *pol, result, warnings))
}

pub struct FloquetOptions {
    pub steps: usize,
    pub flag_dims: Vec<usize>,
}

pub type FloquetReport = Report<PeriodicFile, FloquetResult>;

pub fn floquet(text: &str, opts: &FloquetOptions, pol: &TolerancePolicy) -> Result<FloquetReport> {
    pol.validate()?;
    let file: PeriodicFile = parse_json(text)?;
    let coef = file.to_coefficient(pol)?;
    let ft = FlagType::new(coef.dim(), opts.flag_dims.clone())?;
    let fund = integrate_fundamental(&coef, opts.steps)?;
    let fd = FloquetData::new(&fund, pol)?;
    let cls = classify_flow(&fd.flow, &ft)?;
    let classification = ClassificationSummary::new(&cls, ft.dims(), ft.manifold_dim());
    let residual = reconstruction_residual(&fd, 3.0 * fd.factor_period(), RECONSTRUCTION_SAMPLES)?;

    let mut warnings = Vec::new();
    spectrum_warnings(&fd.flow, &mut warnings);
    classification_warnings(&classification, &mut warnings);
    let stats = *fund.stats();
    if stats.det_drift > 1e-10 {
        warnings.push(format!(
            "determinant drift {:.3e} was renormalized away",
            stats.det_drift
        ));
    }
    if residual > pol.sim_tol {
        warnings.push(format!(
            "reconstruction residual {residual:.3e} exceeds sim_tol"
        ));
    }
    let result = FloquetResult {
        period: coef.period(),
        integration: stats,
        monodromy: rows_of(&fd.monodromy),
        m: fd.m,
        factor_period: fd.factor_period(),
        generator: rows_of(&fd.generator),
        factors: Factors::additive(&fd.jordan),
        rates: rate_entries(&fd.flow),
        log_residual: fd.log_residual,
        reconstruction_residual: residual,
        reconstruction_samples: RECONSTRUCTION_SAMPLES,
        classification,
    };
    let input = InputEcho {
        sha256: sha256_hex(text.as_bytes()),
        content: file,
    };
    Ok(Report::new("floquet", input, *pol, result, warnings))
}

/// Process exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parse(_)
        | Error::InvalidInput(_)
        | Error::UnsupportedDimension(_)
        | Error::NonIntegerTime(_) => 2,
        Error::IllConditioned(_) | Error::RankAmbiguous { .. } => 3,
        Error::GridTooLarge(_) => 5,
        Error::NoRealLog { .. } => 6,
        _ => 1,
    }
}

pub const EXIT_SIMULATION_MISMATCH: i32 = 4;
