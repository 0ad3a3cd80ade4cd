use nalgebra::DVector;
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{distance_to_subspace, projective_distance, ProjectivePoint};
use crate::error::{Error, Result};
use crate::jordan::LinearFlow;
use crate::sampling::{seeded, unit_vector};

pub const MAX_GRID_POINTS: usize = 20_000;

const COVERING_SAMPLES: usize = 4096;
const COVERING_SEED: u64 = 0x5eed_c0de;

/// Finite sample of the projective space with the `(eps, T)` jump relation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainGraph {
    pub grid: Vec<ProjectivePoint>,
    pub eps: f64,
    pub min_time: f64,
    /// Largest distance from the space to the grid (exact on the line,
    /// sampled on the plane).
    pub covering_radius: f64,
    /// `(x, y)` with `d(g^T x, y) < eps`, sorted.
    pub edges: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainOracleResult {
    pub graph: ChainGraph,
    /// Grid points lying in a strongly connected component with a cycle.
    pub marked: Vec<bool>,
    /// Grid points within the covering radius of a rate eigenspace.
    pub predicted: Vec<bool>,
    pub agreement: f64,
    pub cyclic_components: usize,
}

/// Uniform angles on the projective line; on the projective plane the
/// upper half of a Fibonacci sphere with `2 * resolution` points.
pub fn projective_grid(n: usize, resolution: usize) -> Result<Vec<ProjectivePoint>> {
    if resolution > MAX_GRID_POINTS {
        return Err(Error::GridTooLarge(resolution));
    }
    if resolution < 2 {
        return Err(Error::InvalidInput(
            "grid resolution must be at least 2".into(),
        ));
    }
    match n {
        2 => Ok((0..resolution)
            .map(|k| {
                let th = std::f64::consts::PI * k as f64 / resolution as f64;
                ProjectivePoint::new(DVector::from_vec(vec![th.cos(), th.sin()])).unwrap()
            })
            .collect()),
        3 => {
            let total = 2 * resolution;
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            Ok((0..resolution)
                .map(|i| {
                    let z = 1.0 - (2 * i + 1) as f64 / total as f64;
                    let r = (1.0 - z * z).sqrt();
                    let phi = golden * i as f64;
                    ProjectivePoint::new(DVector::from_vec(vec![r * phi.cos(), r * phi.sin(), z]))
                        .unwrap()
                })
                .collect())
        }
        _ => Err(Error::UnsupportedDimension(n)),
    }
}

fn covering_radius(n: usize, grid: &[ProjectivePoint]) -> f64 {
    if n == 2 {
        let half = std::f64::consts::PI / (2.0 * grid.len() as f64);
        return 2.0 * (half / 2.0).sin();
    }
    let mut rng = seeded(COVERING_SEED);
    let samples: Vec<ProjectivePoint> = (0..COVERING_SAMPLES)
        .map(|_| ProjectivePoint::new(unit_vector(n, &mut rng)).unwrap())
        .collect();
    samples
        .par_iter()
        .map(|s| {
            grid.iter()
                .map(|q| projective_distance(s, q))
                .fold(f64::INFINITY, f64::min)
        })
        .reduce(|| 0.0, f64::max)
}

/// Grid points within `radius` of the union of the rate eigenspaces.
pub fn chain_recurrent_prediction(
    flow: &LinearFlow,
    grid: &[ProjectivePoint],
    radius: f64,
) -> Vec<bool> {
    grid.iter()
        .map(|p| {
            flow.rates
                .iter()
                .any(|r| distance_to_subspace(p, &r.basis) <= radius)
        })
        .collect()
}

/// Marks grid points lying on `(eps, T)`-cycles of the sampled flow.
pub fn chain_oracle(
    flow: &LinearFlow,
    resolution: usize,
    eps: f64,
    min_time: f64,
) -> Result<ChainOracleResult> {
    let n = flow.dim();
    if !(eps > 0.0 && eps.is_finite() && min_time > 0.0 && min_time.is_finite()) {
        return Err(Error::InvalidInput(
            "eps and min_time must be positive".into(),
        ));
    }
    let grid = projective_grid(n, resolution)?;
    let g = flow.propagator(min_time)?;
    let images: Vec<ProjectivePoint> = grid.par_iter().map(|p| p.act(&g)).collect::<Result<_>>()?;
    let adjacency: Vec<Vec<usize>> = images
        .par_iter()
        .map(|img| {
            grid.iter()
                .enumerate()
                .filter(|(_, q)| projective_distance(img, q) < eps)
                .map(|(j, _)| j)
                .collect()
        })
        .collect();

    let mut graph = DiGraph::<(), ()>::with_capacity(grid.len(), 0);
    let nodes: Vec<_> = (0..grid.len()).map(|_| graph.add_node(())).collect();
    let mut edges = Vec::new();
    for (i, targets) in adjacency.iter().enumerate() {
        for &j in targets {
            graph.add_edge(nodes[i], nodes[j], ());
            edges.push((i, j));
        }
    }
    let mut marked = vec![false; grid.len()];
    let mut cyclic_components = 0;
    for scc in tarjan_scc(&graph) {
        let cyclic = scc.len() > 1 || adjacency[scc[0].index()].contains(&scc[0].index());
        if cyclic {
            cyclic_components += 1;
            for v in scc {
                marked[v.index()] = true;
            }
        }
    }

    let covering_radius = covering_radius(n, &grid);
    let predicted = chain_recurrent_prediction(flow, &grid, covering_radius);
    let agree = marked
        .iter()
        .zip(&predicted)
        .filter(|(a, b)| a == b)
        .count();
    let agreement = agree as f64 / grid.len() as f64;
    Ok(ChainOracleResult {
        graph: ChainGraph {
            grid,
            eps,
            min_time,
            covering_radius,
            edges,
        },
        marked,
        predicted,
        agreement,
        cyclic_components,
    })
}
