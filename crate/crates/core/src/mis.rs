//! Maximum independent sets on unit-disk graphs, solved by sampling blockaded
//! dynamics and keeping the largest valid outcome.

use std::collections::BTreeSet;
use std::io::Write;

use rand::Rng;
use serde::Serialize;

use crate::basis::{encode, BasisIndex, Occupancies, StateVector};
use crate::error::{Error, Result};
use crate::model::{blockade_radius, DriveSchedule, Geometry, LevelSet};
use crate::observables::{check_probability, objective_probability, thin_occupancies, Sampler};
use crate::propagator::{evolve_until, HamiltonianContext, DEFAULT_DT};
use crate::rng;

/// Largest graph accepted by [`brute_force_mis`].
pub const MAX_ORACLE_NODES: usize = 24;

/// Undirected simple graph on nodes `0..n_nodes`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphSpec {
    n_nodes: usize,
    edges: Vec<(usize, usize)>,
    radius: Option<f64>,
    #[serde(skip)]
    adjacency: Vec<u64>,
}

impl GraphSpec {
    /// Normalizes each edge to `i < j`; rejects self-loops, duplicates and
    /// out-of-range endpoints.
    pub fn from_edges(n_nodes: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n_nodes > 64 {
            return Err(Error::TooLarge(n_nodes));
        }
        let mut seen = BTreeSet::new();
        for &(a, b) in edges {
            let (i, j) = (a.min(b), a.max(b));
            if j >= n_nodes {
                return Err(Error::SiteOutOfRange { site: j, nodes: n_nodes });
            }
            if i == j {
                return Err(Error::InvalidGeometry(format!("self-loop at node {i}")));
            }
            if !seen.insert((i, j)) {
                return Err(Error::InvalidGeometry(format!("duplicate edge ({i}, {j})")));
            }
        }
        let edges: Vec<(usize, usize)> = seen.into_iter().collect();
        let mut adjacency = vec![0u64; n_nodes];
        for &(i, j) in &edges {
            adjacency[i] |= 1 << j;
            adjacency[j] |= 1 << i;
        }
        Ok(GraphSpec { n_nodes, edges, radius: None, adjacency })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Radius the graph was built with, if it came from a geometry.
    pub fn radius(&self) -> Option<f64> {
        self.radius
    }

    pub fn neighbours(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        let mask = self.adjacency[i];
        (0..self.n_nodes).filter(move |&j| mask >> j & 1 == 1)
    }

    fn is_independent_mask(&self, mask: u64) -> bool {
        (0..self.n_nodes).all(|i| mask >> i & 1 == 0 || self.adjacency[i] & mask == 0)
    }

    pub fn write_edge_list<W: Write>(&self, mut w: W) -> Result<()> {
        for (i, j) in &self.edges {
            writeln!(w, "{i} {j}")?;
        }
        Ok(())
    }
}

/// Edge `(i, j)` iff `distance(i, j) < radius`.
pub fn unit_disk_graph(geometry: &Geometry, radius: f64) -> Result<GraphSpec> {
    if !(radius > 0.0) {
        return Err(Error::NonPositiveInput("radius"));
    }
    let n = geometry.n_sites();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if geometry.distance(i, j) < radius {
                edges.push((i, j));
            }
        }
    }
    let mut graph = GraphSpec::from_edges(n, &edges)?;
    graph.radius = Some(radius);
    Ok(graph)
}

/// Unit-disk graph at the blockade radius of the target level.
pub fn blockade_graph(geometry: &Geometry, levels: &LevelSet, omega: f64) -> Result<GraphSpec> {
    let radius = blockade_radius(levels.c6()[levels.target_index()], omega)?;
    unit_disk_graph(geometry, radius)
}

fn to_mask(graph: &GraphSpec, chosen: &[usize]) -> Result<u64> {
    chosen.iter().try_fold(0u64, |mask, &site| {
        if site >= graph.n_nodes {
            Err(Error::SiteOutOfRange { site, nodes: graph.n_nodes })
        } else {
            Ok(mask | 1 << site)
        }
    })
}

pub fn is_independent(graph: &GraphSpec, chosen: &[usize]) -> Result<bool> {
    Ok(graph.is_independent_mask(to_mask(graph, chosen)?))
}

/// Exact MIS size and every maximum set, each sorted ascending, in
/// lexicographic order.
pub fn brute_force_mis(graph: &GraphSpec) -> Result<(usize, Vec<Vec<usize>>)> {
    let n = graph.n_nodes;
    if n > MAX_ORACLE_NODES {
        return Err(Error::TooLarge(n));
    }
    struct Search<'a> {
        adjacency: &'a [u64],
        n: usize,
        best: usize,
        sets: Vec<u64>,
    }
    impl Search<'_> {
        fn visit(&mut self, v: usize, chosen: u64, size: usize, blocked: u64) {
            if size + (self.n - v) < self.best {
                return;
            }
            if v == self.n {
                if size > self.best {
                    self.best = size;
                    self.sets.clear();
                }
                self.sets.push(chosen);
                return;
            }
            if blocked >> v & 1 == 0 {
                self.visit(v + 1, chosen | 1 << v, size + 1, blocked | self.adjacency[v]);
            }
            self.visit(v + 1, chosen, size, blocked);
        }
    }
    let mut search = Search { adjacency: &graph.adjacency, n, best: 0, sets: Vec::new() };
    search.visit(0, 0, 0, 0);
    let best = search.best;
    // the recursion can record sets that only matched an earlier, smaller best
    let mut sets: Vec<Vec<usize>> = search
        .sets
        .into_iter()
        .filter(|m| m.count_ones() as usize == best)
        .map(|m| (0..n).filter(|&i| m >> i & 1 == 1).collect())
        .collect();
    sets.sort();
    sets.dedup();
    Ok((best, sets))
}

/// Basis states with the given sets excited to `code` and all else ground.
pub fn sets_to_basis(sets: &[Vec<usize>], n_sites: usize, levels_per_site: usize, code: u8) -> Result<Vec<BasisIndex>> {
    sets.iter()
        .map(|set| {
            let mut occ = vec![0u8; n_sites];
            for &s in set {
                occ[s] = code;
            }
            encode(&Occupancies(occ), levels_per_site)
        })
        .collect()
}

/// Maximum independent sets of the graph as target-level basis states.
pub fn objective_states(graph: &GraphSpec, levels: &LevelSet) -> Result<Vec<BasisIndex>> {
    let (_, sets) = brute_force_mis(graph)?;
    sets_to_basis(&sets, graph.n_nodes, levels.len() + 1, levels.target_code())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MisSolution {
    pub set: Vec<usize>,
    pub size: usize,
    pub certified: bool,
    /// Oracle optimum when the graph was small enough to enumerate.
    pub oracle_size: Option<usize>,
    pub runs_used: usize,
    pub valid_draws: usize,
    /// Draws whose valid set reached the reported size.
    pub hits: usize,
    /// `1 − (1 − hits/runs)^runs`: chance that a fresh batch of the same
    /// size reaches the reported size again.
    pub confidence: f64,
}

impl MisSolution {
    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }
}

/// Samples a final state, applies detection loss, and keeps the largest
/// independent set among the detected excitations. Any Rydberg level counts
/// as an excitation.
pub fn solve_from_state(state: &StateVector, graph: &GraphSpec, runs: usize, eta: f64, seed: u64) -> Result<MisSolution> {
    if state.n_sites() != graph.n_nodes {
        return Err(Error::DimensionMismatch { expected: graph.n_nodes, actual: state.n_sites() });
    }
    if runs == 0 {
        return Err(Error::DegenerateInput("runs must be >= 1".into()));
    }
    check_probability("eta", eta)?;
    let oracle_size = if graph.n_nodes <= MAX_ORACLE_NODES { Some(brute_force_mis(graph)?.0) } else { None };
    let sampler = Sampler::new(state);
    let sample_seed = rng::derive_seed(seed, "sample");
    let thin_seed = rng::derive_seed(seed, "thin");
    use rayon::prelude::*;
    let outcomes: Vec<Option<u64>> = (0..runs as u64)
        .into_par_iter()
        .map(|run| {
            let occ = thin_occupancies(&sampler.draw_occupancies(sample_seed, run), eta, thin_seed, run);
            let mask = occ.0.iter().enumerate().fold(0u64, |m, (i, &c)| if c > 0 { m | 1 << i } else { m });
            graph.is_independent_mask(mask).then_some(mask)
        })
        .collect();
    let valid: Vec<u64> = outcomes.iter().flatten().copied().collect();
    let size = valid.iter().map(|m| m.count_ones() as usize).max().unwrap_or(0);
    let best = valid.iter().copied().find(|m| m.count_ones() as usize == size).unwrap_or(0);
    let hits = valid.iter().filter(|m| m.count_ones() as usize == size).count();
    let rate = hits as f64 / runs as f64;
    let confidence = -((runs as f64) * (-rate).ln_1p()).exp_m1();
    Ok(MisSolution {
        set: (0..graph.n_nodes).filter(|&i| best >> i & 1 == 1).collect(),
        size,
        certified: oracle_size == Some(size) && size > 0,
        oracle_size,
        runs_used: runs,
        valid_draws: valid.len(),
        hits,
        confidence,
    })
}

/// Evolves the all-ground state under the schedule and returns the state at
/// the end of the drive.
pub fn final_state(geometry: &Geometry, levels: &LevelSet, schedule: &DriveSchedule, dt: f64) -> Result<StateVector> {
    let ctx = HamiltonianContext::new(levels.clone(), *schedule, geometry)?;
    let psi0 = StateVector::ground(geometry.n_sites(), levels.len())?;
    let traj = evolve_until(&psi0, &ctx, dt, schedule.duration, &[])?;
    Ok(traj.states.into_iter().last().expect("final snapshot"))
}

/// Full pipeline on the blockade graph of `geometry`.
pub fn solve_mis_pipeline(
    geometry: &Geometry,
    levels: &LevelSet,
    schedule: &DriveSchedule,
    runs: usize,
    eta: f64,
    seed: u64,
) -> Result<MisSolution> {
    let graph = blockade_graph(geometry, levels, schedule.omega)?;
    let state = final_state(geometry, levels, schedule, DEFAULT_DT)?;
    solve_from_state(&state, &graph, runs, eta, seed)
}

/// Probability that one run yields a maximum set on the target level.
pub fn objective_weight(state: &StateVector, graph: &GraphSpec, levels: &LevelSet) -> Result<f64> {
    objective_probability(state, &objective_states(graph, levels)?)
}

/// Random points in a square of side `side` (μm), rejecting any pair closer
/// than `min_separation`.
pub fn random_instance(n_sites: usize, side: f64, min_separation: f64, seed: u64) -> Result<Geometry> {
    if !(side > 0.0) || !(min_separation >= 0.0) {
        return Err(Error::InvalidGeometry("side and separation must be positive".into()));
    }
    let mut r = rng::stream(seed, 0);
    let mut positions: Vec<[f64; 2]> = Vec::with_capacity(n_sites);
    let mut attempts = 0usize;
    while positions.len() < n_sites {
        attempts += 1;
        if attempts > 100_000 * n_sites.max(1) {
            return Err(Error::InvalidGeometry("could not place sites at the requested separation".into()));
        }
        let p = [r.random::<f64>() * side, r.random::<f64>() * side];
        if positions.iter().all(|q| (p[0] - q[0]).hypot(p[1] - q[1]) >= min_separation) {
            positions.push(p);
        }
    }
    Geometry::from_positions(positions)
}

fn parse_rows(text: &str, path: &str) -> Result<Vec<Vec<String>>> {
    let mut rows = Vec::new();
    for (line_no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<String> = line.split_whitespace().map(str::to_owned).collect();
        if fields.len() != 2 {
            return Err(Error::Parse {
                path: path.to_owned(),
                message: format!("line {}: expected two fields, found {}", line_no + 1, fields.len()),
            });
        }
        rows.push(fields);
    }
    Ok(rows)
}

/// Parses `i j` lines; blank lines and `#` comments are ignored.
pub fn read_edge_list(text: &str, n_nodes: Option<usize>, path: &str) -> Result<GraphSpec> {
    let rows = parse_rows(text, path)?;
    let edges = rows
        .iter()
        .map(|r| {
            let parse = |s: &str| {
                s.parse::<usize>().map_err(|e| Error::Parse { path: path.to_owned(), message: format!("{s:?}: {e}") })
            };
            Ok((parse(&r[0])?, parse(&r[1])?))
        })
        .collect::<Result<Vec<_>>>()?;
    let n = n_nodes.unwrap_or_else(|| edges.iter().map(|&(i, j)| i.max(j) + 1).max().unwrap_or(0));
    GraphSpec::from_edges(n, &edges)
}

/// Parses `x y` lines in μm.
pub fn read_coordinates(text: &str, path: &str) -> Result<Geometry> {
    let rows = parse_rows(text, path)?;
    let positions = rows
        .iter()
        .map(|r| {
            let parse = |s: &str| {
                s.parse::<f64>().map_err(|e| Error::Parse { path: path.to_owned(), message: format!("{s:?}: {e}") })
            };
            Ok([parse(&r[0])?, parse(&r[1])?])
        })
        .collect::<Result<Vec<_>>>()?;
    Geometry::from_positions(positions)
}
