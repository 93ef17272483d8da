//! TOML run configuration. Frequencies are written in GHz and converted to
//! rad/ns once, in [`RunConfig::from_file`].

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::basis::DEFAULT_MEMORY_CAP;
use crate::error::{Error, Result};
use crate::model::{
    blockade_radius, c6_for_spacing, fit_level_structure, polygon_geometry, DriveSchedule, Geometry, LevelSet, TWO_PI,
    DEFAULT_SPACING_FACTOR, DEFAULT_SPACING_UM,
};
use crate::optimize::{ParameterBounds, PulseSearchSpec};
use crate::propagator::DEFAULT_DT;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LevelsConfig {
    pub n_values: Vec<u32>,
    pub target: u32,
    pub gap_up_ghz: f64,
    pub gap_down_ghz: f64,
    pub linewidth_ghz: f64,
    /// `μ_k / μ_target` per level.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu_override: Option<Vec<f64>>,
    /// `C_k` per level in GHz·μm⁶.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_override: Option<Vec<f64>>,
}

impl Default for LevelsConfig {
    fn default() -> Self {
        LevelsConfig {
            n_values: vec![24, 25, 26],
            target: 25,
            gap_up_ghz: 2.81,
            gap_down_ghz: 3.18,
            linewidth_ghz: 0.102,
            mu_override: None,
            c_override: None,
        }
    }
}

/// `a`, `b`, `c` are in rad/ns⁴, rad/ns² and rad/ns, as printed by the
/// optimizer; the other frequencies are in GHz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DriveConfig {
    pub omega_ghz: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub delta_min_ghz: f64,
    pub delta_max_ghz: f64,
    pub duration_ns: f64,
}

impl Default for DriveConfig {
    fn default() -> Self {
        DriveConfig {
            omega_ghz: 1.404,
            a: 0.0,
            b: 0.0,
            c: 0.0,
            delta_min_ghz: -1.4,
            delta_max_ghz: 1.4,
            duration_ns: 0.24,
        }
    }
}

impl DriveConfig {
    pub fn from_schedule(s: &DriveSchedule) -> Self {
        DriveConfig {
            omega_ghz: s.omega / TWO_PI,
            a: s.a,
            b: s.b,
            c: s.c,
            delta_min_ghz: s.delta_min / TWO_PI,
            delta_max_ghz: s.delta_max / TWO_PI,
            duration_ns: s.duration,
        }
    }

    pub fn to_schedule(&self) -> DriveSchedule {
        DriveSchedule {
            omega: TWO_PI * self.omega_ghz,
            a: self.a,
            b: self.b,
            c: self.c,
            delta_min: TWO_PI * self.delta_min_ghz,
            delta_max: TWO_PI * self.delta_max_ghz,
            duration: self.duration_ns,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeometryKind {
    Polygon,
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometryConfig {
    #[serde(rename = "type")]
    pub kind: GeometryKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_sites: Option<usize>,
    /// Nearest-neighbour spacing in blockade radii.
    pub spacing_factor: f64,
    /// Site coordinates in μm.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub positions: Option<Vec<[f64; 2]>>,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig { kind: GeometryKind::Polygon, n_sites: None, spacing_factor: DEFAULT_SPACING_FACTOR, positions: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationConfig {
    pub dt_ns: f64,
    /// Steps between recorded snapshots.
    pub record_stride: usize,
    pub capacity_bytes: u64,
    pub top_k: usize,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig { dt_ns: DEFAULT_DT, record_stride: 10, capacity_bytes: DEFAULT_MEMORY_CAP, top_k: 10 }
    }
}

impl SimulationConfig {
    /// Record times `0, s·dt, 2s·dt, …` up to `duration`.
    pub fn record_times(&self, duration: f64) -> Vec<f64> {
        let step = self.dt_ns * self.record_stride as f64;
        let count = (duration / step + 1e-9).floor() as usize;
        let mut times: Vec<f64> = (0..=count).map(|k| (k as f64 * step).min(duration)).collect();
        if times.last().is_some_and(|&t| duration - t > 1e-12) {
            times.push(duration);
        }
        times.dedup();
        times
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplingConfig {
    pub runs: usize,
    pub efficiencies: Vec<f64>,
    pub seed: u64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig { runs: 2000, efficiencies: vec![0.9, 0.7, 0.5, 0.3, 0.1], seed: 2022 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizeConfig {
    pub n_sites: usize,
    pub budget: usize,
    pub restarts: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bounds: Option<ParameterBounds>,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        OptimizeConfig { n_sites: 5, budget: 400, restarts: 8, bounds: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MisConfig {
    /// Fixed run count; when absent the run budget at `confidence` is used.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runs: Option<usize>,
    pub eta: f64,
    pub confidence: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub edges: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coords: Option<PathBuf>,
}

impl Default for MisConfig {
    fn default() -> Self {
        MisConfig { runs: None, eta: 1.0, confidence: 0.99, edges: None, coords: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StatsConfig {
    /// `(n, P)` points for the exponential fit.
    pub points: Vec<(f64, f64)>,
    pub extrapolate_to: f64,
    pub eta: f64,
    pub k_excitations: u32,
    pub confidence: f64,
    pub t_single_run_s: f64,
    pub wait_lifetimes: f64,
    pub p_collect: f64,
    pub decay_onset_ns: f64,
    pub lifetime_ns: f64,
}

impl Default for StatsConfig {
    fn default() -> Self {
        StatsConfig {
            points: vec![(6.0, 0.1214), (8.0, 0.06127), (10.0, 0.03082), (12.0, 0.01545)],
            extrapolate_to: 50.0,
            eta: 0.9,
            k_excitations: 25,
            confidence: 0.99,
            t_single_run_s: 5e-9,
            wait_lifetimes: 3.0,
            p_collect: 0.5,
            decay_onset_ns: 0.1,
            lifetime_ns: 1.0,
        }
    }
}

/// The file as written, with defaults filled in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ConfigFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub levels: LevelsConfig,
    pub drive: DriveConfig,
    pub geometry: GeometryConfig,
    pub simulation: SimulationConfig,
    pub sampling: SamplingConfig,
    pub optimize: OptimizeConfig,
    pub mis: MisConfig,
    pub stats: StatsConfig,
}

impl ConfigFile {
    pub fn parse(text: &str, path: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| toml_error(&e, text, path))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

fn toml_error(e: &toml::de::Error, text: &str, path: &str) -> Error {
    let message = e.message().to_owned();
    if let Some(rest) = message.strip_prefix("unknown field `") {
        if let Some(key) = rest.split('`').next() {
            return Error::UnknownKey(key.to_owned());
        }
    }
    let location = e
        .span()
        .map(|s| format!("line {}: ", text[..s.start.min(text.len())].matches('\n').count() + 1))
        .unwrap_or_default();
    Error::Parse { path: path.to_owned(), message: format!("{location}{message}") }
}

/// Validated configuration in internal units.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub file: ConfigFile,
    pub levels: LevelSet,
    pub schedule: DriveSchedule,
    pub geometry: Geometry,
    pub simulation: SimulationConfig,
    pub sampling: SamplingConfig,
    pub search: PulseSearchSpec,
    pub mis: MisConfig,
    pub stats: StatsConfig,
    pub output_dir: PathBuf,
}

fn invalid(field: &str, message: impl Into<String>) -> Error {
    Error::Validation { field: field.to_owned(), message: message.into() }
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(field, format!("must be positive, got {v}")))
    }
}

fn probability(field: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(invalid(field, format!("must lie in [0, 1], got {v}")))
    }
}

fn build_levels(c: &LevelsConfig, omega: f64) -> Result<LevelSet> {
    let target_index = c
        .n_values
        .iter()
        .position(|&n| n == c.target)
        .ok_or_else(|| invalid("levels.target", format!("{} is not in n_values", c.target)))?;
    positive("levels.gap_up_ghz", c.gap_up_ghz)?;
    positive("levels.gap_down_ghz", c.gap_down_ghz)?;
    if !(c.linewidth_ghz >= 0.0) {
        return Err(invalid("levels.linewidth_ghz", "must be non-negative"));
    }
    let (ry, defect) = fit_level_structure(TWO_PI * c.gap_up_ghz, TWO_PI * c.gap_down_ghz, c.target)
        .map_err(|e| invalid("levels.gap_up_ghz", e.to_string()))?;
    let kt = c.target as f64;
    let mu_ratio = match &c.mu_override {
        Some(m) => m.clone(),
        None => c.n_values.iter().map(|&k| (kt / k as f64).powi(3)).collect(),
    };
    let c6 = match &c.c_override {
        Some(v) => v.iter().map(|x| TWO_PI * x).collect(),
        None => {
            let c_target = c6_for_spacing(omega, DEFAULT_SPACING_UM, DEFAULT_SPACING_FACTOR);
            c.n_values.iter().map(|&k| c_target * (k as f64 / kt).powi(11)).collect()
        }
    };
    LevelSet::new(c.n_values.clone(), target_index, ry, defect, mu_ratio, c6, TWO_PI * c.linewidth_ghz)
        .map_err(|e| invalid("levels", e.to_string()))
}

fn build_geometry(c: &GeometryConfig, levels: &LevelSet, omega: f64) -> Result<Geometry> {
    match c.kind {
        GeometryKind::Polygon => {
            let n = c.n_sites.ok_or_else(|| invalid("geometry.n_sites", "required for a polygon"))?;
            positive("geometry.spacing_factor", c.spacing_factor)?;
            let rb = blockade_radius(levels.c6()[levels.target_index()], omega)
                .map_err(|e| invalid("drive.omega_ghz", e.to_string()))?;
            polygon_geometry(n, c.spacing_factor * rb).map_err(|e| invalid("geometry.n_sites", e.to_string()))
        }
        GeometryKind::Explicit => {
            let positions = c.positions.clone().ok_or_else(|| invalid("geometry.positions", "required for explicit geometry"))?;
            if c.n_sites.is_some_and(|n| n != positions.len()) {
                return Err(invalid("geometry.n_sites", "does not match the number of positions"));
            }
            Geometry::from_positions(positions).map_err(|e| invalid("geometry.positions", e.to_string()))
        }
    }
}

impl RunConfig {
    pub fn from_file(file: ConfigFile) -> Result<Self> {
        let d = &file.drive;
        positive("drive.omega_ghz", d.omega_ghz)?;
        positive("drive.duration_ns", d.duration_ns)?;
        for (field, v) in [("drive.a", d.a), ("drive.b", d.b), ("drive.c", d.c)] {
            if !v.is_finite() {
                return Err(invalid(field, "must be finite"));
            }
        }
        if !(d.delta_min_ghz <= d.delta_max_ghz) {
            return Err(invalid("drive.delta_min_ghz", "must not exceed delta_max_ghz"));
        }
        let schedule = d.to_schedule();
        let levels = build_levels(&file.levels, schedule.omega)?;
        let geometry = build_geometry(&file.geometry, &levels, schedule.omega)?;

        let s = &file.simulation;
        positive("simulation.dt_ns", s.dt_ns)?;
        if s.record_stride == 0 {
            return Err(invalid("simulation.record_stride", "must be >= 1"));
        }
        if s.capacity_bytes == 0 {
            return Err(invalid("simulation.capacity_bytes", "must be >= 1"));
        }
        crate::basis::dimension_with_cap(geometry.n_sites(), levels.len() + 1, s.capacity_bytes)?;

        let sm = &file.sampling;
        if sm.runs == 0 {
            return Err(invalid("sampling.runs", "must be >= 1"));
        }
        for &eta in &sm.efficiencies {
            probability("sampling.efficiencies", eta)?;
        }

        let o = &file.optimize;
        let search = PulseSearchSpec {
            n_sites: o.n_sites,
            spacing_um: file.geometry.spacing_factor
                * blockade_radius(levels.c6()[levels.target_index()], schedule.omega)?,
            bounds: o.bounds.unwrap_or_default(),
            budget: o.budget,
            restarts: o.restarts,
            seed: sm.seed,
            dt: s.dt_ns,
        };
        search.validate(&levels).map_err(|e| invalid("optimize", e.to_string()))?;

        let m = &file.mis;
        probability("mis.eta", m.eta)?;
        if !(m.confidence > 0.0 && m.confidence < 1.0) {
            return Err(invalid("mis.confidence", "must lie in (0, 1)"));
        }
        if m.runs == Some(0) {
            return Err(invalid("mis.runs", "must be >= 1"));
        }

        let st = &file.stats;
        probability("stats.eta", st.eta)?;
        probability("stats.p_collect", st.p_collect)?;

        Ok(RunConfig {
            levels,
            schedule,
            geometry,
            simulation: file.simulation.clone(),
            sampling: file.sampling.clone(),
            search,
            mis: file.mis.clone(),
            stats: file.stats.clone(),
            output_dir: file.output_dir.clone().unwrap_or_else(|| PathBuf::from("out")),
            file,
        })
    }

    pub fn parse(text: &str, path: &str) -> Result<Self> {
        RunConfig::from_file(ConfigFile::parse(text, path)?)
    }

    pub fn with_seed(mut self, seed: u64) -> Result<Self> {
        self.file.sampling.seed = seed;
        RunConfig::from_file(self.file)
    }

    pub fn with_dt(mut self, dt: f64) -> Result<Self> {
        self.file.simulation.dt_ns = dt;
        RunConfig::from_file(self.file)
    }

    pub fn seed(&self) -> u64 {
        self.sampling.seed
    }

    pub fn to_toml(&self) -> String {
        self.file.to_toml()
    }
}

pub fn load_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    RunConfig::parse(&text, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::DEFAULT_OMEGA;

    const MINIMAL: &str = "[geometry]\ntype = \"polygon\"\nn_sites = 6\n";

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = RunConfig::parse(MINIMAL, "min.toml").unwrap();
        assert!((cfg.schedule.omega - DEFAULT_OMEGA).abs() < 1e-12);
        assert_eq!(cfg.schedule.duration, 0.24);
        assert_eq!(cfg.simulation.dt_ns, 5e-4);
        assert_eq!(cfg.geometry.n_sites(), 6);
        let default = LevelSet::cu2o_default(DEFAULT_OMEGA).unwrap();
        assert_eq!(cfg.levels.n_values(), default.n_values());
        for (a, b) in cfg.levels.c6().iter().zip(default.c6()) {
            assert!((a - b).abs() < 1e-9 * b);
        }
        assert!((cfg.geometry.distance(0, 1) - DEFAULT_SPACING_UM).abs() < 1e-9);
    }

    #[test]
    fn inverted_clamps_are_rejected() {
        let text = format!("{MINIMAL}[drive]\ndelta_min_ghz = 1.0\ndelta_max_ghz = -1.0\n");
        match RunConfig::parse(&text, "bad.toml") {
            Err(Error::Validation { field, .. }) => assert_eq!(field, "drive.delta_min_ghz"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn round_trip() {
        let text = format!("{MINIMAL}[levels]\nc_override = [3000.0, 4000.0, 5000.0]\n[sampling]\nseed = 9\n");
        let cfg = RunConfig::parse(&text, "a.toml").unwrap();
        let again = RunConfig::parse(&cfg.to_toml(), "b.toml").unwrap();
        assert_eq!(cfg, again);
        assert_eq!(cfg.to_toml(), again.to_toml());
    }

    #[test]
    fn unknown_keys_and_parse_errors() {
        assert!(matches!(RunConfig::parse("[drive]\nomga_ghz = 1.0\n", "x"), Err(Error::UnknownKey(k)) if k == "omga_ghz"));
        assert!(matches!(RunConfig::parse("bogus = 1\n", "x"), Err(Error::UnknownKey(_))));
        match RunConfig::parse("[drive]\n\nomega_ghz = \"fast\"\n", "x") {
            Err(Error::Parse { message, .. }) => assert!(message.contains("line 3"), "{message}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn validation_names_the_field() {
        let cases = [
            ("[simulation]\ndt_ns = 0.0\n", "simulation.dt_ns"),
            ("[sampling]\nefficiencies = [1.5]\n", "sampling.efficiencies"),
            ("[levels]\ntarget = 30\n", "levels.target"),
            ("[geometry]\ntype = \"explicit\"\n", "geometry.positions"),
            ("[drive]\nomega_ghz = -1.0\n", "drive.omega_ghz"),
        ];
        for (text, expected) in cases {
            let text = if text.contains("[geometry]") { text.to_owned() } else { format!("{MINIMAL}{text}") };
            match RunConfig::parse(&text, "x") {
                Err(Error::Validation { field, .. }) => assert_eq!(field, expected),
                other => panic!("{text}: unexpected {other:?}"),
            }
        }
    }

    #[test]
    fn explicit_geometry_and_overrides() {
        let text = "[geometry]\ntype = \"explicit\"\npositions = [[0.0, 0.0], [2.0, 0.0]]\n[levels]\nn_values = [25]\ntarget = 25\nc_override = [1000.0]\n";
        let cfg = RunConfig::parse(text, "x").unwrap();
        assert_eq!(cfg.geometry.n_sites(), 2);
        assert!((cfg.levels.c6()[0] - TWO_PI * 1000.0).abs() < 1e-9);
    }

    #[test]
    fn seed_and_dt_overrides() {
        let cfg = RunConfig::parse(MINIMAL, "x").unwrap().with_seed(77).unwrap().with_dt(2.5e-4).unwrap();
        assert_eq!(cfg.seed(), 77);
        assert_eq!(cfg.search.seed, 77);
        assert_eq!(cfg.simulation.dt_ns, 2.5e-4);
    }

    #[test]
    fn record_times_cover_the_window() {
        let sim = SimulationConfig { dt_ns: 0.01, record_stride: 5, ..SimulationConfig::default() };
        let t = sim.record_times(0.24);
        assert_eq!(t.first(), Some(&0.0));
        assert_eq!(t.last(), Some(&0.24));
        assert_eq!(t.len(), 6);
    }
}
