//! Convergence studies, the capacitor demo and their text output.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use log::info;

use crate::bem::{self, PointLocation};
use crate::cases::{capacitor_problem, ManufacturedCase};
use crate::convergence::{compute_eoc, ErrorMeasure, LevelErrors};
use crate::mesh::{build_capacitor_mesh, build_lshape_mesh, Point2, TimeGrid};
use crate::timestep::{
    solve_evolution, CoupledTrajectory, Discretization, QuadratureConfig, TimeQuadrature,
    WeightScheme,
};
use crate::{Error, Result};

/// Coarsest time step of every schedule.
pub const START_STEP: f64 = 0.05;
/// Final time of all experiments.
pub const END_TIME: f64 = 1.0;
/// Snapshot times of the capacitor demo.
pub const SNAPSHOT_TIMES: [f64; 6] = [0.0125, 0.05, 0.4875, 0.5, 0.6, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Manufactured(ManufacturedCase),
    Capacitor,
}

impl FromStr for Experiment {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s.trim().eq_ignore_ascii_case("capacitor") {
            Ok(Experiment::Capacitor)
        } else {
            s.parse().map(Experiment::Manufactured).map_err(|_| {
                Error::InvalidInput(format!(
                    "unknown experiment '{s}' (smooth|corner|time_singular|capacitor)"
                ))
            })
        }
    }
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Manufactured(case) => case.name(),
            Experiment::Capacitor => "capacitor",
        }
    }
}

/// Rectangular grid of exterior sample points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingGrid {
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub nx: usize,
    pub ny: usize,
}

impl Default for SamplingGrid {
    fn default() -> Self {
        Self {
            x_range: (-3.0, 3.0),
            y_range: (-3.0, 3.0),
            nx: 25,
            ny: 25,
        }
    }
}

impl SamplingGrid {
    pub fn points(&self) -> Vec<Point2> {
        let coord = |(lo, hi): (f64, f64), n: usize, k: usize| {
            if n <= 1 {
                lo
            } else {
                lo + (hi - lo) * k as f64 / (n - 1) as f64
            }
        };
        (0..self.ny)
            .flat_map(|j| {
                (0..self.nx).map(move |i| {
                    Point2::new(coord(self.x_range, self.nx, i), coord(self.y_range, self.ny, j))
                })
            })
            .collect()
    }
}

impl FromStr for SamplingGrid {
    type Err = Error;
    /// `xmin xmax ymin ymax nx ny`
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split_whitespace().collect();
        let bad = || Error::InvalidInput(format!("sampling grid '{s}' is not 'xmin xmax ymin ymax nx ny'"));
        if parts.len() != 6 {
            return Err(bad());
        }
        let f = |k: usize| parts[k].parse::<f64>().map_err(|_| bad());
        let u = |k: usize| parts[k].parse::<usize>().map_err(|_| bad());
        Ok(Self {
            x_range: (f(0)?, f(1)?),
            y_range: (f(2)?, f(3)?),
            nx: u(4)?,
            ny: u(5)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    /// Number of levels of a study; refinement level of the capacitor demo.
    pub levels: usize,
    pub scheme: WeightScheme,
    pub quadrature: QuadratureConfig,
    /// Extra boundary bisections for the V-energy reference.
    pub v_refine_extra: usize,
    pub out: PathBuf,
    pub sampling: SamplingGrid,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: Experiment::Manufactured(ManufacturedCase::Smooth),
            levels: 4,
            scheme: WeightScheme::EulerVariant,
            quadrature: QuadratureConfig::default(),
            v_refine_extra: 2,
            out: PathBuf::from("out"),
            sampling: SamplingGrid::default(),
        }
    }
}

impl ExperimentConfig {
    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        let mut time_points = self.quadrature.time.points();
        let mut panels = self.quadrature.time.first_interval_panels();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::InvalidInput(format!("config line {}: expected key = value", lineno + 1))
            })?;
            let value = value.trim();
            let parse_usize = |v: &str| {
                v.parse::<usize>().map_err(|_| {
                    Error::InvalidInput(format!("config line {}: '{v}' is not a count", lineno + 1))
                })
            };
            match key.trim() {
                "experiment" => self.experiment = value.parse()?,
                "levels" => self.levels = parse_usize(value)?,
                "scheme" => self.scheme = value.parse()?,
                "time_points" => time_points = parse_usize(value)?,
                "first_interval_panels" => panels = parse_usize(value)?,
                "volume_degree" => self.quadrature.space.volume_degree = parse_usize(value)?,
                "edge_points" => self.quadrature.space.edge_points = parse_usize(value)?,
                "v_refine_extra" => self.v_refine_extra = parse_usize(value)?,
                "out" => self.out = PathBuf::from(value),
                "grid" => self.sampling = value.parse()?,
                other => {
                    return Err(Error::InvalidInput(format!(
                        "config line {}: unknown key '{other}'",
                        lineno + 1
                    )))
                }
            }
        }
        self.quadrature.time = TimeQuadrature::new(time_points, panels)?;
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let mut config = Self::default();
        config.apply_text(&fs::read_to_string(path)?)?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels == 0 && self.experiment != Experiment::Capacitor {
            return Err(Error::InvalidInput("a study needs at least one level".into()));
        }
        Ok(())
    }
}

/// Time grid of level `level`: `τ = 0.05 · 2^{−level}` on `[0, 1]`.
pub fn level_time_grid(level: usize) -> Result<TimeGrid> {
    TimeGrid::uniform(END_TIME, ((END_TIME / START_STEP).round() as usize) << level)
}

/// Per-level error table of a convergence study.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub experiment: Experiment,
    pub scheme: WeightScheme,
    pub rows: Vec<LevelErrors>,
}

/// Error columns in table order, with accessors.
pub const ERROR_COLUMNS: [(&str, fn(&LevelErrors) -> f64); 9] = [
    ("errorL2", |e| e.l2),
    ("errorL2proj", |e| e.l2_proj),
    ("errorH1semi", |e| e.h1semi),
    ("errorH1semiproj", |e| e.h1semi_proj),
    ("errorH1dual", |e| e.h1dual),
    ("errorenergyV", |e| e.energy_v),
    ("errorenergyVproj", |e| e.energy_v_proj),
    ("globalEnergy", |e| e.global_energy),
    ("globalEnergyproj", |e| e.global_energy_proj),
];

impl ErrorReport {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        ERROR_COLUMNS
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, get)| self.rows.iter().map(get).collect())
    }

    /// EOCs of column `name` with respect to the mesh width (τ halves with h).
    pub fn eoc(&self, name: &str) -> Option<Vec<f64>> {
        let values = self.column(name)?;
        let h: Vec<f64> = self.rows.iter().map(|r| 1.0 / r.inv_h).collect();
        Some(compute_eoc(&values, &h))
    }

    /// Rate of `name` between the last two levels.
    pub fn final_eoc(&self, name: &str) -> f64 {
        self.eoc(name).and_then(|r| r.last().copied()).unwrap_or(f64::NAN)
    }

    pub fn header() -> Vec<String> {
        let mut h = vec!["invmaxMeshsizeh".to_string(), "numberTimeintervals".to_string()];
        h.extend(ERROR_COLUMNS.iter().map(|(n, _)| n.to_string()));
        h.extend(ERROR_COLUMNS.iter().map(|(n, _)| format!("eoc_{n}")));
        h
    }

    /// Table rows as numbers; the first row's EOCs are NaN.
    pub fn table(&self) -> Vec<Vec<f64>> {
        let eocs: Vec<Vec<f64>> = ERROR_COLUMNS
            .iter()
            .map(|(n, _)| self.eoc(n).unwrap_or_default())
            .collect();
        self.rows
            .iter()
            .enumerate()
            .map(|(l, r)| {
                let mut row = vec![r.inv_h, r.n_intervals as f64];
                row.extend(ERROR_COLUMNS.iter().map(|(_, get)| get(r)));
                row.extend(eocs.iter().map(|e| if l == 0 { f64::NAN } else { e[l - 1] }));
                row
            })
            .collect()
    }

    /// Log–log slopes between consecutive levels, one line per column.
    pub fn slope_summary(&self) -> String {
        let mut s = String::new();
        for (name, _) in ERROR_COLUMNS {
            let rates = self.eoc(name).unwrap_or_default();
            let rates: Vec<String> = rates.iter().map(|r| format!("{r:.3}")).collect();
            let _ = writeln!(s, "{name:<18} {}", rates.join(" "));
        }
        s
    }
}

/// Writes a space-separated table with a header line; numbers use the
/// shortest representation that reads back exactly.
pub fn write_table(report: &ErrorReport, path: &Path) -> Result<()> {
    if report.rows.is_empty() {
        return Err(Error::InvalidInput("empty error report".into()));
    }
    let mut s = ErrorReport::header().join(" ");
    s.push('\n');
    for row in report.table() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        s.push_str(&cells.join(" "));
        s.push('\n');
    }
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    fs::write(path, s)?;
    Ok(())
}

/// Reads a table written by [`write_table`]: header and numeric rows.
pub fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| Error::InvalidInput(format!("{} is empty", path.display())))?
        .split_whitespace()
        .map(str::to_string)
        .collect();
    let rows = lines
        .map(|l| {
            l.split_whitespace()
                .map(|v| {
                    v.parse::<f64>()
                        .map_err(|_| Error::InvalidInput(format!("bad number '{v}' in table")))
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((header, rows))
}

fn at_level<T>(level: usize, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::AtLevel {
        level,
        source: Box::new(e),
    })
}

/// Solves one level of a manufactured study and measures every error column.
pub fn run_level(case: ManufacturedCase, level: usize, config: &ExperimentConfig) -> Result<LevelErrors> {
    at_level(level, (|| {
        let data = case.problem_data();
        let mesh = Arc::new(build_lshape_mesh(level));
        let disc = Discretization::new(mesh, &data.diffusion)?;
        let grid = level_time_grid(level)?;
        let traj = solve_evolution(&disc, &data, &grid, config.scheme, config.quadrature)?;
        let measure = ErrorMeasure::new(&disc, config.quadrature, config.v_refine_extra)?;
        measure.measure_all(&traj, &case)
    })())
}

/// Convergence study over levels `0..config.levels`; writes
/// `<out>/<experiment>_<scheme>.txt`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ErrorReport> {
    config.validate()?;
    let case = match config.experiment {
        Experiment::Manufactured(case) => case,
        Experiment::Capacitor => {
            return Err(Error::InvalidInput("use run_capacitor for the capacitor demo".into()))
        }
    };
    let mut rows = Vec::with_capacity(config.levels);
    for level in 0..config.levels {
        let row = run_level(case, level, config)?;
        info!(
            "{} level {level}: 1/h = {}, N = {}, globalEnergy = {:e}",
            case.name(),
            row.inv_h,
            row.n_intervals,
            row.global_energy
        );
        rows.push(row);
    }
    let report = ErrorReport {
        experiment: config.experiment,
        scheme: config.scheme,
        rows,
    };
    write_table(&report, &table_path(config))?;
    Ok(report)
}

pub fn table_path(config: &ExperimentConfig) -> PathBuf {
    config
        .out
        .join(format!("{}_{}.txt", config.experiment.name(), config.scheme.name()))
}

/// Output of the capacitor demo.
#[derive(Debug, Clone)]
pub struct CapacitorRun {
    pub trajectory: CoupledTrajectory,
    /// Snapshot time and the file it was written to.
    pub snapshots: Vec<(f64, PathBuf)>,
    /// `max |u(−x₁,x₂) + u(x₁,x₂)| / max |u|` over all nodes.
    pub antisymmetry_defect: f64,
    /// Sample points skipped because they are not exterior to Ω.
    pub skipped_points: usize,
}

/// Volume vertex mirrored at `x₁ = 0`, for every vertex.
pub fn mirror_map(vertices: &[Point2]) -> Result<Vec<usize>> {
    let key = |p: Point2| ((p.x + 0.0).to_bits(), (p.y + 0.0).to_bits());
    let index: HashMap<(u64, u64), usize> = vertices.iter().enumerate().map(|(k, &p)| (key(p), k)).collect();
    vertices
        .iter()
        .map(|&p| {
            index.get(&key(Point2::new(-p.x, p.y))).copied().ok_or_else(|| {
                Error::InvalidMesh(format!("vertex ({}, {}) has no mirror image", p.x, p.y))
            })
        })
        .collect()
}

/// Capacitor run at refinement level `config.levels` with
/// `τ = 0.05 · 2^{−levels}`; one field file per snapshot time.
pub fn run_capacitor(config: &ExperimentConfig) -> Result<CapacitorRun> {
    let level = config.levels;
    at_level(level, (|| {
        let data = capacitor_problem();
        let mesh = Arc::new(build_capacitor_mesh(level));
        let disc = Discretization::new(mesh.clone(), &data.diffusion)?;
        let grid = level_time_grid(level)?;
        info!(
            "capacitor level {level}: {} vertices, {} boundary segments, {} steps",
            mesh.n_vertices(),
            disc.pair.n_flux(),
            grid.n_steps()
        );
        let traj = solve_evolution(&disc, &data, &grid, config.scheme, config.quadrature)?;

        let mirror = mirror_map(mesh.vertices())?;
        let mut defect: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for u in &traj.u {
            for (k, &m) in mirror.iter().enumerate() {
                defect = defect.max((u[k] + u[m]).abs());
                scale = scale.max(u[k].abs());
            }
        }

        let boundary = disc.pair.boundary();
        let mut exterior_points = Vec::new();
        let mut skipped = 0;
        for p in config.sampling.points() {
            match bem::locate(boundary, p) {
                PointLocation::Exterior { .. } => exterior_points.push(p),
                _ => skipped += 1,
            }
        }
        if skipped > 0 {
            info!("capacitor: skipped {skipped} sample points not exterior to the domain");
        }

        fs::create_dir_all(&config.out)?;
        let mut snapshots = Vec::with_capacity(SNAPSHOT_TIMES.len());
        for &t in &SNAPSHOT_TIMES {
            let k = grid.nearest_node(t).max(1);
            let u = &traj.u[k];
            let exterior =
                bem::evaluate_exterior(&disc.pair, &disc.restrict(u), &traj.phi[k - 1], &exterior_points)?;
            let mut s = String::new();
            let _ = writeln!(s, "# time {:e}", grid.nodes()[k]);
            let _ = writeln!(s, "# interior x y u");
            for (p, v) in mesh.vertices().iter().zip(u) {
                let _ = writeln!(s, "interior {:e} {:e} {:e}", p.x, p.y, v);
            }
            let _ = writeln!(s, "# exterior x y u_e near_field");
            for ((p, v), near) in exterior_points.iter().zip(&exterior.values).zip(&exterior.near_field) {
                let _ = writeln!(s, "exterior {:e} {:e} {:e} {}", p.x, p.y, v, u8::from(*near));
            }
            let path = config.out.join(format!("capacitor_t{t:.4}.txt"));
            fs::write(&path, s)?;
            snapshots.push((t, path));
        }
        Ok(CapacitorRun {
            trajectory: traj,
            snapshots,
            antisymmetry_defect: if scale > 0.0 { defect / scale } else { 0.0 },
            skipped_points: skipped,
        })
    })())
}
