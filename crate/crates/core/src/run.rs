//! Driving a scenario through time and writing its CSV output.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::diagnostics::{
    conserved_totals, entropy, l1_self_error, observed_orders, rel_diff, ConservedTotals, EntropyRecord,
};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::moments::{species_moments_unchecked, SpeciesMoments};
use crate::scenarios::{Scenario, ScenarioConfig};
use crate::stepper::{SimState, StepReport, Stepper};

/// Format with 17 significant digits.
pub fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

/// One row of `totals.csv`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TotalsRow {
    pub time: f64,
    pub dt: f64,
    pub totals: ConservedTotals,
    pub entropy: EntropyRecord,
    pub max_newton_iterations: usize,
    /// Domain mixture velocity and temperature (output units).
    pub u_mix: [f64; 3],
    pub t_mix: f64,
    pub guard_triggers: usize,
}

pub const TOTALS_HEADER: [&str; 17] = [
    "time",
    "dt",
    "mass_1",
    "mass_2",
    "momentum_x",
    "momentum_y",
    "momentum_z",
    "energy",
    "entropy",
    "entropy_rate",
    "max_newton_iterations",
    "u_mix_x",
    "u_mix_y",
    "u_mix_z",
    "t_mix",
    "guard_triggers",
    "clipped_mass",
];

/// Scenario, stepper and evolving state.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub scenario: Scenario,
    pub stepper: Stepper,
    pub state: SimState,
    pub entropy: EntropyRecord,
}

impl Simulation {
    pub fn new(scenario: Scenario) -> Result<Self> {
        let state = scenario.initial_state()?;
        Self::from_state(scenario, state)
    }

    pub fn from_state(scenario: Scenario, state: SimState) -> Result<Self> {
        let stepper = scenario.stepper()?;
        let h = entropy([&state.f[0], &state.f[1]], &scenario.grids, scenario.mesh.dx)?;
        Ok(Simulation {
            scenario,
            stepper,
            state,
            entropy: EntropyRecord { h, dh_dt: 0.0 },
        })
    }

    pub fn totals(&self) -> ConservedTotals {
        let s = &self.scenario;
        conserved_totals([&self.state.f[0], &self.state.f[1]], &s.grids, &s.species, s.mesh.dx)
    }

    /// Global mixture velocity and temperature (internal units) from the totals.
    pub fn global_mixture(totals: &ConservedTotals, scenario: &Scenario) -> ([f64; 3], f64) {
        let rho = totals.mass[0] + totals.mass[1];
        let n = totals.mass[0] / scenario.species[0].mass + totals.mass[1] / scenario.species[1].mass;
        if !(rho > 0.0) {
            return ([0.0; 3], 0.0);
        }
        let u = totals.momentum.map(|p| p / rho);
        let u2: f64 = u.iter().map(|x| x * x).sum();
        (u, 2.0 * (totals.energy - 0.5 * rho * u2) / (3.0 * n))
    }

    pub fn row(&self, report: Option<&StepReport>) -> TotalsRow {
        let totals = self.totals();
        let (u, t) = Self::global_mixture(&totals, &self.scenario);
        TotalsRow {
            time: self.state.time,
            dt: report.map_or(0.0, |r| r.dt),
            totals,
            entropy: self.entropy,
            max_newton_iterations: report.map_or(0, |r| r.max_newton_iterations),
            u_mix: u,
            t_mix: self.scenario.config.temperature_out(t),
            guard_triggers: self.state.guard_triggers,
        }
    }

    /// Step size the run loop would take next.
    pub fn next_dt(&self, t_end: f64) -> f64 {
        self.stepper.default_dt().min(t_end - self.state.time)
    }

    pub fn step(&mut self, dt: f64) -> Result<StepReport> {
        let report = self.stepper.step(&mut self.state, dt)?;
        let s = &self.scenario;
        let h = entropy([&self.state.f[0], &self.state.f[1]], &s.grids, s.mesh.dx)?;
        self.entropy = self.entropy.next(h, report.dt);
        Ok(report)
    }

    /// Whether `t_end` has been reached up to rounding of the accumulated time.
    pub fn finished(&self, t_end: f64) -> bool {
        t_end - self.state.time <= 1e-6 * self.stepper.default_dt().min(t_end.abs().max(f64::MIN_POSITIVE))
    }

    /// Step until `t_end`, calling `observer` after each accepted step.
    pub fn run_to(
        &mut self,
        t_end: f64,
        mut observer: impl FnMut(&Simulation, &StepReport) -> Result<()>,
    ) -> Result<()> {
        while !self.finished(t_end) {
            let dt = self.next_dt(t_end);
            let report = self.step(dt)?;
            observer(self, &report)?;
        }
        Ok(())
    }

    /// Per-cell species moments (internal units).
    pub fn cell_moments(&self) -> Vec<[SpeciesMoments; 2]> {
        let s = &self.scenario;
        (0..s.mesh.cells)
            .map(|k| {
                std::array::from_fn(|i| species_moments_unchecked(self.state.f[i].cell(k), &s.grids[i], &s.species[i]))
            })
            .collect()
    }
}

fn write_meta(out: &mut String, scenario: &Scenario, time: f64, step: usize) {
    let c = &scenario.config;
    out.push_str(&format!(
        "# scenario: {}\n# units: {:?}\n# time: {}\n# step: {}\n",
        c.name,
        c.units,
        fmt(time),
        step
    ));
    for (i, g) in scenario.grids.iter().enumerate() {
        out.push_str(&format!(
            "# grid_{}: nodes_per_axis={} center=({},{},{}) thermal_speed={} dv={} axis_min={} axis_max={}\n",
            i + 1,
            g.nodes_per_axis(),
            fmt(g.center()[0]),
            fmt(g.center()[1]),
            fmt(g.center()[2]),
            fmt(g.thermal_speed()),
            fmt(g.dv()),
            fmt(g.axis_min(0)),
            fmt(g.axis_max(0))
        ));
    }
}

pub const MOMENTS_HEADER: [&str; 7] = ["x", "n_1", "u1_1", "t_1", "n_2", "u1_2", "t_2"];

/// `moments_XXXX.csv` content.
pub fn moments_csv(sim: &Simulation) -> Result<String> {
    let s = &sim.scenario;
    let mut out = String::new();
    write_meta(&mut out, s, sim.state.time, sim.state.step);
    let mut w = csv::Writer::from_writer(vec![]);
    w.write_record(MOMENTS_HEADER)?;
    for (k, m) in sim.cell_moments().iter().enumerate() {
        let mut rec = vec![fmt(s.mesh.center(k))];
        for sm in m {
            rec.push(fmt(sm.n));
            rec.push(fmt(sm.u[0]));
            rec.push(fmt(s.config.temperature_out(sm.t)));
        }
        w.write_record(&rec)?;
    }
    out.push_str(&String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.into_error()))?).expect("utf-8 csv"));
    Ok(out)
}

/// f on the line through the grid centre parallel to v¹, interpolated bilinearly
/// in (v², v³) when the axis has no centre node.
pub fn axis_slice(f: &[f64], grid: &crate::grid::VelocityGrid) -> Vec<(f64, f64)> {
    let n = grid.nodes_per_axis();
    let mids: Vec<usize> = if n % 2 == 1 {
        vec![n / 2]
    } else {
        vec![n / 2 - 1, n / 2]
    };
    let w = 1.0 / (mids.len() * mids.len()) as f64;
    let v1 = grid.axis_coords(0);
    (0..n)
        .map(|i| {
            let mut s = 0.0;
            for &j in &mids {
                for &k in &mids {
                    s += w * f[grid.index(i, j, k)];
                }
            }
            (v1[i], s)
        })
        .collect()
}

/// `slice_XXXX.csv` content.
pub fn slice_csv(sim: &Simulation, cells: &[usize]) -> Result<String> {
    let s = &sim.scenario;
    let mut out = String::new();
    write_meta(&mut out, s, sim.state.time, sim.state.step);
    let mut w = csv::Writer::from_writer(vec![]);
    w.write_record(["cell", "x", "species", "v1", "f"])?;
    for &k in cells {
        for i in 0..2 {
            for (v, f) in axis_slice(sim.state.f[i].cell(k), &s.grids[i]) {
                w.write_record([
                    k.to_string(),
                    fmt(s.mesh.center(k)),
                    (i + 1).to_string(),
                    fmt(v),
                    fmt(f),
                ])?;
            }
        }
    }
    out.push_str(&String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.into_error()))?).expect("utf-8 csv"));
    Ok(out)
}

fn totals_record(r: &TotalsRow, clipped: f64) -> Vec<String> {
    let t = &r.totals;
    vec![
        fmt(r.time),
        fmt(r.dt),
        fmt(t.mass[0]),
        fmt(t.mass[1]),
        fmt(t.momentum[0]),
        fmt(t.momentum[1]),
        fmt(t.momentum[2]),
        fmt(t.energy),
        fmt(r.entropy.h),
        fmt(r.entropy.dh_dt),
        r.max_newton_iterations.to_string(),
        fmt(r.u_mix[0]),
        fmt(r.u_mix[1]),
        fmt(r.u_mix[2]),
        fmt(r.t_mix),
        r.guard_triggers.to_string(),
        fmt(clipped),
    ]
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GridInfo {
    pub nodes_per_axis: usize,
    pub center: [f64; 3],
    pub thermal_speed: f64,
    pub dv: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunManifest {
    pub scenario: String,
    pub config_hash: String,
    pub code_version: String,
    pub config: ScenarioConfig,
    pub grids: Vec<GridInfo>,
    pub threads: usize,
    pub outputs: Vec<String>,
    pub status: String,
    pub started_unix: f64,
    pub finished_unix: Option<f64>,
    pub wall_seconds: Option<f64>,
    pub steps: usize,
    pub final_time: f64,
    pub error: Option<String>,
}

pub fn config_hash(config: &ScenarioConfig) -> Result<String> {
    let bytes = serde_json::to_vec(config)?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0.0, |d| d.as_secs_f64())
}

/// Summary of a completed run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub steps: usize,
    pub final_time: f64,
    pub guard_triggers: usize,
    pub max_drift: f64,
    pub max_entropy_increase: f64,
    pub snapshots: usize,
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    fs::write(path, content).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

/// Run `scenario` to its end time writing totals, snapshots, slices and a manifest into `out_dir`.
pub fn run_scenario(scenario: Scenario, out_dir: &Path) -> Result<RunSummary> {
    fs::create_dir_all(out_dir)?;
    let start = Instant::now();
    let config = scenario.config.clone();
    let mut manifest = RunManifest {
        scenario: config.name.clone(),
        config_hash: config_hash(&config)?,
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        grids: scenario
            .grids
            .iter()
            .map(|g| GridInfo {
                nodes_per_axis: g.nodes_per_axis(),
                center: g.center(),
                thermal_speed: g.thermal_speed(),
                dv: g.dv(),
            })
            .collect(),
        config,
        threads: rayon::current_num_threads(),
        outputs: vec!["totals.csv".into()],
        status: "running".into(),
        started_unix: unix_now(),
        finished_unix: None,
        wall_seconds: None,
        steps: 0,
        final_time: 0.0,
        error: None,
    };
    let manifest_path = out_dir.join("manifest.json");
    write_file(&manifest_path, &serde_json::to_string_pretty(&manifest)?)?;

    let result = (|| -> Result<RunSummary> {
        let slice_cells = scenario.slice_cells();
        let t_end = scenario.config.t_end;
        let every = scenario.config.output.snapshot_every;
        let mut sim = Simulation::new(scenario)?;
        let mut totals = csv::Writer::from_path(out_dir.join("totals.csv"))?;
        totals.write_record(TOTALS_HEADER)?;
        let first = sim.row(None);
        totals.write_record(totals_record(&first, sim.state.clipped_mass))?;
        let mut outputs = Vec::new();
        let snapshot = |sim: &Simulation, outputs: &mut Vec<String>| -> Result<()> {
            let idx = outputs.iter().filter(|o: &&String| o.starts_with("moments_")).count();
            let name = format!("moments_{idx:04}.csv");
            write_file(&out_dir.join(&name), &moments_csv(sim)?)?;
            outputs.push(name);
            if !slice_cells.is_empty() {
                let name = format!("slice_{idx:04}.csv");
                write_file(&out_dir.join(&name), &slice_csv(sim, &slice_cells)?)?;
                outputs.push(name);
            }
            Ok(())
        };
        snapshot(&sim, &mut outputs)?;
        let mut last_snapshot = 0;
        let mut max_drift = 0.0f64;
        let mut max_increase = f64::NEG_INFINITY;
        let mut prev_h = sim.entropy.h;
        sim.run_to(t_end, |sim, report| {
            let row = sim.row(Some(report));
            totals.write_record(totals_record(&row, sim.state.clipped_mass))?;
            max_drift = max_drift.max(row.totals.max_relative_drift(&first.totals));
            max_increase = max_increase.max(row.entropy.h - prev_h);
            prev_h = row.entropy.h;
            if every > 0 && sim.state.step % every == 0 {
                snapshot(sim, &mut outputs)?;
                last_snapshot = sim.state.step;
            }
            if sim.state.step % 100 == 0 {
                log::info!("step {} t = {:e} dt = {:e}", sim.state.step, sim.state.time, report.dt);
            }
            Ok(())
        })?;
        if last_snapshot != sim.state.step {
            snapshot(&sim, &mut outputs)?;
        }
        totals.flush()?;
        let snapshots = outputs.iter().filter(|o| o.starts_with("moments_")).count();
        manifest.outputs.extend(outputs);
        Ok(RunSummary {
            steps: sim.state.step,
            final_time: sim.state.time,
            guard_triggers: sim.state.guard_triggers,
            max_drift,
            max_entropy_increase: max_increase,
            snapshots,
        })
    })();

    manifest.finished_unix = Some(unix_now());
    manifest.wall_seconds = Some(start.elapsed().as_secs_f64());
    match &result {
        Ok(s) => {
            manifest.status = "completed".into();
            manifest.steps = s.steps;
            manifest.final_time = s.final_time;
        }
        Err(e) => {
            manifest.status = "failed".into();
            manifest.error = Some(e.to_string());
        }
    }
    write_file(&manifest_path, &serde_json::to_string_pretty(&manifest)?)?;
    result
}

/// Parsed `moments_XXXX.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentsTable {
    pub time: f64,
    pub rows: Vec<[f64; 7]>,
}

pub fn read_moments(path: &Path) -> Result<MomentsTable> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    let time = text
        .lines()
        .find_map(|l| l.strip_prefix("# time: "))
        .and_then(|t| t.trim().parse().ok())
        .ok_or_else(|| Error::invalid(format!("{}: missing time header", path.display())))?;
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let headers = r.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != MOMENTS_HEADER {
        return Err(Error::invalid(format!(
            "{}: unexpected columns {headers:?}",
            path.display()
        )));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let mut row = [0.0; 7];
        for (c, v) in rec.iter().enumerate().take(7) {
            row[c] = v
                .parse()
                .map_err(|_| Error::invalid(format!("{}: bad number '{v}'", path.display())))?;
        }
        rows.push(row);
    }
    Ok(MomentsTable { time, rows })
}

fn snapshot_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", dir.display()))))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("moments_") && n.ends_with(".csv"))
        })
        .collect();
    files.sort();
    Ok(files)
}

/// Largest |r| per compared quantity over all snapshots.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ComparisonSummary {
    pub snapshots: usize,
    /// Order: n_1, u1_1, t_1, n_2, u1_2, t_2.
    pub max_abs: [f64; 6],
}

pub const RELDIFF_HEADER: [&str; 7] = ["x", "r_n_1", "r_u1_1", "r_t_1", "r_n_2", "r_u1_2", "r_t_2"];

/// Relative differences of two runs' matching snapshots, written as `reldiff_XXXX.csv`.
pub fn compare_runs(a: &Path, b: &Path, out: &Path) -> Result<ComparisonSummary> {
    let (fa, fb) = (snapshot_files(a)?, snapshot_files(b)?);
    if fa.is_empty() || fa.len() != fb.len() {
        return Err(Error::invalid(format!(
            "runs have {} and {} snapshots; need equal non-zero counts",
            fa.len(),
            fb.len()
        )));
    }
    fs::create_dir_all(out)?;
    let mut summary = ComparisonSummary::default();
    for (idx, (pa, pb)) in fa.iter().zip(&fb).enumerate() {
        let (ta, tb) = (read_moments(pa)?, read_moments(pb)?);
        if ta.rows.len() != tb.rows.len() {
            return Err(Error::invalid(format!(
                "{} and {} have different meshes",
                pa.display(),
                pb.display()
            )));
        }
        if (ta.time - tb.time).abs() > 1e-9 * ta.time.abs().max(tb.time.abs()) {
            return Err(Error::invalid(format!(
                "snapshot times differ: {} vs {}",
                fmt(ta.time),
                fmt(tb.time)
            )));
        }
        let mut w = csv::Writer::from_path(out.join(format!("reldiff_{idx:04}.csv")))?;
        w.write_record(RELDIFF_HEADER)?;
        for (ra, rb) in ta.rows.iter().zip(&tb.rows) {
            if (ra[0] - rb[0]).abs() > 1e-9 * ra[0].abs().max(rb[0].abs()).max(f64::MIN_POSITIVE) {
                return Err(Error::invalid("cell centres differ between runs"));
            }
            let mut rec = vec![fmt(ra[0])];
            for c in 0..6 {
                let r = rel_diff(ra[c + 1], rb[c + 1]);
                summary.max_abs[c] = summary.max_abs[c].max(r.abs());
                rec.push(fmt(r));
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        summary.snapshots += 1;
    }
    Ok(summary)
}

/// One level of a self-convergence study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelResult {
    pub level: u32,
    pub cells: usize,
    pub dt: f64,
    pub steps: usize,
    /// ‖f_i(l) − f_i(l+1)‖ per species; absent on the finest level.
    pub error: Option<[f64; 2]>,
}

/// Base step for a convergence study: the configured step, or the CFL step
/// shortened so that a whole number of steps reaches t_end.
pub fn convergence_base_dt(scenario: &Scenario) -> Result<f64> {
    let t_end = scenario.config.t_end;
    Ok(match scenario.config.dt {
        Some(dt) => dt,
        None => {
            let cfl = scenario.stepper()?.cfl_dt();
            t_end / (t_end / cfl).ceil()
        }
    })
}

fn final_fields(config: ScenarioConfig, dt: f64) -> Result<([Field; 2], usize, Scenario)> {
    let scenario = Scenario::build(ScenarioConfig { dt: Some(dt), ..config })?;
    let t_end = scenario.config.t_end;
    let steps = (t_end / dt).round() as usize;
    let mut sim = Simulation::new(scenario)?;
    for _ in 0..steps {
        let report = sim.stepper.step(&mut sim.state, dt)?;
        if report.guard_triggers > 0 {
            return Err(Error::invalid(format!(
                "positivity guard shortened a convergence step at t = {:e}",
                sim.state.time
            )));
        }
    }
    Ok((sim.state.f, steps, sim.scenario))
}

/// Runs on meshes 2^l·K, l = 0..levels−1, with Δt halved per level.
pub fn convergence_study(config: &ScenarioConfig, levels: u32) -> Result<Vec<LevelResult>> {
    if levels < 2 {
        return Err(Error::Config("a convergence study needs at least two levels".into()));
    }
    let base = Scenario::build(config.clone())?;
    let dt0 = convergence_base_dt(&base)?;
    let mut results: Vec<LevelResult> = Vec::new();
    let mut previous: Option<([Field; 2], Scenario)> = None;
    for l in 0..levels {
        let cfg = config.refined(l);
        let dt = dt0 / f64::from(1u32 << l);
        let cells = cfg.mesh.cells;
        let (f, steps, scenario) = final_fields(cfg, dt)?;
        log::info!("convergence level {l}: {cells} cells, {steps} steps");
        if let Some((coarse, cs)) = previous.take() {
            let e: [f64; 2] = [
                l1_self_error(&coarse[0], &f[0], &cs.grids[0], cs.mesh.dx)?,
                l1_self_error(&coarse[1], &f[1], &cs.grids[1], cs.mesh.dx)?,
            ];
            results.last_mut().expect("previous level").error = Some(e);
        }
        results.push(LevelResult {
            level: l,
            cells,
            dt,
            steps,
            error: None,
        });
        previous = Some((f, scenario));
    }
    Ok(results)
}

/// Observed orders per species from consecutive errors.
pub fn convergence_orders(results: &[LevelResult]) -> [Vec<f64>; 2] {
    std::array::from_fn(|i| {
        let e: Vec<f64> = results.iter().filter_map(|r| r.error.map(|e| e[i])).collect();
        observed_orders(&e)
    })
}

/// `convergence.csv` content.
pub fn convergence_csv(results: &[LevelResult]) -> Result<String> {
    let orders = convergence_orders(results);
    let mut w = csv::Writer::from_writer(vec![]);
    w.write_record([
        "level", "cells", "dt", "steps", "error_1", "error_2", "order_1", "order_2",
    ])?;
    for (l, r) in results.iter().enumerate() {
        let e = r
            .error
            .map_or([String::new(), String::new()], |e| [fmt(e[0]), fmt(e[1])]);
        let o = |i: usize| orders[i].get(l).map_or(String::new(), |v| fmt(*v));
        w.write_record([
            r.level.to_string(),
            r.cells.to_string(),
            fmt(r.dt),
            r.steps.to_string(),
            e[0].clone(),
            e[1].clone(),
            o(0),
            o(1),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.into_error()))?).expect("utf-8 csv"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::preset;
    use approx::assert_relative_eq;

    fn small(name: &str, n: usize, cells: usize) -> ScenarioConfig {
        let mut c = preset(name).unwrap();
        c.velocity_nodes = n;
        c.mesh.cells = cells;
        c
    }

    #[test]
    fn formatting_keeps_17_digits() {
        let v = 0.1 + 0.2;
        assert_eq!(fmt(v).parse::<f64>().unwrap(), v);
        assert_eq!(fmt(1.0), "1.0000000000000000e0");
    }

    #[test]
    fn toy_run_writes_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = small("toy", 10, 1);
        c.t_end = 0.05;
        c.output.snapshot_every = 2;
        let summary = run_scenario(Scenario::build(c).unwrap(), dir.path()).unwrap();
        assert_eq!(summary.steps, 5);
        assert_relative_eq!(summary.final_time, 0.05, max_relative = 1e-12);
        assert!(summary.max_drift < 1e-11);
        assert!(summary.max_entropy_increase <= 0.0);
        assert_eq!(summary.snapshots, 4);
        let totals = fs::read_to_string(dir.path().join("totals.csv")).unwrap();
        assert_eq!(totals.lines().count(), 7);
        assert!(totals.starts_with(&TOTALS_HEADER.join(",")));
        let m: RunManifest =
            serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
        assert_eq!(m.status, "completed");
        assert_eq!(m.steps, 5);
        assert!(m.outputs.contains(&"slice_0003.csv".to_string()));
        let t = read_moments(&dir.path().join("moments_0003.csv")).unwrap();
        assert_relative_eq!(t.time, 0.05, max_relative = 1e-12);
        assert_eq!(t.rows.len(), 1);
    }

    #[test]
    fn identical_runs_compare_to_zero() {
        let (a, b, out) = (
            tempfile::tempdir().unwrap(),
            tempfile::tempdir().unwrap(),
            tempfile::tempdir().unwrap(),
        );
        let mut c = small("sod", 6, 8);
        c.t_end = 0.002;
        c.output.snapshot_every = 1;
        run_scenario(Scenario::build(c.clone()).unwrap(), a.path()).unwrap();
        run_scenario(Scenario::build(c).unwrap(), b.path()).unwrap();
        let s = compare_runs(a.path(), b.path(), out.path()).unwrap();
        assert!(s.snapshots >= 2);
        assert_eq!(s.max_abs, [0.0; 6]);
        assert!(out.path().join("reldiff_0000.csv").exists());
        assert!(compare_runs(a.path(), out.path(), out.path()).is_err());
    }

    #[test]
    fn failed_run_marks_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = small("toy", 6, 1);
        c.t_end = 0.01;
        let scenario = Scenario::build(c).unwrap();
        // an unwritable output path
        let file = dir.path().join("plain");
        fs::write(&file, "x").unwrap();
        assert!(run_scenario(scenario, &file.join("sub")).is_err());
    }

    #[test]
    fn axis_slice_interpolates_the_centre_line() {
        let sp = crate::grid::SpeciesParams::new(1.0, 0).unwrap();
        for n in [4, 5] {
            let g = crate::grid::VelocityGrid::build(&sp, [0.0; 3], 1.0, n).unwrap();
            let f = g.map_nodes(|v| 2.0 + v[0] + v[1] * v[1] + v[2]);
            let s = axis_slice(&f, &g);
            let m = g.axis_coords(1)[n / 2];
            let expected_transverse = if n % 2 == 1 { 0.0 } else { m * m };
            for (v, val) in s {
                assert_relative_eq!(val, 2.0 + v + expected_transverse, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn convergence_harness_levels() {
        let mut c = small("appendix_c1", 6, 5);
        c.t_end = 0.02;
        let r = convergence_study(&c, 3).unwrap();
        assert_eq!(r.len(), 3);
        assert_eq!(r[1].cells, 10);
        assert_relative_eq!(r[0].dt, 2.0 * r[1].dt);
        assert!(r[0].error.is_some() && r[1].error.is_some() && r[2].error.is_none());
        let o = convergence_orders(&r);
        assert_eq!(o[0].len(), 1);
        assert_eq!(o[0], o[1]);
        let csv = convergence_csv(&r).unwrap();
        assert_eq!(csv.lines().count(), 4);
        assert!(convergence_study(&c, 1).is_err());
    }
}
