//! Run orchestration: initial data, the Picard time loop, the diagnostics
//! CSV and snapshots.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use log::{info, warn};

use crate::coupling::{advance, SimState, StepReport};
use crate::diagnostics::{conservation_report, EnergyLedger, EnergySample, ReferenceScalars};
use crate::error::{NsvError, Result};

use super::config::{parse_config, RunConfig};
use super::initial::make_initial_data;
use super::snapshot::{read_snapshot, write_snapshot, RunMeta, Snapshot};

pub const CSV_HEADER: &str = "t,fluid_energy,particle_functional,visc_dissipation,drag_dissipation,energy_residual,mass,mass_drift,linf_f,linf_bound,m6,picard_iters,contraction_last";
pub const CSV_NAME: &str = "diagnostics.csv";
pub const LATEST_SNAPSHOT: &str = "latest.nsv";

/// Boundary-cell mass share above which a warning is logged.
const BOUNDARY_WARN: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub state: SimState,
    pub csv: PathBuf,
    /// Accepted windows since `t = 0`.
    pub windows: u64,
}

/// File name of an intermediate snapshot taken at time `t`.
pub fn snapshot_name(t: f64) -> String {
    format!("snapshot_t{t:.6}.nsv")
}

fn format_row(ledger: &EnergyLedger, state: &SimState, reference: &ReferenceScalars, iters: u64, contraction: f64) -> String {
    let c = conservation_report(state, reference);
    let floats = [
        state.time(),
        ledger.fluid_energy,
        ledger.particle_functional,
        ledger.visc_dissipation,
        ledger.drag_dissipation,
        ledger.identity_residual,
        c.mass,
        c.mass_drift,
        c.linf_f,
        c.linf_bound,
        c.m6,
    ];
    let mut row = String::with_capacity(16 * 24);
    for x in floats {
        row.push_str(&format!("{x:.16e},"));
    }
    row.push_str(&format!("{iters},{contraction:.16e}"));
    row
}

struct Runner {
    cfg: RunConfig,
    dir: PathBuf,
    ledger: EnergyLedger,
    reference: ReferenceScalars,
    meta: RunMeta,
    csv: BufWriter<File>,
    last_good: SimState,
    /// Mass drift that triggers the next warning; doubles after each one.
    mass_warn_at: f64,
}

impl Runner {
    fn snapshot(&self, state: &SimState) -> Snapshot {
        let mut meta = self.meta.clone();
        meta.initial_energy = self.ledger.initial_energy();
        meta.visc_dissipation = self.ledger.visc_dissipation;
        meta.drag_dissipation = self.ledger.drag_dissipation;
        Snapshot {
            state: state.clone(),
            meta,
        }
    }

    fn write_row(&mut self, state: &SimState) -> Result<()> {
        let row = format_row(
            &self.ledger,
            state,
            &self.reference,
            self.meta.last_iterations,
            self.meta.last_contraction,
        );
        writeln!(self.csv, "{row}")?;
        Ok(())
    }

    fn on_window(&mut self, state: &SimState, report: &StepReport) -> Result<()> {
        self.ledger.push(EnergySample::from_state(state));
        self.meta.window_index += 1;
        self.meta.last_iterations = report.iterations as u64;
        self.meta.last_contraction = report.contraction_factors.last().copied().unwrap_or(0.0);
        let c = conservation_report(state, &self.reference);
        if c.mass_violated(self.mass_warn_at) {
            warn!("t={:.6}: relative mass drift {:.3e}", c.t, c.mass_drift);
            while c.mass_violated(self.mass_warn_at) {
                self.mass_warn_at *= 2.0;
            }
        }
        if c.max_principle_violated() {
            warn!("t={:.6}: max f {:.6e} above bound {:.6e}", c.t, c.linf_f, c.linf_bound);
        }
        if c.boundary_mass_fraction > BOUNDARY_WARN {
            warn!(
                "t={:.6}: {:.3e} of the mass sits on the velocity boundary",
                c.t, c.boundary_mass_fraction
            );
        }
        let at_end = state.time() >= self.cfg.time.t_end;
        if self.meta.window_index % self.cfg.output.cadence as u64 == 0 || at_end {
            self.write_row(state)?;
            self.csv.flush()?;
        }
        if self.cfg.output.snapshots && state.time() >= self.meta.next_snapshot - 1e-9 {
            let interval = self.cfg.output.snapshot_interval;
            let path = self.dir.join(snapshot_name(state.time()));
            while self.meta.next_snapshot <= state.time() + 1e-9 {
                self.meta.next_snapshot += interval;
            }
            write_snapshot(&path, &self.snapshot(state))?;
            info!("snapshot {}", path.display());
        }
        self.last_good = state.clone();
        Ok(())
    }

    fn finish(mut self, result: Result<SimState>) -> Result<RunOutcome> {
        self.csv.flush()?;
        let latest = self.dir.join(LATEST_SNAPSHOT);
        match result {
            Ok(state) => {
                if self.cfg.output.snapshots {
                    write_snapshot(&latest, &self.snapshot(&state))?;
                }
                info!(
                    "finished at t={:.6} after {} windows",
                    state.time(),
                    self.meta.window_index
                );
                Ok(RunOutcome {
                    state,
                    csv: self.dir.join(CSV_NAME),
                    windows: self.meta.window_index,
                })
            }
            Err(e) => {
                let last = self.last_good.clone();
                write_snapshot(&latest, &self.snapshot(&last))?;
                warn!(
                    "run aborted; last good state t={:.6} saved to {}",
                    last.time(),
                    latest.display()
                );
                Err(e)
            }
        }
    }

    fn go(mut self, state: SimState) -> Result<RunOutcome> {
        let t_end = self.cfg.time.t_end;
        let picard = self.cfg.picard();
        let result = advance(state, t_end, &picard, |s, r| self.on_window(s, r));
        self.finish(result)
    }
}

fn first_snapshot_time(cfg: &RunConfig, t: f64) -> f64 {
    let dt = cfg.output.snapshot_interval;
    if !cfg.output.snapshots || dt <= 0.0 {
        return f64::INFINITY;
    }
    let mut next = dt;
    while next <= t + 1e-9 {
        next += dt;
    }
    next
}

/// Runs `cfg` from its initial data, writing into `dir`.
pub fn run(cfg: &RunConfig, dir: &Path) -> Result<RunOutcome> {
    cfg.validate()?;
    fs::create_dir_all(dir)?;
    let state = make_initial_data(cfg)?;
    let ledger = EnergyLedger::start(EnergySample::from_state(&state));
    let reference = ReferenceScalars::from_state(&state);
    let mut csv = BufWriter::new(File::create(dir.join(CSV_NAME))?);
    writeln!(csv, "{CSV_HEADER}")?;
    let meta = RunMeta {
        window_index: 0,
        last_iterations: 0,
        last_contraction: 0.0,
        next_snapshot: first_snapshot_time(cfg, state.time()),
        reference,
        initial_energy: ledger.initial_energy(),
        visc_dissipation: 0.0,
        drag_dissipation: 0.0,
        config: cfg.render(),
    };
    let mut runner = Runner {
        cfg: cfg.clone(),
        dir: dir.to_path_buf(),
        ledger,
        reference,
        meta,
        csv,
        last_good: state.clone(),
        mass_warn_at: cfg.time.mass_tol,
    };
    runner.write_row(&state)?;
    runner.go(state)
}

/// Keeps the header and the rows with `t ≤ t_snap` of an existing CSV.
fn truncated_csv(path: &Path, t_snap: f64) -> Result<Option<String>> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err(NsvError::Snapshot(format!(
            "{} has an unexpected header; refusing to append",
            path.display()
        )));
    }
    let mut out = format!("{CSV_HEADER}\n");
    for line in lines {
        let t: f64 = line
            .split(',')
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| NsvError::Snapshot(format!("malformed row in {}", path.display())))?;
        if t > t_snap {
            break;
        }
        out.push_str(line);
        out.push('\n');
    }
    Ok(Some(out))
}

/// Continues the run stored in `snapshot` up to `until`. Rows already in
/// `dir`'s CSV past the snapshot time are dropped; a fresh directory gets a
/// header and the snapshot row.
pub fn resume(snapshot: &Path, until: f64, dir: Option<&Path>) -> Result<RunOutcome> {
    let snap = read_snapshot(snapshot)?;
    let mut cfg = parse_config(&snap.meta.config)?;
    let t0 = snap.state.time();
    if !(until.is_finite() && until >= t0) {
        return Err(NsvError::config(
            "time.t_end",
            format!("resume target {until} precedes the snapshot time {t0}"),
        ));
    }
    cfg.time.t_end = until;
    let dir = match dir {
        Some(d) => d.to_path_buf(),
        None => PathBuf::from(&cfg.output.directory),
    };
    cfg.output.directory = dir.to_string_lossy().into_owned();
    fs::create_dir_all(&dir)?;
    let csv_path = dir.join(CSV_NAME);
    let kept = truncated_csv(&csv_path, t0)?;
    let ledger = EnergyLedger::resume(
        EnergySample::from_state(&snap.state),
        snap.meta.initial_energy,
        snap.meta.visc_dissipation,
        snap.meta.drag_dissipation,
    );
    let mut file = BufWriter::new(File::create(&csv_path)?);
    let fresh = kept.is_none();
    file.write_all(kept.unwrap_or_else(|| format!("{CSV_HEADER}\n")).as_bytes())?;
    let mut meta = snap.meta.clone();
    meta.config = cfg.render();
    let mut runner = Runner {
        reference: snap.meta.reference,
        mass_warn_at: cfg.time.mass_tol,
        cfg,
        dir,
        ledger,
        meta,
        csv: file,
        last_good: snap.state.clone(),
    };
    if fresh {
        runner.write_row(&snap.state)?;
    }
    info!("resuming from t={t0:.6} to t={until:.6}");
    runner.go(snap.state)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(dir_name: &str) -> RunConfig {
        let mut cfg = RunConfig::new(8, 0.04);
        cfg.kinetic.n_v = 8;
        cfg.kinetic.v_max = 4.0;
        cfg.output.directory = dir_name.into();
        cfg
    }

    #[test]
    fn rows_follow_cadence_and_end() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small("x");
        cfg.time.t_end = 0.05;
        cfg.output.cadence = 2;
        let out = run(&cfg, dir.path()).unwrap();
        assert_eq!(out.windows, 5);
        let text = fs::read_to_string(out.csv).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        // t = 0, windows 2 and 4, and the final window.
        assert_eq!(lines.len(), 5);
        for l in &lines[1..] {
            assert_eq!(l.split(',').count(), 13);
        }
        assert!(lines[4].starts_with(&format!("{:.16e},", 0.05)));
        assert!(dir.path().join(LATEST_SNAPSHOT).exists());
    }

    #[test]
    fn non_convergence_flushes_last_good_state() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small("x");
        cfg.picard.max_iter = 2;
        cfg.picard.tol = 1e-300;
        cfg.picard.max_halvings = 0;
        let err = run(&cfg, dir.path()).unwrap_err();
        assert!(matches!(err, NsvError::NonConvergence { .. }));
        let snap = read_snapshot(&dir.path().join(LATEST_SNAPSHOT)).unwrap();
        assert_eq!(snap.state.time(), 0.0);
        assert_eq!(snap.meta.window_index, 0);
    }

    #[test]
    fn resume_rejects_going_backwards() {
        let dir = tempfile::tempdir().unwrap();
        run(&small("x"), dir.path()).unwrap();
        let err = resume(&dir.path().join(LATEST_SNAPSHOT), 0.01, Some(dir.path())).unwrap_err();
        assert!(matches!(err, NsvError::Config { key, .. } if key == "time.t_end"));
    }
}
