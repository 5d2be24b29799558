//! Acceptance scenarios: exact-solution regressions, the coupled
//! Taylor–Green + Maxwellian-bump run at three window lengths, a threshold
//! search for the Picard window and a determinism/resume check.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use log::info;

use crate::coupling::{advance, picard_solve, PicardConfig, SimState, StepReport};
use crate::diagnostics::{
    conservation_report, vorticity_residual, EnergyLedger, EnergySample, ReferenceScalars,
};
use crate::error::Result;
use crate::io::{make_initial_data, resume, run, RunConfig, CSV_HEADER, LATEST_SNAPSHOT};
use crate::kinetic::{
    ConstantSampler, DistributionFunction, KineticScheme, PhaseGrid, VelocityInterp,
};
use crate::spectral::{taylor_green, SpectralGrid};

/// The coupled scenario at its finest level: `n_x = n_v = 32`, `v_max = 6`,
/// `t ∈ [0, 1]`, window `0.01`, two Gauss–Lobatto nodes, Taylor–Green fluid
/// and a unit Maxwellian bump drifting at `(1, 0)`.
pub fn acceptance_config() -> RunConfig {
    RunConfig::new(32, 1.0)
}

/// Free-flow initial datum: smooth periodic bump in `x` times
/// `exp(−(|v|²/(2·2.2²))²)`.
pub fn free_flow_datum(x: [f64; 2], v: [f64; 2]) -> f64 {
    let r2 = 2.0 * (2.0 - (x[0] - PI).cos() - (x[1] - PI).cos());
    let w2 = v[0] * v[0] + v[1] * v[1];
    (-(r2 / (2.0 * 1.5 * 1.5)).powi(2)).exp() * (-(w2 / (2.0 * 2.2 * 2.2)).powi(2)).exp()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn line(&self) -> String {
        format!(
            "criterion {:>2} {} {}: {}",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.detail
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TaylorGreenResult {
    pub linf_error: f64,
    pub seconds: f64,
}

/// Fluid-only run of the Taylor–Green vortex at `n_x = 64` to `t = 1`.
pub fn taylor_green_regression(picard: &PicardConfig) -> Result<TaylorGreenResult> {
    let space = SpectralGrid::new(64, 2.0 * PI)?;
    let phase = PhaseGrid::new(space.clone(), 4, 6.0)?;
    let start = Instant::now();
    let state = SimState::new(taylor_green(0.0, &space)?, DistributionFunction::zeros(&phase, 0.0))?;
    let end = advance(state, 1.0, picard, |_, _| Ok(()))?;
    let seconds = start.elapsed().as_secs_f64();
    let exact = taylor_green(1.0, &space)?;
    Ok(TaylorGreenResult {
        linf_error: end.u().as_vector().sub(exact.as_vector()).max_abs(),
        seconds,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct FreeFlowLevel {
    pub n: usize,
    pub steps: usize,
    /// `max |f − f_exact| / max |f_exact|` at `t_end`.
    pub rel_error: f64,
    /// Largest `max f(t) / (e^{2t} max f₀)` over the steps.
    pub bound_ratio: f64,
    /// The same ratio at `t_end`.
    pub final_ratio: f64,
    pub seconds: f64,
}

/// Semi-Lagrangian run with `u ≡ 0` on an `n⁴` grid, `v_max = 6`.
pub fn free_flow_level(n: usize, steps: usize, t_end: f64, velocity: VelocityInterp) -> Result<FreeFlowLevel> {
    let grid = PhaseGrid::new(SpectralGrid::new(n, 2.0 * PI)?, n, 6.0)?;
    let scheme = KineticScheme {
        substeps: 1,
        velocity,
        ..Default::default()
    };
    let sampler = ConstantSampler::zero(grid.space());
    let mut f = DistributionFunction::from_fn(&grid, 0.0, free_flow_datum);
    let m0 = f.max();
    let dt = t_end / steps as f64;
    let start = Instant::now();
    let mut bound_ratio: f64 = 1.0;
    for _ in 0..steps {
        f = scheme.step(&f, &sampler, dt)?;
        bound_ratio = bound_ratio.max(f.max() / ((2.0 * f.time()).exp() * m0));
    }
    let seconds = start.elapsed().as_secs_f64();
    let exact = grid.sample_free_solution(free_flow_datum, f.time());
    let err = f
        .values()
        .iter()
        .zip(exact.values())
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    Ok(FreeFlowLevel {
        n,
        steps,
        rel_error: err / exact.max(),
        bound_ratio,
        final_ratio: f.max() / ((2.0 * f.time()).exp() * m0),
        seconds,
    })
}

/// Everything the acceptance checks need from one coupled run.
#[derive(Clone, Debug, PartialEq)]
pub struct CoupledSummary {
    pub n_x: usize,
    pub n_v: usize,
    pub window: f64,
    pub t_end: f64,
    pub windows: usize,
    pub seconds: f64,
    pub initial_energy: f64,
    /// `max_t |identity residual| / E(0)`.
    pub energy_residual: f64,
    /// Largest rise of `E(t)` above its running minimum, relative to `E(0)`.
    pub energy_rise: f64,
    pub max_mass_drift: f64,
    /// Largest `max f / (e^{2t} max f₀)`.
    pub linf_ratio: f64,
    /// Largest momentum drift over the momentum scale.
    pub momentum_drift: f64,
    /// Largest `M₆f(t) / M₆f₀`.
    pub m6_ratio: f64,
    /// Largest `‖f‖_{L²} / (e^t ‖f₀‖_{L²})`.
    pub l2_ratio: f64,
    pub max_iterations: usize,
    /// Largest of the last three contraction factors over all windows.
    pub max_late_contraction: f64,
    /// Shortest accepted window; below `window` only after a halving.
    pub min_window: f64,
    /// `(Σ r_k² Δt_k)^{1/2}` of the vorticity residual between window ends.
    pub vorticity_residual: f64,
    pub all_finite: bool,
}

/// Runs `cfg` from its initial data in memory, without files.
pub fn coupled_run(cfg: &RunConfig) -> Result<CoupledSummary> {
    cfg.validate()?;
    let state = make_initial_data(cfg)?;
    let picard = cfg.picard();
    let reference = ReferenceScalars::from_state(&state);
    let mut ledger = EnergyLedger::start(EnergySample::from_state(&state));
    let e0 = ledger.initial_energy();
    let mut s = CoupledSummary {
        n_x: cfg.grid.n_x,
        n_v: cfg.kinetic.n_v,
        window: cfg.time.window,
        t_end: cfg.time.t_end,
        windows: 0,
        seconds: 0.0,
        initial_energy: e0,
        energy_residual: 0.0,
        energy_rise: 0.0,
        max_mass_drift: 0.0,
        linf_ratio: 1.0,
        momentum_drift: 0.0,
        m6_ratio: 1.0,
        l2_ratio: 1.0,
        max_iterations: 0,
        max_late_contraction: 0.0,
        min_window: f64::INFINITY,
        vorticity_residual: 0.0,
        all_finite: true,
    };
    let mut running_min = e0;
    let mut vort_sq = 0.0;
    let mut prev = state.clone();
    let start = Instant::now();
    let mut observe = |next: &SimState, report: &StepReport| -> Result<()> {
        ledger.push(EnergySample::from_state(next));
        let c = conservation_report(next, &reference);
        let e = ledger.total_energy();
        s.energy_residual = s.energy_residual.max(ledger.identity_residual.abs() / e0);
        s.energy_rise = s.energy_rise.max((e - running_min) / e0);
        running_min = running_min.min(e);
        s.max_mass_drift = s.max_mass_drift.max(c.mass_drift.abs());
        s.linf_ratio = s.linf_ratio.max(c.linf_f / c.linf_bound);
        s.momentum_drift = s.momentum_drift.max(c.momentum_drift / reference.momentum_scale);
        s.m6_ratio = s.m6_ratio.max(c.m6 / reference.m6);
        s.l2_ratio = s.l2_ratio.max(c.l2_f / c.l2_bound);
        s.all_finite &= [c.mass, c.linf_f, c.m6, c.l2_f, e].iter().all(|x| x.is_finite());
        s.max_iterations = s.max_iterations.max(report.iterations);
        let cf = &report.contraction_factors;
        for &q in &cf[cf.len().saturating_sub(3)..] {
            s.max_late_contraction = s.max_late_contraction.max(q);
        }
        let dt = next.time() - prev.time();
        if next.time() < cfg.time.t_end - 1e-9 || s.windows == 0 {
            s.min_window = s.min_window.min(dt);
        }
        let r = vorticity_residual(&prev, next)?;
        vort_sq += r * r * dt;
        prev = next.clone();
        s.windows += 1;
        Ok(())
    };
    advance(state, cfg.time.t_end, &picard, &mut observe)?;
    s.seconds = start.elapsed().as_secs_f64();
    s.vorticity_residual = vort_sq.sqrt();
    info!(
        "coupled n_x={} n_v={} window={}: {} windows in {:.1} s",
        s.n_x, s.n_v, s.window, s.windows, s.seconds
    );
    Ok(s)
}

/// Whether one window from the initial data converges within the budget with
/// its last three contraction factors below one.
fn window_converges(state: &SimState, picard: &PicardConfig) -> Result<bool> {
    let (_, report) = picard_solve(state, picard)?;
    let cf = &report.contraction_factors;
    Ok(report.converged
        && report.iterations <= picard.max_iter
        && cf[cf.len().saturating_sub(3)..].iter().all(|&q| q < 1.0))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Threshold {
    /// Largest window that converged.
    pub below: f64,
    /// Smallest window that failed; `None` when none failed up to the cap.
    pub above: Option<f64>,
}

/// Doubles the window from `start` until a single window from the initial
/// data fails (at most `cap`), then bisects `steps` times.
pub fn picard_threshold(cfg: &RunConfig, start: f64, cap: f64, steps: usize) -> Result<Threshold> {
    let state = make_initial_data(cfg)?;
    let mut picard = cfg.picard();
    picard.max_iter = 10;
    let mut ok = |w: f64| -> Result<bool> {
        picard.window = w;
        let r = window_converges(&state, &picard)?;
        info!("threshold probe: window {w:.6} {}", if r { "converges" } else { "fails" });
        Ok(r)
    };
    if !ok(start)? {
        return Ok(Threshold {
            below: 0.0,
            above: Some(start),
        });
    }
    let mut lo = start;
    let mut hi = None;
    while lo < cap {
        let w = (2.0 * lo).min(cap);
        if ok(w)? {
            lo = w;
        } else {
            hi = Some(w);
            break;
        }
    }
    let Some(mut h) = hi else {
        return Ok(Threshold { below: lo, above: None });
    };
    for _ in 0..steps {
        let mid = 0.5 * (lo + h);
        if ok(mid)? {
            lo = mid;
        } else {
            h = mid;
        }
    }
    Ok(Threshold {
        below: lo,
        above: Some(h),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Reproducibility {
    pub csv_identical: bool,
    /// Max abs difference of `u` and `f` between the straight and resumed runs.
    pub state_difference: f64,
    /// Largest relative difference of any CSV value between the two runs.
    pub csv_difference: f64,
    pub resumed_csv_identical: bool,
}

fn csv_values(text: &str) -> Vec<Vec<f64>> {
    text.lines()
        .filter(|l| *l != CSV_HEADER)
        .map(|l| l.split(',').map(|x| x.parse().unwrap_or(f64::NAN)).collect())
        .collect()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

/// Runs `cfg` twice, then again in two legs joined by a resume, inside `work`.
pub fn reproducibility(cfg: &RunConfig, work: &Path) -> Result<Reproducibility> {
    let dirs = ["first", "second", "split"].map(|d| work.join(d));
    let a = run(cfg, &dirs[0])?;
    let b = run(cfg, &dirs[1])?;
    let text_a = fs::read_to_string(&a.csv)?;
    let text_b = fs::read_to_string(&b.csv)?;

    let mut half = cfg.clone();
    let windows = (cfg.time.t_end / cfg.time.window).round();
    half.time.t_end = (windows / 2.0).floor() * cfg.time.window;
    run(&half, &dirs[2])?;
    let c = resume(&dirs[2].join(LATEST_SNAPSHOT), cfg.time.t_end, Some(&dirs[2]))?;
    let text_c = fs::read_to_string(&c.csv)?;

    let state_difference = max_abs_diff(a.state.f().values(), c.state.f().values())
        .max(max_abs_diff(a.state.u().component(0), c.state.u().component(0)))
        .max(max_abs_diff(a.state.u().component(1), c.state.u().component(1)));
    let (va, vc) = (csv_values(&text_a), csv_values(&text_c));
    let mut csv_difference: f64 = if va.len() == vc.len() { 0.0 } else { f64::INFINITY };
    for (ra, rc) in va.iter().zip(&vc) {
        for (x, y) in ra.iter().zip(rc) {
            let d = (x - y).abs() / x.abs().max(1.0);
            csv_difference = csv_difference.max(if d.is_nan() { f64::INFINITY } else { d });
        }
    }
    Ok(Reproducibility {
        csv_identical: text_a == text_b,
        state_difference,
        csv_difference,
        resumed_csv_identical: text_a == text_c,
    })
}

/// The small configuration used for the determinism and resume check.
pub fn reproducibility_config() -> RunConfig {
    let mut cfg = acceptance_config();
    cfg.grid.n_x = 16;
    cfg.kinetic.n_v = 16;
    cfg.time.t_end = 0.1;
    cfg
}

/// Inputs of the full suite.
#[derive(Clone, Debug, PartialEq)]
pub struct VerifySetup {
    /// The coupled scenario at its finest window.
    pub coupled: RunConfig,
    /// Bisection steps after the doubling phase of the threshold search.
    pub bisection_steps: usize,
    pub threshold_cap: f64,
    pub reproducibility: RunConfig,
}

impl VerifySetup {
    pub fn from_config(cfg: &RunConfig) -> Self {
        VerifySetup {
            coupled: cfg.clone(),
            bisection_steps: 5,
            threshold_cap: 5.12,
            reproducibility: reproducibility_config(),
        }
    }
}

impl Default for VerifySetup {
    fn default() -> Self {
        Self::from_config(&acceptance_config())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
    pub taylor_green: TaylorGreenResult,
    pub free_flow: [FreeFlowLevel; 2],
    /// Coupled runs at windows `4ε`, `2ε`, `ε`.
    pub levels: [CoupledSummary; 3],
    /// Coupled run at window `ε` on the grid halved in `x` and `v`.
    pub coarse: CoupledSummary,
    pub threshold: Threshold,
    pub reproducibility: Reproducibility,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// Pass/fail lines followed by the measured quantities.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let _ = writeln!(out, "{}", c.line());
        }
        let eps0 = match self.threshold.above {
            Some(a) => format!("in ({:.6}, {:.6}]", self.threshold.below, a),
            None => format!("above {:.6} (no failure found)", self.threshold.below),
        };
        let _ = writeln!(out, "\npicard window threshold eps0 {eps0}");
        let _ = writeln!(
            out,
            "m6 growth constant max_t M6(t)/M6(0) = {:.6}",
            self.levels[2].m6_ratio
        );
        let _ = writeln!(
            out,
            "\nwindow     n_x  n_v  seconds  energy_res  mass_drift  momentum    l2_ratio    m6_ratio  iters  vort_res"
        );
        for s in self.levels.iter().chain([&self.coarse]) {
            let _ = writeln!(
                out,
                "{:<9.5} {:>4} {:>4} {:>8.1}  {:.3e}  {:.3e}  {:.3e}  {:.6}  {:.6}  {:>5}  {:.3e}",
                s.window,
                s.n_x,
                s.n_v,
                s.seconds,
                s.energy_residual,
                s.max_mass_drift,
                s.momentum_drift,
                s.l2_ratio,
                s.m6_ratio,
                s.max_iterations,
                s.vorticity_residual
            );
        }
        out
    }
}

fn order(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}

/// Runs every scenario and evaluates criteria 1–10. `work` receives the
/// run directories of the reproducibility check.
pub fn verify(setup: &VerifySetup, work: &Path) -> Result<VerifyReport> {
    let fine = &setup.coupled;
    let eps = fine.time.window;

    info!("taylor-green regression");
    let tg = taylor_green_regression(&fine.picard())?;
    info!("free-flow regression");
    let free = [
        free_flow_level(16, 1, 0.5, fine.kinetic.velocity_interp)?,
        free_flow_level(32, 2, 0.5, fine.kinetic.velocity_interp)?,
    ];

    let mut level_cfgs = [fine.clone(), fine.clone(), fine.clone()];
    for (cfg, m) in level_cfgs.iter_mut().zip([4.0, 2.0, 1.0]) {
        cfg.time.window = m * eps;
    }
    let mut levels = Vec::with_capacity(3);
    for cfg in &level_cfgs {
        levels.push(coupled_run(cfg)?);
    }
    let levels: [CoupledSummary; 3] = levels.try_into().expect("three levels");
    let mut coarse_cfg = fine.clone();
    coarse_cfg.grid.n_x /= 2;
    coarse_cfg.kinetic.n_v /= 2;
    let coarse = coupled_run(&coarse_cfg)?;

    info!("picard window threshold search");
    let threshold = picard_threshold(fine, eps, setup.threshold_cap, setup.bisection_steps)?;
    info!("determinism and resume");
    let repro = reproducibility(&setup.reproducibility, work)?;

    let f = &levels[2];
    let mut checks = Vec::new();
    checks.push(Check {
        id: 1,
        name: "taylor-green regression",
        passed: tg.linf_error < 1e-6 && tg.seconds < 10.0,
        detail: format!(
            "linf error {:.3e} (< 1e-6), runtime {:.2} s (< 10 s)",
            tg.linf_error, tg.seconds
        ),
    });
    let free_order = order(free[0].rel_error, free[1].rel_error);
    let free_bound = free.iter().map(|l| l.bound_ratio).fold(0.0, f64::max);
    checks.push(Check {
        id: 2,
        name: "free vlasov regression",
        passed: free[1].rel_error < 1e-3 && free_order >= 2.0 && free[1].seconds < 60.0,
        detail: format!(
            "relative linf error {:.3e} (< 1e-3), order {:.2} (>= 2), runtime {:.2} s (< 60 s)",
            free[1].rel_error, free_order, free[1].seconds
        ),
    });
    let energy_factor = levels[1].energy_residual / levels[2].energy_residual;
    checks.push(Check {
        id: 3,
        name: "energy identity",
        passed: f.energy_residual < 1e-2 && energy_factor >= 3.5 && f.energy_rise <= 1e-3,
        detail: format!(
            "residual {:.3e} (< 1e-2), halving factor {:.2} (>= 3.5; coarser {:.2}), max rise {:.2e} (<= 1e-3)",
            f.energy_residual,
            energy_factor,
            levels[0].energy_residual / levels[1].energy_residual,
            f.energy_rise
        ),
    });
    let mass_order = order(coarse.max_mass_drift, f.max_mass_drift);
    checks.push(Check {
        id: 4,
        name: "mass conservation",
        passed: f.max_mass_drift < 1e-4 && mass_order >= 2.0,
        detail: format!(
            "max drift {:.3e} (< 1e-4), order {:.2} (>= 2; drift {:.3e} at n={})",
            f.max_mass_drift, mass_order, coarse.max_mass_drift, coarse.n_x
        ),
    });
    let coupled_bound = levels.iter().map(|l| l.linf_ratio).fold(0.0, f64::max);
    let saturation = (free[1].final_ratio - 1.0).abs();
    checks.push(Check {
        id: 5,
        name: "maximum principle",
        passed: free_bound <= 1.0 + 1e-6 && coupled_bound <= 1.0 + 1e-6 && saturation <= 1e-3,
        detail: format!(
            "max f / bound: free {free_bound:.9}, coupled {coupled_bound:.9} (<= 1 + 1e-6); free saturation gap {saturation:.3e} (<= 1e-3)"
        ),
    });
    let converged = f.max_iterations <= 10 && f.max_late_contraction < 1.0 && f.min_window >= eps * (1.0 - 1e-9);
    checks.push(Check {
        id: 6,
        name: "picard contraction",
        passed: converged && threshold.above.is_some(),
        detail: format!(
            "max iterations {} (<= 10), max late contraction {:.3e} (< 1), threshold eps0 {}",
            f.max_iterations,
            f.max_late_contraction,
            match threshold.above {
                Some(a) => format!("in ({:.4}, {:.4}]", threshold.below, a),
                None => format!("not found up to {:.4}", threshold.below),
            }
        ),
    });
    checks.push(Check {
        id: 7,
        name: "momentum conservation",
        passed: f.momentum_drift < 1e-4,
        detail: format!("max drift / scale {:.3e} (< 1e-4)", f.momentum_drift),
    });
    let vort = [0, 1].map(|i| order(levels[i].vorticity_residual, levels[i + 1].vorticity_residual));
    checks.push(Check {
        id: 8,
        name: "vorticity residual",
        passed: vort.iter().all(|&p| p >= 1.0),
        detail: format!(
            "residuals {:.3e} {:.3e} {:.3e}, orders {:.2} {:.2} (>= 1)",
            levels[0].vorticity_residual,
            levels[1].vorticity_residual,
            levels[2].vorticity_residual,
            vort[0],
            vort[1]
        ),
    });
    checks.push(Check {
        id: 9,
        name: "moment bounds",
        passed: f.all_finite && f.m6_ratio < 10.0 && f.l2_ratio <= 1.0 + 1e-3,
        detail: format!(
            "max M6/M6(0) {:.4} (< 10), max L2 / (e^t L2(0)) {:.6} (<= 1 + 1e-3)",
            f.m6_ratio, f.l2_ratio
        ),
    });
    checks.push(Check {
        id: 10,
        name: "determinism and resume",
        passed: repro.csv_identical && repro.state_difference <= 1e-12 && repro.csv_difference <= 1e-12,
        detail: format!(
            "rerun csv identical {}, resume state difference {:.1e}, csv difference {:.1e} (<= 1e-12), resumed csv identical {}",
            repro.csv_identical, repro.state_difference, repro.csv_difference, repro.resumed_csv_identical
        ),
    });
    Ok(VerifyReport {
        checks,
        taylor_green: tg,
        free_flow: free,
        levels,
        coarse,
        threshold,
        reproducibility: repro,
    })
}
