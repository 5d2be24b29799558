//! Run configuration: a TOML document with dotted sections.
//!
//! Only `grid.n_x` and `time.t_end` are required; every other key has the
//! default listed in [`RunConfig::default_document`].

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::coupling::{PicardConfig, SweepMode};
use crate::error::{NsvError, Result};
use crate::kinetic::{ClipPolicy, KineticScheme, PhaseGrid, VelocityInterp};
use crate::spectral::SpectralGrid;

pub const FLUID_GENERATORS: [&str; 2] = ["taylor_green_fluid", "zero_fluid"];
pub const KINETIC_GENERATORS: [&str; 2] = ["maxwellian_bump", "zero_kinetic"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Seed of the optional random fluid perturbation.
    #[serde(default)]
    pub seed: u64,
    pub grid: GridConfig,
    #[serde(default)]
    pub kinetic: KineticConfig,
    pub time: TimeConfig,
    #[serde(default)]
    pub picard: PicardSection,
    #[serde(default)]
    pub initial_data: InitialDataConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub n_x: usize,
    #[serde(default = "two_pi")]
    pub length: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KineticConfig {
    pub n_v: usize,
    pub v_max: f64,
    /// RK4 substeps per semi-Lagrangian step.
    pub substeps: usize,
    pub clip: ClipPolicy,
    pub velocity_interp: VelocityInterp,
}

impl Default for KineticConfig {
    fn default() -> Self {
        KineticConfig {
            n_v: 32,
            v_max: 6.0,
            substeps: 1,
            clip: ClipPolicy::LocalStencil,
            velocity_interp: VelocityInterp::Spline,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeConfig {
    pub t_end: f64,
    /// Picard window length.
    #[serde(default = "default_window")]
    pub window: f64,
    /// Relative mass drift above which a warning is logged.
    #[serde(default = "default_mass_tol")]
    pub mass_tol: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PicardSection {
    pub tol: f64,
    pub max_iter: usize,
    pub quadrature_nodes: usize,
    pub sweep_mode: SweepMode,
    pub max_halvings: usize,
}

impl Default for PicardSection {
    fn default() -> Self {
        PicardSection {
            tol: 1e-10,
            max_iter: 20,
            quadrature_nodes: 2,
            sweep_mode: SweepMode::Jacobi,
            max_halvings: 5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InitialDataConfig {
    /// One of `taylor_green_fluid`, `zero_fluid`, `maxwellian_bump`,
    /// `zero_kinetic`, `composite`.
    pub generator: String,
    /// Fluid half of `composite`.
    pub fluid: String,
    /// Kinetic half of `composite`.
    pub kinetic: String,
    pub taylor_green: TaylorGreenParams,
    pub maxwellian: MaxwellianParams,
    /// Amplitude of a seeded random divergence-free fluid perturbation.
    pub perturbation: f64,
    /// Highest wavenumber of the perturbation.
    pub perturbation_modes: usize,
}

impl Default for InitialDataConfig {
    fn default() -> Self {
        InitialDataConfig {
            generator: "composite".into(),
            fluid: "taylor_green_fluid".into(),
            kinetic: "maxwellian_bump".into(),
            taylor_green: TaylorGreenParams::default(),
            maxwellian: MaxwellianParams::default(),
            perturbation: 0.0,
            perturbation_modes: 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TaylorGreenParams {
    pub amplitude: f64,
}

impl Default for TaylorGreenParams {
    fn default() -> Self {
        TaylorGreenParams { amplitude: 1.0 }
    }
}

/// Spatial profile of the bump, both with unit peak.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BumpShape {
    /// `exp(Σ (cos k·dᵢ − 1) / (k·width)²)` with `k = 2π/L`; smooth on the torus.
    Periodic,
    /// `exp(−|d|² / (2·width²))` in the periodic distance `d`; has a kink at
    /// half a period.
    Gaussian,
}

/// `f₀ = density · G_width(x − center) · N(drift, sigma²)(v)`, where `G` is
/// the spatial profile selected by `shape` and `N` a normalised 2D Gaussian.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MaxwellianParams {
    /// Peak of `ρ₀`.
    pub density: f64,
    pub sigma: f64,
    pub drift: [f64; 2],
    pub shape: BumpShape,
    pub width: f64,
    /// Bump centre; the domain centre when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub center: Option<[f64; 2]>,
}

impl Default for MaxwellianParams {
    fn default() -> Self {
        MaxwellianParams {
            density: 1.0,
            sigma: 1.0,
            drift: [1.0, 0.0],
            shape: BumpShape::Periodic,
            width: 1.2,
            center: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputConfig {
    pub directory: String,
    /// A CSV row every `cadence` windows.
    pub cadence: usize,
    pub snapshots: bool,
    /// Time between intermediate snapshots; zero keeps only the latest state.
    pub snapshot_interval: f64,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            directory: "output".into(),
            cadence: 1,
            snapshots: true,
            snapshot_interval: 0.0,
        }
    }
}

fn two_pi() -> f64 {
    2.0 * PI
}

fn default_window() -> f64 {
    0.01
}

fn default_mass_tol() -> f64 {
    1e-4
}

fn check(ok: bool, key: &str, reason: impl Into<String>) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(NsvError::config(key, reason))
    }
}

fn positive(x: f64, key: &str) -> Result<()> {
    check(x.is_finite() && x > 0.0, key, format!("must be positive and finite, got {x}"))
}

fn generator_name(name: &str, allowed: &[&str], key: &str) -> Result<()> {
    if allowed.contains(&name) {
        Ok(())
    } else {
        Err(NsvError::config(
            key,
            format!("unknown generator `{name}`, expected one of {}", allowed.join(", ")),
        ))
    }
}

impl RunConfig {
    /// Minimal configuration with every default applied.
    pub fn new(n_x: usize, t_end: f64) -> Self {
        RunConfig {
            seed: 0,
            grid: GridConfig {
                n_x,
                length: two_pi(),
            },
            kinetic: KineticConfig::default(),
            time: TimeConfig {
                t_end,
                window: default_window(),
                mass_tol: default_mass_tol(),
            },
            picard: PicardSection::default(),
            initial_data: InitialDataConfig::default(),
            output: OutputConfig::default(),
        }
    }

    /// The fully expanded document for `grid.n_x = 32`, `time.t_end = 1`.
    pub fn default_document() -> String {
        RunConfig::new(32, 1.0).render()
    }

    pub fn validate(&self) -> Result<()> {
        check(
            i64::try_from(self.seed).is_ok(),
            "seed",
            format!("must fit a signed 64-bit integer, got {}", self.seed),
        )?;
        let n = self.grid.n_x;
        check(n % 2 == 0, "grid.n_x", format!("must be even, got {n}"))?;
        check((8..=1024).contains(&n), "grid.n_x", format!("must lie in [8, 1024], got {n}"))?;
        positive(self.grid.length, "grid.length")?;

        let k = &self.kinetic;
        check(
            (4..=512).contains(&k.n_v),
            "kinetic.n_v",
            format!("must lie in [4, 512], got {}", k.n_v),
        )?;
        positive(k.v_max, "kinetic.v_max")?;
        check(
            (1..=64).contains(&k.substeps),
            "kinetic.substeps",
            format!("must lie in [1, 64], got {}", k.substeps),
        )?;

        let t = &self.time;
        check(
            t.t_end.is_finite() && t.t_end >= 0.0,
            "time.t_end",
            format!("must be finite and nonnegative, got {}", t.t_end),
        )?;
        positive(t.window, "time.window")?;
        positive(t.mass_tol, "time.mass_tol")?;

        let p = &self.picard;
        positive(p.tol, "picard.tol")?;
        check(
            (2..=1000).contains(&p.max_iter),
            "picard.max_iter",
            format!("must lie in [2, 1000], got {}", p.max_iter),
        )?;
        check(
            (2..=16).contains(&p.quadrature_nodes),
            "picard.quadrature_nodes",
            format!("must lie in [2, 16], got {}", p.quadrature_nodes),
        )?;
        check(
            p.max_halvings <= 30,
            "picard.max_halvings",
            format!("must be at most 30, got {}", p.max_halvings),
        )?;

        let init = &self.initial_data;
        let all: Vec<&str> = FLUID_GENERATORS
            .iter()
            .chain(&KINETIC_GENERATORS)
            .copied()
            .chain(["composite"])
            .collect();
        generator_name(&init.generator, &all, "initial_data.generator")?;
        generator_name(&init.fluid, &FLUID_GENERATORS, "initial_data.fluid")?;
        generator_name(&init.kinetic, &KINETIC_GENERATORS, "initial_data.kinetic")?;
        check(
            init.taylor_green.amplitude.is_finite(),
            "initial_data.taylor_green.amplitude",
            "must be finite",
        )?;
        let m = &init.maxwellian;
        check(
            m.density.is_finite() && m.density >= 0.0,
            "initial_data.maxwellian.density",
            format!("must be finite and nonnegative, got {}", m.density),
        )?;
        positive(m.sigma, "initial_data.maxwellian.sigma")?;
        check(
            m.width.is_finite() && m.width >= self.grid.length / 200.0,
            "initial_data.maxwellian.width",
            format!("must be at least grid.length / 200, got {}", m.width),
        )?;
        check(
            m.drift.iter().all(|d| d.is_finite()),
            "initial_data.maxwellian.drift",
            "must be finite",
        )?;
        if let Some(c) = m.center {
            check(
                c.iter().all(|x| x.is_finite()),
                "initial_data.maxwellian.center",
                "must be finite",
            )?;
        }
        check(
            init.perturbation.is_finite() && init.perturbation >= 0.0,
            "initial_data.perturbation",
            format!("must be finite and nonnegative, got {}", init.perturbation),
        )?;
        check(
            (1..=64).contains(&init.perturbation_modes),
            "initial_data.perturbation_modes",
            format!("must lie in [1, 64], got {}", init.perturbation_modes),
        )?;

        let o = &self.output;
        check(!o.directory.is_empty(), "output.directory", "must not be empty")?;
        check(o.cadence >= 1, "output.cadence", "must be at least 1")?;
        check(
            o.snapshot_interval.is_finite() && o.snapshot_interval >= 0.0,
            "output.snapshot_interval",
            format!("must be finite and nonnegative, got {}", o.snapshot_interval),
        )?;
        Ok(())
    }

    pub fn render(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn phase_grid(&self) -> Result<PhaseGrid> {
        let space = SpectralGrid::new(self.grid.n_x, self.grid.length)?;
        PhaseGrid::new(space, self.kinetic.n_v, self.kinetic.v_max)
    }

    pub fn picard(&self) -> PicardConfig {
        PicardConfig {
            window: self.time.window,
            tol: self.picard.tol,
            max_iter: self.picard.max_iter,
            quadrature_nodes: self.picard.quadrature_nodes,
            sweep: self.picard.sweep_mode,
            kinetic: KineticScheme {
                substeps: self.kinetic.substeps,
                clip: self.kinetic.clip,
                velocity: self.kinetic.velocity_interp,
            },
            max_halvings: self.picard.max_halvings,
        }
    }
}

/// Parses and validates a config document. Unknown keys are errors.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let de = toml::Deserializer::new(text);
    let mut unknown = Vec::new();
    let cfg: RunConfig = serde_ignored::deserialize(de, |path| unknown.push(path.to_string()))
        .map_err(|e| NsvError::ConfigSyntax(e.to_string().trim_end().to_string()))?;
    if let Some(key) = unknown.into_iter().next() {
        return Err(NsvError::config(key, "unknown key"));
    }
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key_of(err: NsvError) -> String {
        match err {
            NsvError::Config { key, .. } => key,
            other => panic!("expected a config error, got {other}"),
        }
    }

    #[test]
    fn minimal_document_gets_defaults() {
        let cfg = parse_config("[grid]\nn_x = 32\n[time]\nt_end = 1.0\n").unwrap();
        assert_eq!(cfg, RunConfig::new(32, 1.0));
        assert_eq!(cfg.grid.length, 2.0 * PI);
        assert_eq!(cfg.kinetic.n_v, 32);
        assert_eq!(cfg.picard.sweep_mode, SweepMode::Jacobi);
        assert_eq!(cfg.initial_data.maxwellian.center, None);
    }

    #[test]
    fn odd_grid_names_the_key() {
        let err = parse_config("[grid]\nn_x = 7\n[time]\nt_end = 1.0\n").unwrap_err();
        assert_eq!(key_of(err), "grid.n_x");
    }

    #[test]
    fn unknown_keys_are_rejected_with_their_path() {
        let err = parse_config("[grid]\nn_x = 16\nbogus = 1\n[time]\nt_end = 1.0\n").unwrap_err();
        assert_eq!(key_of(err), "grid.bogus");
        let doc = "[grid]\nn_x = 16\n[time]\nt_end = 1.0\n[initial_data.maxwellian]\nsigmaa = 2.0\n";
        assert_eq!(key_of(parse_config(doc).unwrap_err()), "initial_data.maxwellian.sigmaa");
        let err = parse_config("typo = 3\n[grid]\nn_x = 16\n[time]\nt_end = 1.0\n").unwrap_err();
        assert_eq!(key_of(err), "typo");
    }

    #[test]
    fn syntax_and_missing_sections() {
        assert!(matches!(
            parse_config("[grid\nn_x = 16"),
            Err(NsvError::ConfigSyntax(_))
        ));
        assert!(matches!(
            parse_config("[grid]\nn_x = 16\n"),
            Err(NsvError::ConfigSyntax(m)) if m.contains("time")
        ));
    }

    #[test]
    fn range_errors_name_their_keys() {
        let base = "[grid]\nn_x = 16\n[time]\nt_end = 1.0\n";
        for (extra, key) in [
            ("[kinetic]\nn_v = 2\n", "kinetic.n_v"),
            ("[picard]\nquadrature_nodes = 1\n", "picard.quadrature_nodes"),
            ("[picard]\ntol = -1.0\n", "picard.tol"),
            ("[initial_data]\ngenerator = \"vortex\"\n", "initial_data.generator"),
            ("[initial_data]\nfluid = \"maxwellian_bump\"\n", "initial_data.fluid"),
            ("[initial_data.maxwellian]\nsigma = 0.0\n", "initial_data.maxwellian.sigma"),
            ("[output]\ncadence = 0\n", "output.cadence"),
        ] {
            let err = parse_config(&format!("{base}{extra}")).unwrap_err();
            assert_eq!(key_of(err), key, "{extra}");
        }
        let err = parse_config("[grid]\nn_x = 16\n[time]\nt_end = -1.0\n").unwrap_err();
        assert_eq!(key_of(err), "time.t_end");
    }

    #[test]
    fn render_round_trips() {
        let mut cfg = RunConfig::new(64, 0.5);
        cfg.initial_data.maxwellian.center = Some([1.0, 2.5]);
        cfg.picard.sweep_mode = SweepMode::GaussSeidel;
        cfg.kinetic.clip = ClipPolicy::GlobalMax;
        let text = cfg.render();
        assert_eq!(parse_config(&text).unwrap(), cfg);
        assert!(RunConfig::default_document().contains("sweep_mode = \"jacobi\""));
    }
}
