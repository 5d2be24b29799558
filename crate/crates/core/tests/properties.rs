use std::f64::consts::PI;

use proptest::prelude::*;

use nsv_core::coupling::quadrature::{gauss_legendre, gauss_lobatto};
use nsv_core::coupling::SimState;
use nsv_core::diagnostics::{conservation_report, ReferenceScalars};
use nsv_core::io::{parse_config, read_snapshot, write_snapshot, RunConfig, RunMeta, Snapshot};
use nsv_core::kinetic::{
    compute_moments, ClipPolicy, ConstantSampler, DistributionFunction, KineticScheme, PhaseGrid,
    VelocityInterp,
};
use nsv_core::spectral::{heat_propagate, leray_project, SpectralGrid, VectorField};

fn space(n: usize) -> SpectralGrid {
    SpectralGrid::new(n, 2.0 * PI).unwrap()
}

fn field(grid: &SpectralGrid, vals: &[f64]) -> VectorField {
    let n = grid.len();
    VectorField::new(grid, vals[..n].to_vec(), vals[n..2 * n].to_vec()).unwrap()
}

fn phase_values(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![3 => Just(0.0), 7 => 0.0..2.0f64], len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn projection_is_idempotent_and_solenoidal(vals in prop::collection::vec(-1.0..1.0f64, 2 * 64)) {
        let g = space(8);
        let w = field(&g, &vals);
        let p = leray_project(&w);
        let pp = leray_project(p.as_vector());
        prop_assert!(p.as_vector().sub(pp.as_vector()).max_abs() < 1e-13);
        prop_assert!(p.as_vector().divergence_residual() < 1e-12);
        // Orthogonal projection: ‖Pw‖ ≤ ‖w‖ and ⟨w − Pw, Pw⟩ = 0.
        prop_assert!(p.as_vector().l2_norm() <= w.l2_norm() * (1.0 + 1e-12));
        prop_assert!(w.sub(p.as_vector()).inner(p.as_vector()).abs() < 1e-10 * (1.0 + w.l2_norm().powi(2)));
    }

    #[test]
    fn heat_semigroup_composes(vals in prop::collection::vec(-1.0..1.0f64, 2 * 64), a in 0.0..0.5f64, b in 0.0..0.5f64) {
        let u = leray_project(&field(&space(8), &vals));
        let two = heat_propagate(&heat_propagate(&u, a).unwrap(), b).unwrap();
        let one = heat_propagate(&u, a + b).unwrap();
        prop_assert!(two.as_vector().sub(one.as_vector()).max_abs() < 1e-13);
        prop_assert!(one.as_vector().l2_norm() <= u.as_vector().l2_norm() * (1.0 + 1e-12));
    }

    #[test]
    fn moments_obey_cauchy_schwarz(vals in phase_values(8 * 8 * 6 * 6)) {
        let grid = PhaseGrid::new(space(8), 6, 3.0).unwrap();
        let f = DistributionFunction::new(&grid, vals, 0.0).unwrap();
        let m = compute_moments(&f);
        for i in 0..64 {
            let rho = m.rho.values()[i];
            let j = m.current.at(i);
            let m2 = m.m2.values()[i];
            prop_assert!(rho >= 0.0 && m2 >= 0.0);
            prop_assert!(j[0] * j[0] + j[1] * j[1] <= rho * m2 * (1.0 + 1e-12) + 1e-300);
        }
        prop_assert!((m.mass() - f.mass()).abs() <= 1e-12 * (1.0 + f.mass()));
    }

    #[test]
    fn semi_lagrangian_step_is_positive_and_bounded(
        vals in phase_values(8 * 8 * 8 * 8),
        u in (-2.0..2.0f64, -2.0..2.0f64),
        dt in 0.001..0.3f64,
        local in any::<bool>(),
        spline in any::<bool>(),
    ) {
        let g = space(8);
        let grid = PhaseGrid::new(g.clone(), 8, 4.0).unwrap();
        let f = DistributionFunction::new(&grid, vals, 0.0).unwrap();
        let sampler = ConstantSampler::new(VectorField::from_fn(&g, |_| [u.0, u.1]));
        let scheme = KineticScheme {
            substeps: 1,
            clip: if local { ClipPolicy::LocalStencil } else { ClipPolicy::GlobalMax },
            velocity: if spline { VelocityInterp::Spline } else { VelocityInterp::Lagrange },
        };
        let next = scheme.step(&f, &sampler, dt).unwrap();
        prop_assert!(next.values().iter().all(|&x| x >= 0.0 && x.is_finite()));
        prop_assert!(next.max() <= (2.0 * dt).exp() * f.max() * (1.0 + 1e-9));
        prop_assert!((next.time() - dt).abs() < 1e-15);
    }

    #[test]
    fn lobatto_and_legendre_integrate_polynomials(q in 2usize..8, c in prop::collection::vec(-1.0..1.0f64, 16)) {
        // ∫₀¹ Σ cₖ tᵏ dt = Σ cₖ/(k+1).
        let check = |nodes: &[f64], weights: &[f64], deg: usize| {
            let exact: f64 = (0..=deg).map(|k| c[k] / (k + 1) as f64).sum();
            let got: f64 = nodes
                .iter()
                .zip(weights)
                .map(|(&t, &w)| w * (0..=deg).map(|k| c[k] * t.powi(k as i32)).sum::<f64>())
                .sum();
            (got - exact).abs()
        };
        let (n, w) = gauss_lobatto(q);
        prop_assert!(check(&n, &w, 2 * q - 3) < 1e-12);
        let (n, w) = gauss_legendre(q);
        prop_assert!(check(&n, &w, 2 * q - 1) < 1e-12);
    }

    #[test]
    fn config_round_trips(
        n in 4usize..64,
        nv in 4usize..64,
        vmax in 0.5..10.0f64,
        t_end in 0.0..5.0f64,
        window in 1e-4..0.5f64,
        q in 2usize..9,
        seed in 0..=i64::MAX as u64,
        sigma in 0.1..3.0f64,
        drift in (-2.0..2.0f64, -2.0..2.0f64),
        gs in any::<bool>(),
    ) {
        let mut cfg = RunConfig::new(2 * n, t_end);
        cfg.seed = seed;
        cfg.kinetic.n_v = nv;
        cfg.kinetic.v_max = vmax;
        cfg.time.window = window;
        cfg.picard.quadrature_nodes = q;
        cfg.initial_data.maxwellian.sigma = sigma;
        cfg.initial_data.maxwellian.drift = [drift.0, drift.1];
        if gs {
            cfg.picard.sweep_mode = nsv_core::coupling::SweepMode::GaussSeidel;
        }
        cfg.validate().unwrap();
        let back = parse_config(&cfg.render()).unwrap();
        prop_assert_eq!(back, cfg);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn snapshots_round_trip_bit_for_bit(
        uvals in prop::collection::vec(-1.0..1.0f64, 2 * 64),
        fvals in phase_values(8 * 8 * 4 * 4),
        t in 0.0..10.0f64,
    ) {
        let g = space(8);
        let grid = PhaseGrid::new(g.clone(), 4, 2.0).unwrap();
        let u = leray_project(&field(&g, &uvals));
        let f = DistributionFunction::new(&grid, fvals, t).unwrap();
        let state = SimState::new(u, f).unwrap();
        let reference = ReferenceScalars::from_state(&state);
        let meta = RunMeta {
            window_index: 3,
            last_iterations: 4,
            last_contraction: 0.125,
            next_snapshot: f64::INFINITY,
            reference,
            initial_energy: 1.5,
            visc_dissipation: 0.25,
            drag_dissipation: 0.0625,
            config: RunConfig::new(8, 1.0).render(),
        };
        let snap = Snapshot { state, meta };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.nsv");
        write_snapshot(&path, &snap).unwrap();
        let back = read_snapshot(&path).unwrap();
        prop_assert_eq!(&back, &snap);
        let c = conservation_report(&back.state, &reference);
        prop_assert_eq!(c.mass_drift, 0.0);
        prop_assert_eq!(c.linf_f, c.linf_bound);
    }
}
