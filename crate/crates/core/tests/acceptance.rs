//! Acceptance gate: one integration test per shipped guarantee, each printing
//! a `criterion N: PASS ...` summary line (visible with `--nocapture`).
//!
//! The two map-based checks share one cached numerical detuning map, so the
//! expensive 21x21 propagation grid runs only once per test-binary run. All
//! tolerances are stated inline next to the assertion they guard.

use std::sync::OnceLock;
use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use cavity_sideband::dynamics::{max_step, propagate_structured};
use cavity_sideband::hilbert::{
    hermiticity_deviation, max_abs, DensityMatrix, HilbertLayout,
};
use cavity_sideband::model::ModelParams;
use cavity_sideband::molecules::{
    builtin_molecules, find_molecule, to_model_params, CavitySpec, DriveSpec, GeometrySpec,
    TrapSpec,
};
use cavity_sideband::rates::{
    correlation_rates, fit_rates, free_space_rates, perturbative_rates, rate_equation_evolve,
    FitOptions,
};
use cavity_sideband::sweep::{
    evaluate_cell, find_extrema, run_sweep, CellStatus, SweepGrid, SweepMethod, SweepOptions,
};

// ---------------------------------------------------------------------------
// Shared helpers
// ---------------------------------------------------------------------------

fn reference(omega: f64, delta: f64, delta_c: f64) -> ModelParams {
    ModelParams::cos_reference(omega, delta, delta_c)
}

fn rel_dev(value: f64, reference: f64) -> f64 {
    ((value - reference) / reference).abs()
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    let step = (b - a) / (n as f64 - 1.0);
    (0..n).map(|k| a + step * k as f64).collect()
}

fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    sxy / (sxx * syy).sqrt()
}

/// Laser-detuning axis of the cooling map: a fine cluster over the
/// drive-shifted red sideband plus coarse wings covering the carrier and the
/// blue side, 21 values total.
fn map_delta_axis() -> Vec<f64> {
    let mut axis = vec![-3.0, -2.5, -2.0, -1.5, -1.25];
    axis.extend((0..=10).map(|k| -1.010 + 0.002 * k as f64));
    axis.extend([-0.75, -0.5, 0.0, 0.5, 1.0]);
    axis
}

/// Cavity-detuning axis of the cooling map: 21 uniform values over
/// [-30, 30] in trap units.
fn map_delta_c_axis() -> Vec<f64> {
    (0..21).map(|k| -30.0 + 3.0 * k as f64).collect()
}

static COOLING_MAP: OnceLock<SweepGrid> = OnceLock::new();

/// The numerical cooling map at drive strength 0.05 (shared by criteria 3-5).
fn cooling_map() -> &'static SweepGrid {
    COOLING_MAP.get_or_init(|| {
        let base = reference(0.05, -1.0, -24.0);
        let options = SweepOptions::new(SweepMethod::Numeric);
        run_sweep(&base, &map_delta_axis(), &map_delta_c_axis(), &options)
            .expect("numerical cooling map")
    })
}

// ---------------------------------------------------------------------------
// 1. Tabulated linewidth regression
// ---------------------------------------------------------------------------

#[test]
fn criterion_01_linewidth_table_regression() {
    let table = builtin_molecules();
    let mut worst_tight: (f64, &str) = (0.0, "");
    for name in ["COS", "MgH+", "TMA", "CFI3"] {
        let m = find_molecule(table, name).unwrap();
        let dev = rel_dev(m.einstein_a(), m.gamma_si);
        assert!(
            dev <= 0.03,
            "{name}: computed linewidth {:.3}/s deviates {:.2}% from tabulated {:.3}/s (> 3%)",
            m.einstein_a(),
            100.0 * dev,
            m.gamma_si
        );
        if dev > worst_tight.0 {
            worst_tight = (dev, name);
        }
    }
    let mut worst_loose: (f64, &str) = (0.0, "");
    for name in ["CHBr3", "HCCCF3"] {
        let m = find_molecule(table, name).unwrap();
        let dev = rel_dev(m.einstein_a(), m.gamma_si);
        assert!(
            dev <= 0.10,
            "{name}: computed linewidth {:.3}/s deviates {:.2}% from tabulated {:.3}/s (> 10%)",
            m.einstein_a(),
            100.0 * dev,
            m.gamma_si
        );
        if dev > worst_loose.0 {
            worst_loose = (dev, name);
        }
    }
    // CSCl2 is excluded: its tabulated linewidth disagrees with the dipole
    // formula by roughly a factor of ten (documented source-data anomaly).
    let cscl2 = find_molecule(table, "CSCl2").unwrap();
    let ratio = cscl2.einstein_a() / cscl2.gamma_si;
    assert!(
        (5.0..20.0).contains(&ratio),
        "CSCl2 anomaly ratio changed: {ratio:.2}"
    );
    println!(
        "criterion 1: PASS - linewidths within 3% (worst {:.2}% for {}) and 10% \
         (worst {:.2}% for {}); CSCl2 excluded (anomaly ratio {:.1})",
        100.0 * worst_tight.0,
        worst_tight.1,
        100.0 * worst_loose.0,
        worst_loose.1,
        ratio
    );
}

// ---------------------------------------------------------------------------
// 2. Derived trap/cavity parameter suite
// ---------------------------------------------------------------------------

#[test]
fn criterion_02_derived_parameter_suite() {
    let table = builtin_molecules();
    let cos = find_molecule(table, "COS").unwrap();
    let trap = TrapSpec::standing_wave_default();
    let cavity = CavitySpec::science_cavity_default();
    let geometry = GeometrySpec::diagonal_default();
    let drive = DriveSpec {
        omega: 0.05,
        delta: -1.0,
        delta_c: -24.0,
    };
    let params = to_model_params(cos, &trap, &cavity, &drive, &geometry).unwrap();
    let c1 = params.g * params.g / (params.kappa * params.gamma);

    let checks = [
        ("eta", params.eta, 0.02, 0.10),
        ("kappa/nu", params.kappa, 14.3, 0.01),
        ("gamma/nu", params.gamma, 1.9e-4, 0.03),
        ("g/nu", params.g, 0.41, 0.03),
        ("C1", c1, 61.0, 0.05),
    ];
    for (name, value, target, tol) in checks {
        let dev = rel_dev(value, target);
        assert!(
            dev <= tol,
            "{name} = {value:.6} deviates {:.2}% from {target} (tolerance {:.0}%)",
            100.0 * dev,
            100.0 * tol
        );
    }
    println!(
        "criterion 2: PASS - eta {:.5}, kappa/nu {:.4}, gamma/nu {:.4e}, g/nu {:.5}, C1 {:.2}",
        params.eta, params.kappa, params.gamma, params.g, c1
    );
}

// ---------------------------------------------------------------------------
// 3. Cooling-map structure at drive strength 0.05
// ---------------------------------------------------------------------------

#[test]
fn criterion_03_cooling_map_structure() {
    let t0 = Instant::now();
    let grid = cooling_map();
    let extrema = find_extrema(grid).expect("cooling map has cooling cells");
    let peak = &extrema.max_w;

    assert!(
        (-1.3..=-0.7).contains(&peak.delta),
        "peak laser detuning {} outside [-1.3, -0.7]",
        peak.delta
    );
    let n_cols = grid.delta_c_axis.len();
    assert!(
        peak.j > 0 && peak.j < n_cols - 1,
        "peak cavity detuning {} sits on the axis edge (column {} of {})",
        peak.delta_c,
        peak.j,
        n_cols
    );
    assert!(
        peak.delta_c.abs() > 0.0,
        "peak cavity detuning is zero: cavity plays no role"
    );
    let w_si = peak.w * grid.base.nu_si;
    assert!(
        (1e3..=4e3).contains(&w_si),
        "peak cooling rate {w_si:.0}/s outside [1e3, 4e3]/s"
    );
    println!(
        "criterion 3: PASS - peak W = {:.0}/s at (Delta = {:.4}, delta_c = {:.1}), \
         interior column {}/{}; {:.1}% cells failed; {:.1} min",
        w_si,
        peak.delta,
        peak.delta_c,
        peak.j,
        n_cols,
        100.0 * grid.failure_fraction(),
        t0.elapsed().as_secs_f64() / 60.0
    );
}

// ---------------------------------------------------------------------------
// 4. Drive-strength trend of the optimum
// ---------------------------------------------------------------------------

/// Search window per drive strength: the optimum tracks the drive-induced
/// light shift, so the laser-detuning window is re-centred for every drive
/// value (constants measured on this model).
fn drive_trend_windows() -> Vec<(f64, Vec<f64>, Vec<f64>)> {
    vec![
        (
            0.1,
            linspace(-0.996, -0.972, 9),
            vec![-21.0, -18.0, -15.0, -12.0, -9.0],
        ),
        (
            0.2,
            linspace(-0.938, -0.898, 9),
            vec![-15.0, -12.0, -9.0, -6.0, -3.0, 0.0],
        ),
        (
            0.3,
            linspace(-0.8555, -0.7755, 9),
            vec![-12.0, -9.0, -6.0, -3.0, 0.0, 3.0],
        ),
        // At this drive the dressed sideband reaches the carrier
        // (4 Omega^2 = 1) and the surviving cooling resonance is a narrow
        // arc where the cavity pull completes the matching condition, so
        // the window hugs that arc instead of scaling the weak-drive one.
        (
            0.5,
            linspace(-0.102, -0.094, 9),
            vec![-12.5, -11.5, -11.0],
        ),
    ]
}

#[test]
fn criterion_04_drive_strength_trend() {
    let t0 = Instant::now();
    let options = SweepOptions::new(SweepMethod::Numeric);

    let mut rows: Vec<(f64, f64, f64)> = Vec::new();
    {
        let extrema = find_extrema(cooling_map()).expect("cooling map has cooling cells");
        let w_si = extrema.max_w.w * cooling_map().base.nu_si;
        rows.push((0.05, w_si, extrema.min_n_st.n_st));
    }
    for (omega, delta_axis, delta_c_axis) in drive_trend_windows() {
        let base = reference(omega, -1.0, -12.0);
        let grid = run_sweep(&base, &delta_axis, &delta_c_axis, &options)
            .unwrap_or_else(|e| panic!("sweep at drive {omega}: {e}"));
        let extrema =
            find_extrema(&grid).unwrap_or_else(|e| panic!("extrema at drive {omega}: {e}"));
        rows.push((
            omega,
            extrema.max_w.w * base.nu_si,
            extrema.min_n_st.n_st,
        ));
    }

    for pair in rows.windows(2) {
        let (o0, w0, n0) = pair[0];
        let (o1, w1, n1) = pair[1];
        assert!(
            w1 > w0,
            "max cooling rate not strictly increasing: W({o1}) = {w1:.0}/s <= W({o0}) = {w0:.0}/s"
        );
        assert!(
            n1 > n0,
            "min steady occupation not strictly increasing: n({o1}) = {n1:.2e} <= n({o0}) = {n0:.2e}"
        );
    }
    let omegas: Vec<f64> = rows.iter().skip(1).map(|r| r.0).collect();
    let ws: Vec<f64> = rows.iter().skip(1).map(|r| r.1).collect();
    let r = pearson(&omegas, &ws);
    assert!(
        r >= 0.95,
        "linear correlation of W vs drive on the upper four points is {r:.3} < 0.95"
    );

    for (omega, w_si, n_st) in &rows {
        println!(
            "criterion 4:   drive {omega:.2}: max W = {w_si:.0}/s, min n_st = {n_st:.3e}"
        );
    }
    println!(
        "criterion 4: PASS - max W and min n_st strictly increasing over 5 drive values, \
         linear correlation {r:.3} on the upper four; {:.1} min",
        t0.elapsed().as_secs_f64() / 60.0
    );
}

// ---------------------------------------------------------------------------
// 5. Analytics vs numerics
// ---------------------------------------------------------------------------

#[test]
fn criterion_05_analytics_vs_numerics() {
    let t0 = Instant::now();
    let base = reference(0.005, -1.0, -24.0);
    let pert = SweepOptions::new(SweepMethod::Perturbative);
    let numeric = SweepOptions::new(SweepMethod::Numeric);

    // Probe grid centred on the weak-drive optimum.
    let delta_axis = linspace(-1.0043, -1.0023, 5);
    let delta_c_axis = linspace(-27.0, -21.0, 5);
    let mut worst: (f64, f64, f64, &str) = (0.0, 0.0, 0.0, "");
    for &delta in &delta_axis {
        for &delta_c in &delta_c_axis {
            let a = evaluate_cell(&base, delta, delta_c, &pert);
            let b = evaluate_cell(&base, delta, delta_c, &numeric);
            assert_eq!(a.status, CellStatus::Cooling, "analytic cell ({delta}, {delta_c})");
            assert_eq!(b.status, CellStatus::Cooling, "numeric cell ({delta}, {delta_c})");
            let ra = a.rates.as_ref().unwrap();
            let rb = b.rates.as_ref().unwrap();
            for (label, va, vb) in [
                ("A+", ra.a_plus, rb.a_plus),
                ("A-", ra.a_minus, rb.a_minus),
            ] {
                let dev = rel_dev(vb, va);
                assert!(
                    dev <= 0.10,
                    "{label} at ({delta}, {delta_c}): analytic {va:.4e}, numeric {vb:.4e}, \
                     deviation {:.1}% > 10%",
                    100.0 * dev
                );
                if dev > worst.0 {
                    worst = (dev, delta, delta_c, label);
                }
            }
        }
    }

    // At ten times the drive the same comparison develops a systematic
    // saturation deviation; check it is visible at the map optimum.
    let peak = find_extrema(cooling_map()).unwrap().max_w;
    let strong = reference(0.05, peak.delta, peak.delta_c);
    let pert_strong = perturbative_rates(&strong).unwrap();
    let strong_dev = rel_dev(peak.w, pert_strong.w);
    assert!(
        strong_dev > 0.05,
        "expected a visible saturation deviation at drive 0.05, measured {:.1}%",
        100.0 * strong_dev
    );

    println!(
        "criterion 5: PASS - weak-drive A+/A- agree within {:.1}% (worst {} at \
         Delta = {:.4}, delta_c = {:.1}); saturation deviation {:.0}% at drive 0.05; {:.1} min",
        100.0 * worst.0,
        worst.3,
        worst.1,
        worst.2,
        100.0 * strong_dev,
        t0.elapsed().as_secs_f64() / 60.0
    );
}

// ---------------------------------------------------------------------------
// 6. Density-matrix contracts under randomized parameters
// ---------------------------------------------------------------------------

#[test]
fn criterion_06_density_matrix_contracts() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let layout = HilbertLayout::default();
    let (mut worst_trace, mut worst_herm, mut worst_eig) = (0.0f64, 0.0f64, 0.0f64);
    for case in 0..20 {
        let mut p = reference(
            rng.random_range(0.001..0.3),
            rng.random_range(-2.0..0.5),
            rng.random_range(-30.0..5.0),
        );
        p.g = rng.random_range(0.05..0.8);
        p.kappa = rng.random_range(3.0..20.0);
        p.gamma = rng.random_range(1e-4..0.05);
        p.eta = rng.random_range(0.005..0.08);
        p.phi = rng.random_range(0.0..std::f64::consts::FRAC_PI_2);
        p.theta_l = rng.random_range(0.0..std::f64::consts::FRAC_PI_2);
        p.theta_c = rng.random_range(0.0..std::f64::consts::FRAC_PI_2);
        p.validate().unwrap();

        let rho0 = DensityMatrix::ground_thermal(layout, rng.random_range(0.0..2.0)).unwrap();
        let out = propagate_structured(&rho0, &p, max_step(&p), 60.0, 200)
            .unwrap_or_else(|e| panic!("case {case}: {e}"));

        let trace = out
            .trajectory
            .trace_drift
            .iter()
            .fold(0.0f64, |m, &d| m.max(d));
        let herm = hermiticity_deviation(out.final_state.matrix());
        let eig = out.final_state.min_eigenvalue();
        assert!(trace < 1e-8, "case {case}: trace drift {trace:.2e} >= 1e-8");
        assert!(herm < 1e-10, "case {case}: hermiticity deviation {herm:.2e} >= 1e-10");
        assert!(eig >= -1e-8, "case {case}: min eigenvalue {eig:.2e} < -1e-8");
        worst_trace = worst_trace.max(trace);
        worst_herm = worst_herm.max(herm);
        worst_eig = worst_eig.min(eig);
    }
    println!(
        "criterion 6: PASS - 20 random parameter sets: trace drift <= {worst_trace:.1e}, \
         hermiticity <= {worst_herm:.1e}, min eigenvalue >= {worst_eig:.1e}"
    );
}

// ---------------------------------------------------------------------------
// 7. Rate-equation oracle
// ---------------------------------------------------------------------------

#[test]
fn criterion_07_rate_equation_oracle() {
    let n_trap = 12;
    let (a_plus, a_minus) = (2.4e-4, 8.0e-4);
    let w = a_minus - a_plus;
    let p0 = cavity_sideband::hilbert::thermal_weights(2.0, n_trap);
    let dt = 0.1 / (n_trap as f64 * (a_plus + a_minus));

    // Round trip: evolve the ladder, then fit the rates back.
    let traj = rate_equation_evolve(a_plus, a_minus, &p0, dt, 8.0 / w, 1).unwrap();
    let fit = fit_rates(&traj, &FitOptions::default()).unwrap();
    let dev_plus = rel_dev(fit.a_plus, a_plus);
    let dev_minus = rel_dev(fit.a_minus, a_minus);
    assert!(
        dev_plus <= 0.01 && dev_minus <= 0.01,
        "round trip: A+ dev {:.3}%, A- dev {:.3}% (> 1%)",
        100.0 * dev_plus,
        100.0 * dev_minus
    );

    // Stationary distribution: detailed balance and the closed-form mean.
    let long = rate_equation_evolve(a_plus, a_minus, &p0, dt, 40.0 / w, 1000).unwrap();
    let stationary = long.populations.last().unwrap();
    let ratio_target = a_plus / a_minus;
    let mut worst_balance = 0.0f64;
    for n in 0..n_trap - 1 {
        let ratio = stationary[n + 1] / stationary[n];
        worst_balance = worst_balance.max((ratio - ratio_target).abs());
    }
    assert!(
        worst_balance < 1e-8,
        "detailed balance violated by {worst_balance:.2e} (>= 1e-8)"
    );
    let mean = long.mean_n.last().unwrap();
    let mean_target = a_plus / (a_minus - a_plus);
    assert!(
        (mean - mean_target).abs() < 1e-4,
        "stationary mean occupation {mean:.6} vs {mean_target:.6} (>= 1e-4)"
    );

    println!(
        "criterion 7: PASS - round-trip A+/A- within {:.3}%/{:.3}%, detailed balance \
         within {worst_balance:.1e}, stationary mean within {:.1e} at {n_trap} levels",
        100.0 * dev_plus,
        100.0 * dev_minus,
        (mean - mean_target).abs()
    );
}

// ---------------------------------------------------------------------------
// 8. Resolvent vs correlation integral, and the free-space limit
// ---------------------------------------------------------------------------

#[test]
fn criterion_08_resolvent_vs_correlation() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut worst = (0.0f64, 0usize);
    for case in 0..5 {
        let mut p = reference(
            rng.random_range(0.002..0.05),
            rng.random_range(-1.8..-0.3),
            rng.random_range(-25.0..-3.0),
        );
        p.g = rng.random_range(0.1..0.6);
        p.kappa = rng.random_range(5.0..18.0);
        p.gamma = rng.random_range(2e-3..0.05);
        p.eta = rng.random_range(0.01..0.05);
        p.phi = rng.random_range(0.2..1.3);
        p.theta_l = rng.random_range(0.2..1.3);
        p.theta_c = rng.random_range(0.2..1.3);
        let a = perturbative_rates(&p).unwrap_or_else(|e| panic!("case {case}: {e}"));
        let b = correlation_rates(&p).unwrap_or_else(|e| panic!("case {case}: {e}"));
        for (label, va, vb) in [("A+", a.a_plus, b.a_plus), ("A-", a.a_minus, b.a_minus)] {
            let dev = rel_dev(vb, va);
            assert!(
                dev <= 0.01,
                "case {case}: {label} resolvent {va:.5e} vs correlation {vb:.5e} \
                 deviates {:.2}% > 1%",
                100.0 * dev
            );
            if dev > worst.0 {
                worst = (dev, case);
            }
        }
    }

    // Decoupled cavity: rates collapse to the free-space sideband
    // Lorentzians. The closed-form Lorentzian drops stimulated terms of
    // order (drive/linewidth)^2, so it is compared in its validity regime
    // gamma >> drive; the resolvent keeps those terms at smaller gamma.
    let mut worst_fs = 0.0f64;
    for gamma in [0.05, 0.15] {
        for delta in [-1.3, -1.0, -0.6] {
            let mut p = reference(0.005, delta, -7.0);
            p.g = 0.0;
            p.gamma = gamma;
            let pert = perturbative_rates(&p).unwrap();
            let (fs_plus, fs_minus) = free_space_rates(&p);
            for (label, va, vb) in [("A+", pert.a_plus, fs_plus), ("A-", pert.a_minus, fs_minus)]
            {
                let dev = rel_dev(va, vb);
                assert!(
                    dev <= 0.10,
                    "free space at delta {delta}, gamma {gamma:.2e}: {label} {va:.4e} vs \
                     Lorentzian {vb:.4e} deviates {:.1}% > 10%",
                    100.0 * dev
                );
                worst_fs = worst_fs.max(dev);
            }
        }
    }

    println!(
        "criterion 8: PASS - resolvent matches correlation integral within {:.2}% \
         (5 random sets); free-space Lorentzians within {:.2}%",
        100.0 * worst.0,
        100.0 * worst_fs
    );
}

// ---------------------------------------------------------------------------
// 9. Structural zeros
// ---------------------------------------------------------------------------

#[test]
fn criterion_09_structural_zeros() {
    // Zero Lamb-Dicke parameter: motion decouples, all rates vanish exactly.
    let mut p = reference(0.05, -1.0, -24.0);
    p.eta = 0.0;
    let rates = perturbative_rates(&p).unwrap();
    assert_eq!(rates.a_plus, 0.0, "A+ not exactly zero at eta = 0");
    assert_eq!(rates.a_minus, 0.0, "A- not exactly zero at eta = 0");
    assert_eq!(rates.w, 0.0, "W not exactly zero at eta = 0");

    // Zero drive: the absolute ground state is stationary.
    let p = reference(0.0, -1.0, -24.0);
    let layout = HilbertLayout::default();
    let rho0 = DensityMatrix::fock(layout, 0, 0, 0).unwrap();
    let out = propagate_structured(&rho0, &p, max_step(&p), 50.0, 100).unwrap();
    let max_n = out.trajectory.mean_n.iter().fold(0.0f64, |m, &v| m.max(v));
    let max_e = out.trajectory.pop_e.iter().fold(0.0f64, |m, &v| m.max(v));
    let drift = max_abs(&(out.final_state.matrix() - rho0.matrix()));
    assert!(max_n < 1e-12, "dark state grew occupation {max_n:.2e}");
    assert!(max_e < 1e-12, "dark state grew excitation {max_e:.2e}");
    assert!(drift < 1e-10, "dark state drifted by {drift:.2e}");

    // Lamb-Dicke rescaling: both rates scale by the same factor, so the
    // steady-state occupation is invariant.
    let mut pa = reference(0.05, -1.0, -24.0);
    pa.eta = 0.02;
    let mut pb = pa.clone();
    pb.eta = 0.004;
    let ra = perturbative_rates(&pa).unwrap();
    let rb = perturbative_rates(&pb).unwrap();
    let n_dev = rel_dev(rb.n_st, ra.n_st);
    let scale = ra.a_plus / rb.a_plus;
    assert!(
        n_dev < 1e-9,
        "steady occupation changed by {n_dev:.2e} under eta rescaling"
    );
    assert!(
        rel_dev(scale, 25.0) < 1e-9,
        "rates scaled by {scale:.12} instead of (eta ratio)^2 = 25"
    );

    println!(
        "criterion 9: PASS - eta = 0 gives exact zeros, zero drive is stationary \
         (drift {drift:.1e}), eta rescaling leaves n_st invariant ({n_dev:.1e})"
    );
}

// ---------------------------------------------------------------------------
// 10. Determinism across worker counts
// ---------------------------------------------------------------------------

#[test]
fn criterion_10_determinism() {
    // Analytic map over a mixed warm/cold region, several worker counts plus
    // a repeat at the same count.
    let base = reference(0.05, -1.0, -24.0);
    let delta_axis = linspace(-1.2, -0.8, 5);
    let delta_c_axis = linspace(-27.0, -9.0, 4);
    let mut csvs: Vec<String> = Vec::new();
    for workers in [1usize, 2, 5, 2] {
        let mut options = SweepOptions::new(SweepMethod::Perturbative);
        options.workers = Some(workers);
        let grid = run_sweep(&base, &delta_axis, &delta_c_axis, &options).unwrap();
        csvs.push(grid.to_csv());
    }
    for (k, csv) in csvs.iter().enumerate().skip(1) {
        assert_eq!(
            csv.as_bytes(),
            csvs[0].as_bytes(),
            "analytic map run {k} differs from run 0"
        );
    }

    // Numerical cells: the propagation path must be deterministic too.
    let delta_axis = vec![-0.999, -0.996];
    let delta_c_axis = vec![-24.0, -21.0];
    let mut csvs: Vec<String> = Vec::new();
    for workers in [1usize, 2] {
        let mut options = SweepOptions::new(SweepMethod::Numeric);
        options.workers = Some(workers);
        let grid = run_sweep(&base, &delta_axis, &delta_c_axis, &options).unwrap();
        csvs.push(grid.to_csv());
    }
    assert_eq!(
        csvs[0].as_bytes(),
        csvs[1].as_bytes(),
        "numerical map differs between 1 and 2 workers"
    );

    println!(
        "criterion 10: PASS - analytic and numerical maps byte-identical across \
         worker counts (1, 2, 5) and repeated runs"
    );
}
