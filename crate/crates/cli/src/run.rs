//! Mode execution: dispatch a validated [`RunConfig`] to the library, write
//! artifacts atomically, and map failures to exit codes.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use cavity_sideband::dynamics::{convergence_scan, max_step, propagate_structured};
use cavity_sideband::hilbert::DensityMatrix;
use cavity_sideband::model::ModelParams;
use cavity_sideband::molecules::{cooperativity, lamb_dicke, vacuum_rabi};
use cavity_sideband::rates::{compare_methods, perturbative_rates, FitOptions, RateResult};
use cavity_sideband::sweep::{
    evaluate_cell, find_extrema, run_omega_scan, run_sweep, write_svg_heatmap, CellStatus,
    OmegaScanOptions, SvgQuantity, SweepGrid, SweepMethod, SweepOptions,
};

use crate::config::{load_table, manifest, MethodSel, Mode, Numerics, RunConfig};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Exit classification for a failed run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Failure {
    /// Exit 2: configuration or usage error.
    Config,
    /// Exit 3: numerical failure (propagation, fit, or steady state).
    Numerical,
    /// Exit 4: sweep completed but some cells failed.
    PartialSweep,
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Config => 2,
            Failure::Numerical => 3,
            Failure::PartialSweep => 4,
        }
    }
}

#[derive(Debug)]
pub struct RunError {
    pub failure: Failure,
    pub message: String,
}

impl RunError {
    fn numerical(e: impl std::fmt::Display) -> Self {
        Self {
            failure: Failure::Numerical,
            message: e.to_string(),
        }
    }
}

type Result<T> = std::result::Result<T, RunError>;

/// Runtime knobs taken from the command line.
pub struct RunContext {
    pub out_dir: PathBuf,
    pub svg: bool,
    pub workers: Option<usize>,
}

/// Write `bytes` to `path` atomically (temp file in the same directory, then
/// rename), so failures never leave partial artifacts behind.
fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let mut tmp = tempfile::NamedTempFile::new_in(dir.unwrap_or(Path::new(".")))?;
    tmp.write_all(bytes)?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

fn emit(path: &Path, bytes: &[u8]) -> Result<()> {
    write_atomic(path, bytes).map_err(|e| RunError {
        failure: Failure::Numerical,
        message: format!("writing {}: {e}", path.display()),
    })
}

/// Execute the configured run. Artifacts land in `ctx.out_dir`; a resolved
/// run manifest is always written alongside them.
pub fn run(config: &RunConfig, ctx: &RunContext) -> Result<()> {
    std::fs::create_dir_all(&ctx.out_dir).map_err(|e| RunError {
        failure: Failure::Config,
        message: format!("cannot create output dir {}: {e}", ctx.out_dir.display()),
    })?;
    emit(
        &ctx.out_dir.join("run-manifest.ini"),
        manifest(config, VERSION, ctx.workers).as_bytes(),
    )?;
    match config.mode {
        Mode::Simulate => run_simulate(config, ctx),
        Mode::Rates => run_rates(config, ctx),
        Mode::Sweep => run_sweep_mode(config, ctx),
        Mode::OmegaScan => run_omega_mode(config, ctx),
        Mode::Molecule => run_molecule(config, ctx),
        Mode::Convergence => run_convergence(config, ctx),
    }
}

fn params_of(config: &RunConfig) -> Result<&ModelParams> {
    config.params.as_ref().ok_or_else(|| RunError {
        failure: Failure::Config,
        message: "this mode needs model parameters".into(),
    })
}

fn resolve_grid(n: &Numerics, params: &ModelParams) -> (f64, usize) {
    let dt = n.dt.unwrap_or_else(|| max_step(params));
    let steps = (n.t_end / dt).ceil().max(1.0) as usize;
    let record_every = n.record_every.unwrap_or_else(|| (steps / 1000).max(1));
    (dt, record_every)
}

fn run_simulate(config: &RunConfig, ctx: &RunContext) -> Result<()> {
    let params = params_of(config)?;
    let n = &config.numerics;
    let (dt, record_every) = resolve_grid(n, params);
    let rho0 =
        DensityMatrix::ground_thermal(params.layout, n.mean_n0).map_err(RunError::numerical)?;
    let out = propagate_structured(&rho0, params, dt, n.t_end, record_every)
        .map_err(RunError::numerical)?;
    let mut csv = Vec::new();
    out.trajectory
        .write_csv(&mut csv)
        .map_err(RunError::numerical)?;
    let path = ctx.out_dir.join("trajectory.csv");
    emit(&path, &csv)?;
    let last = out.trajectory.len() - 1;
    println!(
        "simulate: {} samples over t = [0, {}], final mean_n = {:.6e} ({})",
        out.trajectory.len(),
        n.t_end,
        out.trajectory.mean_n[last],
        path.display()
    );
    Ok(())
}

fn rate_row(delta: f64, delta_c: f64, r: &RateResult, status: &str) -> String {
    format!(
        "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{},{}\n",
        delta, delta_c, r.a_plus, r.a_minus, r.w, r.w_si_per_s, r.n_st, r.method, status
    )
}

fn run_rates(config: &RunConfig, ctx: &RunContext) -> Result<()> {
    let params = params_of(config)?;
    let n = &config.numerics;
    let mut csv = String::from(
        "delta_nu,delta_c_nu,a_plus_nu,a_minus_nu,w_nu,w_si_per_s,n_st,method,status\n",
    );
    match config.method {
        MethodSel::Perturbative => {
            let r = perturbative_rates(params).map_err(RunError::numerical)?;
            print_rate("perturbative", &r);
            csv.push_str(&rate_row(params.delta, params.delta_c, &r, "ok"));
        }
        MethodSel::Numeric => {
            let opts = sweep_options(SweepMethod::Numeric, ctx);
            let cell = evaluate_cell(params, params.delta, params.delta_c, &opts);
            match (&cell.status, &cell.rates) {
                (CellStatus::Cooling, Some(r)) => {
                    print_rate("numeric", r);
                    csv.push_str(&rate_row(params.delta, params.delta_c, r, "ok"));
                }
                (status, _) => {
                    return Err(RunError {
                        failure: Failure::Numerical,
                        message: format!(
                            "numeric rate extraction: {status}{}",
                            cell.note.map(|n| format!(" ({n})")).unwrap_or_default()
                        ),
                    })
                }
            }
        }
        MethodSel::Both => {
            let (dt, record_every) = resolve_grid(n, params);
            let fit = FitOptions {
                skip_time: n.skip_time,
                min_decay_fraction: n.min_decay_fraction,
                nu_si: Some(params.nu_si),
            };
            let cmp = compare_methods(params, n.mean_n0, dt, n.t_end, record_every, &fit)
                .map_err(RunError::numerical)?;
            print_rate("perturbative", &cmp.perturbative);
            print_rate("trajectory-fit", &cmp.trajectory_fit);
            print_rate("rate-equation", &cmp.rate_equation);
            println!(
                "rates: fit vs perturbative dev {:.2}%, ladder vs perturbative dev {:.2}%",
                100.0 * cmp.rel_w_fit_vs_perturbative,
                100.0 * cmp.rel_w_ladder_vs_perturbative
            );
            if let Some(w) = &cmp.agreement_warning {
                println!("warning: {w}");
            }
            for r in [&cmp.perturbative, &cmp.trajectory_fit, &cmp.rate_equation] {
                csv.push_str(&rate_row(params.delta, params.delta_c, r, "ok"));
            }
        }
    }
    let path = ctx.out_dir.join("rates.csv");
    emit(&path, csv.as_bytes())?;
    println!("rates: wrote {}", path.display());
    Ok(())
}

fn print_rate(label: &str, r: &RateResult) {
    println!(
        "rates[{label}]: W = {:.6e} nu ({:.4e} 1/s), A+ = {:.6e}, A- = {:.6e}, n_st = {:.6e}",
        r.w, r.w_si_per_s, r.a_plus, r.a_minus, r.n_st
    );
}

fn sweep_options(method: SweepMethod, ctx: &RunContext) -> SweepOptions {
    let mut opts = SweepOptions::new(method);
    opts.workers = ctx.workers;
    opts
}

fn emit_sweep_artifacts(
    grid: &SweepGrid,
    method: SweepMethod,
    ctx: &RunContext,
) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let csv_path = ctx.out_dir.join(format!("sweep-{method}.csv"));
    emit(&csv_path, grid.to_csv().as_bytes())?;
    written.push(csv_path);
    if ctx.svg {
        for (quantity, tag) in [
            (SvgQuantity::CoolingRate, "w"),
            (SvgQuantity::SteadyOccupation, "n_st"),
        ] {
            let mut buf = Vec::new();
            write_svg_heatmap(grid, quantity, &mut buf).map_err(RunError::numerical)?;
            let path = ctx.out_dir.join(format!("sweep-{method}-{tag}.svg"));
            emit(&path, &buf)?;
            written.push(path);
        }
    }
    Ok(written)
}

fn run_sweep_mode(config: &RunConfig, ctx: &RunContext) -> Result<()> {
    let params = params_of(config)?;
    let mut partial = false;
    for method in config.method.sweep_methods() {
        let opts = sweep_options(method, ctx);
        let grid = run_sweep(
            params,
            &config.sweep.delta_axis,
            &config.sweep.delta_c_axis,
            &opts,
        )
        .map_err(RunError::numerical)?;
        let written = emit_sweep_artifacts(&grid, method, ctx)?;
        match find_extrema(&grid) {
            Ok(ex) => println!(
                "sweep[{method}]: max W = {:.6e} nu ({:.4e} 1/s) at (delta = {}, delta_c = {}); \
                 min n_st = {:.6e} at (delta = {}, delta_c = {})",
                ex.max_w.w,
                ex.max_w.w * params.nu_si,
                ex.max_w.delta,
                ex.max_w.delta_c,
                ex.min_n_st.n_st,
                ex.min_n_st.delta,
                ex.min_n_st.delta_c
            ),
            Err(e) => println!("sweep[{method}]: no extrema ({e})"),
        }
        let ff = grid.failure_fraction();
        if ff > 0.0 {
            partial = true;
            println!(
                "sweep[{method}]: {:.1}% of cells failed (see status column)",
                100.0 * ff
            );
        }
        for p in written {
            println!("sweep[{method}]: wrote {}", p.display());
        }
    }
    if partial {
        return Err(RunError {
            failure: Failure::PartialSweep,
            message: "sweep completed with failed cells; artifacts were written".into(),
        });
    }
    Ok(())
}

fn run_omega_mode(config: &RunConfig, ctx: &RunContext) -> Result<()> {
    let params = params_of(config)?;
    let axes = config.omega.axes(&config.sweep);
    let mut partial = false;
    for method in config.method.sweep_methods() {
        let options = OmegaScanOptions {
            axes: axes.clone(),
            sweep: sweep_options(method, ctx),
        };
        let scan = run_omega_scan(params, &config.omega.omega_values, &options)
            .map_err(RunError::numerical)?;
        let path = ctx.out_dir.join(format!("omega-scan-{method}.csv"));
        emit(&path, scan.to_csv().as_bytes())?;
        for e in &scan.entries {
            println!(
                "omega-scan[{method}]: Omega = {}: max W = {:.6e} nu ({:.4e} 1/s) at \
                 (delta = {:.6}, delta_c = {}), min n_st = {:.6e}",
                e.omega,
                e.max_w.w,
                e.max_w.w * params.nu_si,
                e.max_w.delta,
                e.max_w.delta_c,
                e.min_n_st.n_st
            );
            if e.failure_fraction > 0.0 {
                partial = true;
            }
        }
        println!("omega-scan[{method}]: wrote {}", path.display());
    }
    if partial {
        return Err(RunError {
            failure: Failure::PartialSweep,
            message: "omega scan completed with failed cells".into(),
        });
    }
    Ok(())
}

fn run_molecule(config: &RunConfig, ctx: &RunContext) -> Result<()> {
    let table = load_table(&config.molecule_file).map_err(|e| RunError {
        failure: Failure::Config,
        message: e.to_string(),
    })?;
    let rows: Vec<_> = match &config.molecule_name {
        Some(name) => table
            .iter()
            .filter(|m| m.name.eq_ignore_ascii_case(name))
            .collect(),
        None => table.iter().collect(),
    };
    if rows.is_empty() {
        return Err(RunError {
            failure: Failure::Config,
            message: "no matching molecule row".into(),
        });
    }
    let trap = &config.trap;
    let cavity = &config.cavity;
    let mut csv = String::from(
        "name,wavenumber_cm1,dipole_au,mass_amu,gamma_table_s1,gamma_computed_s1,eta,\
         g_nu,kappa_nu,gamma_nu,cooperativity\n",
    );
    println!(
        "molecule table (trap nu = {:.6e} rad/s, cavity field = {} V/m, kappa = {:.6e} rad/s)",
        trap.nu_si, cavity.field_amplitude, cavity.kappa_si
    );
    println!(
        "{:<9} {:>9} {:>7} {:>8} {:>11} {:>12} {:>9} {:>8} {:>8} {:>10} {:>7}",
        "name", "wn[cm-1]", "mu[au]", "M[amu]", "gamma[1/s]", "gamma_c[1/s]", "eta", "g/nu",
        "kappa/nu", "gamma/nu", "C1"
    );
    for m in rows {
        let gamma_c = m.einstein_a();
        let eta = lamb_dicke(m.wavenumber, m.mass, trap.nu_si);
        let g = vacuum_rabi(m.dipole, cavity.field_amplitude);
        let c1 = cooperativity(g, cavity.kappa_si, m.gamma_si);
        println!(
            "{:<9} {:>9.1} {:>7.3} {:>8.2} {:>11.3} {:>12.3} {:>9.5} {:>8.4} {:>8.3} {:>10.3e} \
             {:>7.1}",
            m.name,
            m.wavenumber,
            m.dipole,
            m.mass,
            m.gamma_si,
            gamma_c,
            eta,
            g / trap.nu_si,
            cavity.kappa_si / trap.nu_si,
            m.gamma_si / trap.nu_si,
            c1
        );
        let _ = writeln!(
            csv,
            "{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
            m.name,
            m.wavenumber,
            m.dipole,
            m.mass,
            m.gamma_si,
            gamma_c,
            eta,
            g / trap.nu_si,
            cavity.kappa_si / trap.nu_si,
            m.gamma_si / trap.nu_si,
            c1
        );
    }
    let path = ctx.out_dir.join("molecules.csv");
    emit(&path, csv.as_bytes())?;
    println!("molecule: wrote {}", path.display());
    Ok(())
}

fn run_convergence(config: &RunConfig, ctx: &RunContext) -> Result<()> {
    let params = params_of(config)?;
    let n = &config.numerics;
    let (dt, record_every) = resolve_grid(n, params);
    let fit = FitOptions {
        skip_time: n.skip_time,
        min_decay_fraction: n.min_decay_fraction,
        nu_si: Some(params.nu_si),
    };
    let report = convergence_scan(
        params,
        n.mean_n0,
        &n.n_traps,
        dt,
        n.t_end,
        record_every,
        &fit,
    )
    .map_err(RunError::numerical)?;
    let mut csv = String::from("n_trap,w_nu,w_si_per_s,n_st\n");
    for row in &report.rows {
        println!(
            "convergence: n_trap = {}: W = {:.6e} nu ({:.4e} 1/s), n_st = {:.6e}",
            row.n_trap, row.rates.w, row.rates.w_si_per_s, row.rates.n_st
        );
        let _ = writeln!(
            csv,
            "{},{:.12e},{:.12e},{:.12e}",
            row.n_trap, row.rates.w, row.rates.w_si_per_s, row.rates.n_st
        );
    }
    println!(
        "convergence: final relative change {:.3e} -> {}",
        report.final_change,
        if report.converged {
            "converged"
        } else {
            "not converged"
        }
    );
    let path = ctx.out_dir.join("convergence.csv");
    emit(&path, csv.as_bytes())?;
    println!("convergence: wrote {}", path.display());
    Ok(())
}
