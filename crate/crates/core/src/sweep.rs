//! Parameter-plane sweeps: 2-D `(Delta, delta_c)` detuning grids and 1-D
//! drive-strength scans, with extremum location, CSV export, and a minimal
//! SVG heatmap writer.
//!
//! Every grid cell is an independent rate extraction at the base parameters
//! with only the two detunings replaced. Two per-cell engines are available:
//!
//! * **Perturbative** — the resolvent rates of
//!   [`perturbative_rates`](crate::rates::perturbative_rates). Fast (linear
//!   solves on the reduced space) and exact to second order in the Lamb-Dicke
//!   parameter, but blind to drive saturation.
//! * **Numeric** — full master-equation propagation with an exponential fit
//!   to the mean trap occupation. The net rate `W` comes from the fit; the
//!   asymptotic occupation comes from the exact steady state of the full
//!   Liouvillian (a single sparse-free LU solve), which resolves occupations
//!   far below what a fitted offset can distinguish from zero. The sideband
//!   rates are then reconstructed through the stationary relations
//!   `A+ = n_st W` and `A- = (1 + n_st) W`.
//!
//! The numeric engine sizes its transient skip and fit window per cell from
//! the perturbative rate estimate (see [`NumericProtocol`]); cells whose
//! estimated rate is below the configured resolution floor are recorded as
//! [`CellStatus::BelowResolution`] rather than propagated for hours, and
//! heating cells ([`CellStatus::Heating`]) are recorded without a fit. Both
//! carry the exact steady-state occupation where it is available. Failures
//! are always explicit ([`CellStatus::Failed`] plus a note), never silent
//! zeros, and a sweep as a whole fails only when more than 20% of its cells
//! fail.
//!
//! Determinism: cells are statically partitioned over a fixed number of
//! worker threads and merged by index, so results — including CSV bytes —
//! are identical for any worker count.

use std::io::Write;

use crate::dynamics::{max_step, propagate_structured};
use crate::hilbert::{mean_trap_occupation, DensityMatrix};
use crate::model::ModelParams;
use crate::rates::{
    fit_rates, perturbative_rates, steady_state_full, FitOptions, RateMethod, RateResult,
};
use crate::{Error, Result};

/// Which per-cell rate engine a sweep uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepMethod {
    /// Resolvent rates on the reduced space (fast, weak-drive regime).
    Perturbative,
    /// Master-equation propagation + trajectory fit, with the steady-state
    /// occupation from the full Liouvillian.
    Numeric,
}

impl std::fmt::Display for SweepMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SweepMethod::Perturbative => "perturbative",
            SweepMethod::Numeric => "numeric",
        })
    }
}

/// Window/transient policy for the numeric per-cell engine.
///
/// All times are in trap units (`1/nu`). The perturbative rate at the cell is
/// used as an order-of-magnitude estimate `w_est` to size the windows:
///
/// * transient skip `= clamp(skip_frac / w_est, skip_min, skip_max)` — the
///   slowest internal transient relaxes at roughly the bare molecular decay
///   rate, orders of magnitude faster than a weak-drive cooling rate but not
///   faster than a saturated one, hence the rate-proportional clamp. The
///   defaults are calibrated so the residual fit bias at the weak-drive
///   validity point is about 1%; an insufficient skip biases the fitted rate
///   low by tens of percent there;
/// * fit window `= min(window_frac / w_est, window_max)`.
///
/// Cells with `|w_est| < w_floor` are classified instead of propagated:
/// `w_est <= -w_floor` heats, `|w_est| < w_floor` is below resolution.
#[derive(Debug, Clone)]
pub struct NumericProtocol {
    /// Resolution floor on the rate estimate [1/nu units].
    pub w_floor: f64,
    /// Transient skip as a fraction of the estimated decay time.
    pub skip_frac: f64,
    /// Lower clamp on the transient skip.
    pub skip_min: f64,
    /// Upper clamp on the transient skip.
    pub skip_max: f64,
    /// Fit window as a multiple of the estimated decay time.
    pub window_frac: f64,
    /// Upper cap on the fit window.
    pub window_max: f64,
    /// Rate estimate used if the perturbative engine fails at a cell.
    pub fallback_w_est: f64,
    /// Target number of recorded trajectory samples per cell.
    pub target_samples: usize,
    /// Identifiability guard forwarded to the fit: minimum fraction of the
    /// full decay the window must cover.
    pub min_decay_fraction: f64,
}

impl Default for NumericProtocol {
    fn default() -> Self {
        Self {
            w_floor: 1e-6,
            skip_frac: 0.08,
            skip_min: 1500.0,
            skip_max: 18_000.0,
            window_frac: 3.2,
            window_max: 15_000.0,
            fallback_w_est: 1e-4,
            target_samples: 1000,
            min_decay_fraction: 0.02,
        }
    }
}

/// Sweep-wide options.
#[derive(Debug, Clone)]
pub struct SweepOptions {
    pub method: SweepMethod,
    pub numeric: NumericProtocol,
    /// Worker-thread count; `None` uses the machine's available parallelism.
    pub workers: Option<usize>,
}

impl SweepOptions {
    pub fn new(method: SweepMethod) -> Self {
        Self {
            method,
            numeric: NumericProtocol::default(),
            workers: None,
        }
    }
}

/// Outcome class of one grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellStatus {
    /// Cooling rate extracted; `rates` is populated.
    Cooling,
    /// Net heating at this cell; excluded from extremum searches.
    Heating,
    /// Cooling too slow to resolve within the configured windows.
    BelowResolution,
    /// The cell computation failed; see the note.
    Failed,
}

impl std::fmt::Display for CellStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CellStatus::Cooling => "ok",
            CellStatus::Heating => "heating",
            CellStatus::BelowResolution => "below-resolution",
            CellStatus::Failed => "failed",
        })
    }
}

/// One evaluated grid cell.
#[derive(Debug, Clone)]
pub struct Cell {
    pub delta: f64,
    pub delta_c: f64,
    pub status: CellStatus,
    /// Full rate set when the cell cools (and, for the perturbative engine,
    /// also when it heats — the resolvent yields well-defined negative
    /// rates).
    pub rates: Option<RateResult>,
    /// Steady-state mean trap occupation, when available (exact steady state
    /// for the numeric engine, perturbative value otherwise); `NaN` if not.
    pub n_st: f64,
    /// Failure or classification detail.
    pub note: Option<String>,
}

/// A completed 2-D detuning sweep.
#[derive(Debug, Clone)]
pub struct SweepGrid {
    pub delta_axis: Vec<f64>,
    pub delta_c_axis: Vec<f64>,
    /// Row-major cells: index `i * delta_c_axis.len() + j` holds
    /// `(delta_axis[i], delta_c_axis[j])`.
    pub cells: Vec<Cell>,
    pub method: SweepMethod,
    pub base: ModelParams,
}

impl SweepGrid {
    /// Cell at `(delta_axis[i], delta_c_axis[j])`.
    pub fn cell(&self, i: usize, j: usize) -> &Cell {
        &self.cells[i * self.delta_c_axis.len() + j]
    }

    /// Fraction of cells with status [`CellStatus::Failed`].
    pub fn failure_fraction(&self) -> f64 {
        let failed = self
            .cells
            .iter()
            .filter(|c| c.status == CellStatus::Failed)
            .count();
        failed as f64 / self.cells.len().max(1) as f64
    }

    /// The sweep CSV: a header row, then one row per cell.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "delta_nu,delta_c_nu,a_plus_nu,a_minus_nu,w_nu,w_si_per_s,n_st,method,status\n",
        );
        for cell in &self.cells {
            let (a_plus, a_minus, w, w_si) = match &cell.rates {
                Some(r) => (r.a_plus, r.a_minus, r.w, r.w_si_per_s),
                None => (f64::NAN, f64::NAN, f64::NAN, f64::NAN),
            };
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                fmt_csv(cell.delta),
                fmt_csv(cell.delta_c),
                fmt_csv(a_plus),
                fmt_csv(a_minus),
                fmt_csv(w),
                fmt_csv(w_si),
                fmt_csv(cell.n_st),
                self.method,
                cell.status
            ));
        }
        out
    }

    /// Write [`SweepGrid::to_csv`] to `out`.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        out.write_all(self.to_csv().as_bytes())
    }
}

/// Deterministic CSV number formatting; `NaN` is spelled `nan`.
fn fmt_csv(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else {
        format!("{x:.12e}")
    }
}

/// Evaluate one cell at `(delta, delta_c)` on top of `base`.
///
/// This is exactly the per-cell computation of [`run_sweep`]; a 1x1 sweep
/// reproduces it bit for bit.
pub fn evaluate_cell(
    base: &ModelParams,
    delta: f64,
    delta_c: f64,
    options: &SweepOptions,
) -> Cell {
    let mut params = base.clone();
    params.delta = delta;
    params.delta_c = delta_c;
    match options.method {
        SweepMethod::Perturbative => perturbative_cell(&params),
        SweepMethod::Numeric => numeric_cell(&params, &options.numeric),
    }
}

fn perturbative_cell(params: &ModelParams) -> Cell {
    match perturbative_rates(params) {
        Ok(r) => {
            let status = if r.w > 0.0 {
                CellStatus::Cooling
            } else {
                CellStatus::Heating
            };
            Cell {
                delta: params.delta,
                delta_c: params.delta_c,
                status,
                n_st: r.n_st,
                rates: Some(r),
                note: None,
            }
        }
        Err(e) => failed_cell(params, e.to_string()),
    }
}

fn failed_cell(params: &ModelParams, note: String) -> Cell {
    Cell {
        delta: params.delta,
        delta_c: params.delta_c,
        status: CellStatus::Failed,
        rates: None,
        n_st: f64::NAN,
        note: Some(note),
    }
}

fn numeric_cell(params: &ModelParams, proto: &NumericProtocol) -> Cell {
    // Order-of-magnitude rate estimate for window sizing and classification.
    let w_est = match perturbative_rates(params) {
        Ok(r) => r.w,
        Err(_) => proto.fallback_w_est,
    };

    // The exact steady-state occupation is cheap (one LU solve) and
    // well-defined regardless of how slow the approach to it is.
    let n_ss = steady_state_full(params)
        .and_then(|ss| mean_trap_occupation(ss.matrix(), &params.layout));

    if w_est <= -proto.w_floor {
        return Cell {
            delta: params.delta,
            delta_c: params.delta_c,
            status: CellStatus::Heating,
            rates: None,
            n_st: n_ss.unwrap_or(f64::NAN),
            note: Some(format!("estimated net rate {w_est:.3e} heats")),
        };
    }
    if w_est < proto.w_floor {
        return Cell {
            delta: params.delta,
            delta_c: params.delta_c,
            status: CellStatus::BelowResolution,
            rates: None,
            n_st: n_ss.unwrap_or(f64::NAN),
            note: Some(format!(
                "estimated net rate {w_est:.3e} below resolution floor {:.1e}",
                proto.w_floor
            )),
        };
    }

    let n_ss = match n_ss {
        Ok(n) => n,
        Err(e) => return failed_cell(params, format!("steady state: {e}")),
    };

    let skip = (proto.skip_frac / w_est).clamp(proto.skip_min, proto.skip_max);
    let window = (proto.window_frac / w_est).min(proto.window_max);
    let horizon = skip + window;
    let dt = max_step(params);
    let steps = (horizon / dt).ceil() as usize;
    let record_every = (steps / proto.target_samples.max(1)).max(1);

    let rho0 = match DensityMatrix::ground_thermal(params.layout, 1.0) {
        Ok(r) => r,
        Err(e) => return failed_cell(params, format!("initial state: {e}")),
    };
    let out = match propagate_structured(&rho0, params, dt, horizon, record_every) {
        Ok(o) => o,
        Err(e) => return failed_cell(params, format!("propagation: {e}")),
    };
    let fit = fit_rates(
        &out.trajectory,
        &FitOptions {
            skip_time: skip,
            min_decay_fraction: proto.min_decay_fraction,
            nu_si: Some(params.nu_si),
        },
    );
    match fit {
        Ok(f) => {
            // Hybrid estimator: fitted net rate, exact asymptotic occupation.
            let w = f.w;
            let rates = RateResult {
                a_plus: n_ss * w,
                a_minus: (1.0 + n_ss) * w,
                w,
                n_st: n_ss,
                w_si_per_s: w * params.nu_si,
                method: RateMethod::TrajectoryFit,
                fit_residual: f.fit_residual,
                decay_fraction: f.decay_fraction,
            };
            let status = if w > 0.0 {
                CellStatus::Cooling
            } else {
                CellStatus::Heating
            };
            Cell {
                delta: params.delta,
                delta_c: params.delta_c,
                status,
                rates: Some(rates),
                n_st: n_ss,
                note: None,
            }
        }
        // A rejected fit means the window did not capture enough decay to
        // identify the rate — the cell is slower than estimated, not broken.
        Err(Error::FitFailure(msg)) => Cell {
            delta: params.delta,
            delta_c: params.delta_c,
            status: CellStatus::BelowResolution,
            rates: None,
            n_st: n_ss,
            note: Some(format!("fit rejected: {msg}")),
        },
        Err(e) => failed_cell(params, format!("fit: {e}")),
    }
}

/// Run a 2-D detuning sweep over `delta_axis` x `delta_c_axis`.
///
/// Cells are independent and merged by index; the result is identical for
/// any worker count. Returns an error if the axes are empty, the base
/// parameters are invalid, or more than 20% of cells fail.
pub fn run_sweep(
    base: &ModelParams,
    delta_axis: &[f64],
    delta_c_axis: &[f64],
    options: &SweepOptions,
) -> Result<SweepGrid> {
    if delta_axis.is_empty() || delta_c_axis.is_empty() {
        return Err(Error::InvalidParams(
            "sweep axes must be non-empty".to_string(),
        ));
    }
    for (name, axis) in [("delta_axis", delta_axis), ("delta_c_axis", delta_c_axis)] {
        if axis.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams(format!("{name} contains non-finite values")));
        }
    }
    base.validate()?;

    let n_cols = delta_c_axis.len();
    let n_cells = delta_axis.len() * n_cols;
    let workers = options
        .workers
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
        .clamp(1, n_cells);

    let eval = |flat: usize| -> Cell {
        let (i, j) = (flat / n_cols, flat % n_cols);
        evaluate_cell(base, delta_axis[i], delta_c_axis[j], options)
    };

    // Static partition into contiguous index ranges, merged by index.
    let chunk = n_cells.div_ceil(workers);
    let mut cells: Vec<Cell> = Vec::with_capacity(n_cells);
    if workers == 1 {
        cells.extend((0..n_cells).map(eval));
    } else {
        let mut parts: Vec<Vec<Cell>> = Vec::with_capacity(workers);
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..workers)
                .map(|k| {
                    let lo = k * chunk;
                    let hi = ((k + 1) * chunk).min(n_cells);
                    let eval = &eval;
                    scope.spawn(move || (lo..hi).map(eval).collect::<Vec<Cell>>())
                })
                .collect();
            for h in handles {
                parts.push(h.join().expect("sweep worker panicked"));
            }
        });
        for part in parts {
            cells.extend(part);
        }
    }

    let grid = SweepGrid {
        delta_axis: delta_axis.to_vec(),
        delta_c_axis: delta_c_axis.to_vec(),
        cells,
        method: options.method,
        base: base.clone(),
    };
    let failed = grid
        .cells
        .iter()
        .filter(|c| c.status == CellStatus::Failed)
        .count();
    if (failed as f64) > 0.2 * n_cells as f64 {
        return Err(Error::SweepFailure {
            failed,
            total: n_cells,
        });
    }
    Ok(grid)
}

/// Location and values of one extremal cell.
#[derive(Debug, Clone, Copy)]
pub struct CellRef {
    pub i: usize,
    pub j: usize,
    pub delta: f64,
    pub delta_c: f64,
    pub w: f64,
    pub n_st: f64,
}

/// Extrema of a sweep over its cooling cells.
#[derive(Debug, Clone, Copy)]
pub struct Extrema {
    /// Cell with the largest net cooling rate.
    pub max_w: CellRef,
    /// Cell with the smallest steady-state occupation.
    pub min_n_st: CellRef,
}

/// Locate the maximum-`W` and minimum-`n_st` cells among cooling cells.
///
/// Ties are broken deterministically: smaller `|delta_c|` first, then smaller
/// `|delta + 1|` (distance from the first red sideband), then the lower cell
/// index.
pub fn find_extrema(grid: &SweepGrid) -> Result<Extrema> {
    let n_cols = grid.delta_c_axis.len();
    let mut max_w: Option<CellRef> = None;
    let mut min_n: Option<CellRef> = None;
    for (flat, cell) in grid.cells.iter().enumerate() {
        if cell.status != CellStatus::Cooling {
            continue;
        }
        let Some(r) = &cell.rates else { continue };
        let cand = CellRef {
            i: flat / n_cols,
            j: flat % n_cols,
            delta: cell.delta,
            delta_c: cell.delta_c,
            w: r.w,
            n_st: r.n_st,
        };
        let better_tie = |c: &CellRef, b: &CellRef| -> bool {
            let (ca, ba) = (c.delta_c.abs(), b.delta_c.abs());
            if ca != ba {
                return ca < ba;
            }
            let (cd, bd) = ((c.delta + 1.0).abs(), (b.delta + 1.0).abs());
            cd < bd
        };
        max_w = Some(match max_w {
            None => cand,
            Some(best) => {
                if cand.w > best.w || (cand.w == best.w && better_tie(&cand, &best)) {
                    cand
                } else {
                    best
                }
            }
        });
        if cand.n_st.is_finite() {
            min_n = Some(match min_n {
                None => cand,
                Some(best) => {
                    if cand.n_st < best.n_st
                        || (cand.n_st == best.n_st && better_tie(&cand, &best))
                    {
                        cand
                    } else {
                        best
                    }
                }
            });
        }
    }
    match (max_w, min_n) {
        (Some(max_w), Some(min_n)) => Ok(Extrema { max_w, min_n_st: min_n }),
        _ => Err(Error::NoCoolingCell),
    }
}

/// How [`run_omega_scan`] forms the per-drive detuning grid.
#[derive(Debug, Clone)]
pub enum OmegaAxes {
    /// The same axes for every drive strength.
    Fixed {
        delta_axis: Vec<f64>,
        delta_c_axis: Vec<f64>,
    },
    /// A laser-detuning axis that tracks the drive-induced light shift.
    ///
    /// The driven carrier dresses the internal transition, and the cooling
    /// resonance follows the generalized-Rabi condition
    /// `sqrt(Delta^2 + stark_coeff * Omega^2) = 1` (trap units), so the axis
    /// is `n_delta` uniform points centred on
    /// `Delta = -sqrt(max(0, 1 - stark_coeff * Omega^2))` with half-width
    /// `max(min_half_width, width_scale * Omega^2)`. For weak drive this
    /// reduces to the familiar quadratic light shift
    /// `-1 + (stark_coeff / 2) * Omega^2`; `stark_coeff` close to 4 matches
    /// the numeric optima of the bundled parameter sets, and once
    /// `stark_coeff * Omega^2 >= 1` the dressed sideband reaches the carrier
    /// and the centre saturates at `Delta = 0`.
    StarkTracked {
        n_delta: usize,
        stark_coeff: f64,
        width_scale: f64,
        min_half_width: f64,
        delta_c_axis: Vec<f64>,
    },
}

impl OmegaAxes {
    fn axes_for(&self, omega: f64) -> (Vec<f64>, Vec<f64>) {
        match self {
            OmegaAxes::Fixed {
                delta_axis,
                delta_c_axis,
            } => (delta_axis.clone(), delta_c_axis.clone()),
            OmegaAxes::StarkTracked {
                n_delta,
                stark_coeff,
                width_scale,
                min_half_width,
                delta_c_axis,
            } => {
                let n = (*n_delta).max(1);
                let center = -(1.0 - stark_coeff * omega * omega).max(0.0).sqrt();
                let half = (width_scale * omega * omega).max(*min_half_width);
                let axis = if n == 1 {
                    vec![center]
                } else {
                    (0..n)
                        .map(|k| center - half + 2.0 * half * k as f64 / (n - 1) as f64)
                        .collect()
                };
                (axis, delta_c_axis.clone())
            }
        }
    }
}

/// Options for [`run_omega_scan`].
#[derive(Debug, Clone)]
pub struct OmegaScanOptions {
    pub axes: OmegaAxes,
    pub sweep: SweepOptions,
}

/// Extremal rates at one drive strength.
#[derive(Debug, Clone, Copy)]
pub struct OmegaEntry {
    pub omega: f64,
    pub max_w: CellRef,
    pub min_n_st: CellRef,
    pub failure_fraction: f64,
}

/// Result of a drive-strength scan: per-`Omega` extrema over the detuning
/// plane.
#[derive(Debug, Clone)]
pub struct OmegaScan {
    pub omega_axis: Vec<f64>,
    pub entries: Vec<OmegaEntry>,
    /// Trap frequency [rad/s] of the base parameters, for SI conversion in
    /// the CSV.
    pub nu_si_hint: f64,
}

impl OmegaScan {
    /// CSV export: one row per drive strength.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "omega_nu,max_w_nu,max_w_si_per_s,max_w_delta_nu,max_w_delta_c_nu,\
             min_n_st,min_n_st_delta_nu,min_n_st_delta_c_nu\n",
        );
        for e in &self.entries {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                fmt_csv(e.omega),
                fmt_csv(e.max_w.w),
                fmt_csv(e.max_w.w * self.nu_si_hint),
                fmt_csv(e.max_w.delta),
                fmt_csv(e.max_w.delta_c),
                fmt_csv(e.min_n_st.n_st),
                fmt_csv(e.min_n_st.delta),
                fmt_csv(e.min_n_st.delta_c),
            ));
        }
        out
    }
}

/// Scan the drive strength: for each `Omega` in `omega_axis`, sweep the
/// detuning plane and record the extremal cooling rate and occupation.
///
/// `omega_axis` must be positive and strictly increasing.
pub fn run_omega_scan(
    base: &ModelParams,
    omega_axis: &[f64],
    options: &OmegaScanOptions,
) -> Result<OmegaScan> {
    if omega_axis.is_empty() {
        return Err(Error::InvalidParams("omega_axis must be non-empty".into()));
    }
    if omega_axis.windows(2).any(|w| w[1] <= w[0]) || omega_axis[0] <= 0.0 {
        return Err(Error::InvalidParams(
            "omega_axis must be positive and strictly increasing".into(),
        ));
    }
    let mut entries = Vec::with_capacity(omega_axis.len());
    for &omega in omega_axis {
        let mut params = base.clone();
        params.omega = omega;
        let (delta_axis, delta_c_axis) = options.axes.axes_for(omega);
        let grid = run_sweep(&params, &delta_axis, &delta_c_axis, &options.sweep)?;
        let extrema = find_extrema(&grid)?;
        entries.push(OmegaEntry {
            omega,
            max_w: extrema.max_w,
            min_n_st: extrema.min_n_st,
            failure_fraction: grid.failure_fraction(),
        });
    }
    Ok(OmegaScan {
        omega_axis: omega_axis.to_vec(),
        entries,
        nu_si_hint: base.nu_si,
    })
}

/// Quantity rendered by [`write_svg_heatmap`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SvgQuantity {
    /// Net cooling rate `W` [1/nu]; non-cooling cells are hatched grey.
    CoolingRate,
    /// Steady-state occupation `n_st`; cells without a value are grey.
    SteadyOccupation,
}

impl SvgQuantity {
    fn label(&self) -> &'static str {
        match self {
            SvgQuantity::CoolingRate => "cooling rate W [nu]",
            SvgQuantity::SteadyOccupation => "steady-state occupation n_st",
        }
    }
    fn of(&self, cell: &Cell) -> f64 {
        match self {
            SvgQuantity::CoolingRate => match (&cell.status, &cell.rates) {
                (CellStatus::Cooling, Some(r)) => r.w,
                _ => f64::NAN,
            },
            SvgQuantity::SteadyOccupation => cell.n_st,
        }
    }
}

/// Cell boundaries for one axis: midpoints between consecutive values, with
/// the end cells extended by half the adjacent gap.
fn axis_bounds(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    if n == 1 {
        return vec![values[0] - 0.5, values[0] + 0.5];
    }
    let mut b = Vec::with_capacity(n + 1);
    b.push(values[0] - 0.5 * (values[1] - values[0]));
    for k in 1..n {
        b.push(0.5 * (values[k - 1] + values[k]));
    }
    b.push(values[n - 1] + 0.5 * (values[n - 1] - values[n - 2]));
    b
}

/// Render a sweep as a minimal SVG heatmap with a linear colour scale and
/// axis annotations in trap units.
pub fn write_svg_heatmap<W: Write>(
    grid: &SweepGrid,
    quantity: SvgQuantity,
    out: &mut W,
) -> std::io::Result<()> {
    const PLOT_W: f64 = 640.0;
    const PLOT_H: f64 = 480.0;
    const ML: f64 = 70.0;
    const MB: f64 = 50.0;
    const MT: f64 = 40.0;
    const MR: f64 = 20.0;

    let xb = axis_bounds(&grid.delta_axis);
    let yb = axis_bounds(&grid.delta_c_axis);
    let (x0, x1) = (xb[0], *xb.last().unwrap());
    let (y0, y1) = (yb[0], *yb.last().unwrap());
    let sx = |v: f64| ML + (v - x0) / (x1 - x0) * PLOT_W;
    // SVG y grows downward; put small delta_c at the bottom.
    let sy = |v: f64| MT + (y1 - v) / (y1 - y0) * PLOT_H;

    let values: Vec<f64> = grid.cells.iter().map(|c| quantity.of(c)).collect();
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    let vmin = finite.iter().copied().fold(f64::INFINITY, f64::min);
    let vmax = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let color = |v: f64| -> String {
        if !v.is_finite() {
            return "#b0b0b0".to_string();
        }
        let t = if vmax > vmin {
            ((v - vmin) / (vmax - vmin)).clamp(0.0, 1.0)
        } else {
            0.5
        };
        // Linear two-colour ramp: deep blue to warm yellow.
        let lerp = |a: f64, b: f64| (a + t * (b - a)).round() as u8;
        format!("#{:02x}{:02x}{:02x}", lerp(26.0, 252.0), lerp(42.0, 210.0), lerp(120.0, 60.0))
    };

    let width = ML + PLOT_W + MR;
    let height = MT + PLOT_H + MB;
    writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\">"
    )?;
    writeln!(
        out,
        "  <title>{} ({} method)</title>",
        quantity.label(),
        grid.method
    )?;
    writeln!(
        out,
        "  <rect x=\"0\" y=\"0\" width=\"{width}\" height=\"{height}\" fill=\"white\"/>"
    )?;
    let n_cols = grid.delta_c_axis.len();
    for (flat, v) in values.iter().enumerate() {
        let (i, j) = (flat / n_cols, flat % n_cols);
        let (rx0, rx1) = (sx(xb[i]), sx(xb[i + 1]));
        let (ry0, ry1) = (sy(yb[j + 1]), sy(yb[j]));
        writeln!(
            out,
            "  <rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{}\"/>",
            rx0,
            ry0,
            rx1 - rx0,
            ry1 - ry0,
            color(*v)
        )?;
    }
    // Frame and annotations.
    writeln!(
        out,
        "  <rect x=\"{ML}\" y=\"{MT}\" width=\"{PLOT_W}\" height=\"{PLOT_H}\" fill=\"none\" \
         stroke=\"black\"/>"
    )?;
    writeln!(
        out,
        "  <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"15\">{} \
         &#8212; range [{:.3e}, {:.3e}]</text>",
        ML + PLOT_W / 2.0,
        MT - 14.0,
        quantity.label(),
        vmin,
        vmax
    )?;
    writeln!(
        out,
        "  <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"13\">laser detuning \
         Delta [nu]</text>",
        ML + PLOT_W / 2.0,
        MT + PLOT_H + 36.0
    )?;
    writeln!(
        out,
        "  <text x=\"16\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"13\" \
         transform=\"rotate(-90 16 {:.1})\">cavity detuning delta_c [nu]</text>",
        MT + PLOT_H / 2.0,
        MT + PLOT_H / 2.0
    )?;
    for (v, anchor) in [(grid.delta_axis[0], "start"), (*grid.delta_axis.last().unwrap(), "end")] {
        writeln!(
            out,
            "  <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"{anchor}\" font-size=\"12\">{v}</text>",
            sx(v),
            MT + PLOT_H + 16.0
        )?;
    }
    for v in [grid.delta_c_axis[0], *grid.delta_c_axis.last().unwrap()] {
        writeln!(
            out,
            "  <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\" font-size=\"12\">{v}</text>",
            ML - 6.0,
            sy(v) + 4.0
        )?;
    }
    writeln!(out, "</svg>")
}
