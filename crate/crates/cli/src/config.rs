//! Run configuration: a line-oriented `key = value` format with `[section]`
//! headers, plus resolution into model parameters and a re-runnable manifest.
//!
//! Top-level keys (before any section) select the mode and method and,
//! optionally, give the model parameters directly in trap units. The
//! `[physical]` section is the alternative laboratory-unit route (molecule
//! table row + trap + cavity + drive); exactly one of the two parameter
//! routes may be used. `[numerics]` controls propagation and fitting,
//! `[sweep]` the detuning axes, and `[omega-scan]` the drive-strength scan.
//! Unknown sections or keys are hard errors, as are duplicate keys.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use cavity_sideband::hilbert::HilbertLayout;
use cavity_sideband::model::ModelParams;
use cavity_sideband::molecules::{
    builtin_molecules, find_molecule, load_molecule_table, to_model_params, CavitySpec, DriveSpec,
    GeometrySpec, MoleculeSpec, TrapSpec,
};
use cavity_sideband::sweep::{OmegaAxes, SweepMethod};

/// Configuration / usage error (exit code 2).
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

type Result<T> = std::result::Result<T, ConfigError>;

fn err<T>(msg: impl Into<String>) -> Result<T> {
    Err(ConfigError(msg.into()))
}

/// Workflow selected by the config (and optionally the subcommand).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Simulate,
    Rates,
    Sweep,
    OmegaScan,
    Molecule,
    Convergence,
}

impl Mode {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "simulate" => Mode::Simulate,
            "rates" => Mode::Rates,
            "sweep" => Mode::Sweep,
            "omega-scan" => Mode::OmegaScan,
            "molecule" => Mode::Molecule,
            "convergence" => Mode::Convergence,
            _ => return None,
        })
    }
    pub fn name(&self) -> &'static str {
        match self {
            Mode::Simulate => "simulate",
            Mode::Rates => "rates",
            Mode::Sweep => "sweep",
            Mode::OmegaScan => "omega-scan",
            Mode::Molecule => "molecule",
            Mode::Convergence => "convergence",
        }
    }
}

/// Rate-extraction method selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodSel {
    Perturbative,
    Numeric,
    Both,
}

impl MethodSel {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "perturbative" => MethodSel::Perturbative,
            "numeric" => MethodSel::Numeric,
            "both" => MethodSel::Both,
            _ => return None,
        })
    }
    pub fn name(&self) -> &'static str {
        match self {
            MethodSel::Perturbative => "perturbative",
            MethodSel::Numeric => "numeric",
            MethodSel::Both => "both",
        }
    }
    /// The sweep methods this selector expands to.
    pub fn sweep_methods(&self) -> Vec<SweepMethod> {
        match self {
            MethodSel::Perturbative => vec![SweepMethod::Perturbative],
            MethodSel::Numeric => vec![SweepMethod::Numeric],
            MethodSel::Both => vec![SweepMethod::Perturbative, SweepMethod::Numeric],
        }
    }
}

/// Propagation / fit settings.
#[derive(Debug, Clone)]
pub struct Numerics {
    pub dt: Option<f64>,
    pub t_end: f64,
    pub n_trap: usize,
    pub record_every: Option<usize>,
    pub mean_n0: f64,
    pub skip_time: f64,
    pub min_decay_fraction: f64,
    pub n_traps: Vec<usize>,
}

impl Default for Numerics {
    fn default() -> Self {
        Self {
            dt: None,
            t_end: 4000.0,
            n_trap: 5,
            record_every: None,
            mean_n0: 1.0,
            skip_time: 1500.0,
            min_decay_fraction: 0.5,
            n_traps: vec![4, 5, 6],
        }
    }
}

/// Resolved sweep axes.
#[derive(Debug, Clone)]
pub struct SweepSection {
    pub delta_axis: Vec<f64>,
    pub delta_c_axis: Vec<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            delta_axis: uniform_axis(-3.0, 1.0, 41),
            delta_c_axis: uniform_axis(-30.0, 30.0, 41),
        }
    }
}

/// Drive-strength scan settings.
#[derive(Debug, Clone)]
pub struct OmegaSection {
    pub omega_values: Vec<f64>,
    pub stark_tracked: bool,
    pub n_delta: usize,
    pub stark_coeff: f64,
    pub width_scale: f64,
    pub min_half_width: f64,
}

impl Default for OmegaSection {
    fn default() -> Self {
        Self {
            omega_values: vec![0.05, 0.1, 0.2, 0.3, 0.5],
            stark_tracked: true,
            n_delta: 11,
            stark_coeff: 4.1,
            width_scale: 0.6,
            min_half_width: 0.015,
        }
    }
}

impl OmegaSection {
    pub fn axes(&self, sweep: &SweepSection) -> OmegaAxes {
        if self.stark_tracked {
            OmegaAxes::StarkTracked {
                n_delta: self.n_delta,
                stark_coeff: self.stark_coeff,
                width_scale: self.width_scale,
                min_half_width: self.min_half_width,
                delta_c_axis: sweep.delta_c_axis.clone(),
            }
        } else {
            OmegaAxes::Fixed {
                delta_axis: sweep.delta_axis.clone(),
                delta_c_axis: sweep.delta_c_axis.clone(),
            }
        }
    }
}

/// Where the model parameters came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParamsSource {
    Direct,
    Physical { molecule: String },
    /// No parameter block; only valid for `molecule` mode.
    None,
}

/// A fully parsed and validated run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub mode: Mode,
    pub method: MethodSel,
    pub params: Option<ModelParams>,
    pub source: ParamsSource,
    pub numerics: Numerics,
    pub sweep: SweepSection,
    pub omega: OmegaSection,
    /// Molecule table path (`[physical] molecule_file`), if given.
    pub molecule_file: Option<PathBuf>,
    /// Molecule row selected in `[physical]`, if any.
    pub molecule_name: Option<String>,
    /// Trap/cavity/geometry resolved for `molecule` mode listings.
    pub trap: TrapSpec,
    pub cavity: CavitySpec,
    pub geometry: GeometrySpec,
}

pub fn uniform_axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
        .collect()
}

/// One parsed `key = value` with its line number.
#[derive(Debug, Clone)]
struct RawValue {
    value: String,
    line: usize,
    used: std::cell::Cell<bool>,
}

/// Sectioned raw key/value store.
#[derive(Debug, Default)]
struct RawConfig {
    /// `(section, key) -> value`; the top level is section `""`.
    entries: BTreeMap<(String, String), RawValue>,
    sections: Vec<(String, usize)>,
}

const KNOWN_SECTIONS: [&str; 4] = ["physical", "numerics", "sweep", "omega-scan"];

impl RawConfig {
    fn parse(text: &str) -> Result<Self> {
        let mut raw = RawConfig::default();
        let mut section = String::new();
        for (idx, line_raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = strip_comment(line_raw).trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let Some(name) = name.strip_suffix(']') else {
                    return err(format!("line {line_no}: malformed section header '{line}'"));
                };
                let name = name.trim();
                if !KNOWN_SECTIONS.contains(&name) {
                    return err(format!("line {line_no}: unknown section [{name}]"));
                }
                section = name.to_string();
                raw.sections.push((section.clone(), line_no));
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return err(format!("line {line_no}: expected 'key = value', got '{line}'"));
            };
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key.is_empty() {
                return err(format!("line {line_no}: empty key"));
            }
            let id = (section.clone(), key);
            if let Some(prev) = raw.entries.get(&id) {
                return err(format!(
                    "line {line_no}: duplicate key '{}' (first set on line {})",
                    id.1, prev.line
                ));
            }
            raw.entries.insert(
                id,
                RawValue {
                    value,
                    line: line_no,
                    used: std::cell::Cell::new(false),
                },
            );
        }
        Ok(raw)
    }

    fn get(&self, section: &str, key: &str) -> Option<&RawValue> {
        let v = self.entries.get(&(section.to_string(), key.to_string()));
        if let Some(v) = v {
            v.used.set(true);
        }
        v
    }

    fn has_section(&self, section: &str) -> bool {
        self.sections.iter().any(|(s, _)| s == section)
    }

    fn f64(&self, section: &str, key: &str) -> Result<Option<f64>> {
        match self.get(section, key) {
            None => Ok(None),
            Some(v) => match v.value.parse::<f64>() {
                Ok(x) if x.is_finite() => Ok(Some(x)),
                _ => err(format!(
                    "line {}: key '{key}': cannot parse '{}' as a finite number",
                    v.line, v.value
                )),
            },
        }
    }

    fn usize(&self, section: &str, key: &str) -> Result<Option<usize>> {
        match self.get(section, key) {
            None => Ok(None),
            Some(v) => v.value.parse::<usize>().map(Some).map_err(|_| {
                ConfigError(format!(
                    "line {}: key '{key}': cannot parse '{}' as a non-negative integer",
                    v.line, v.value
                ))
            }),
        }
    }

    fn bool(&self, section: &str, key: &str) -> Result<Option<bool>> {
        match self.get(section, key) {
            None => Ok(None),
            Some(v) => match v.value.as_str() {
                "true" | "yes" | "1" => Ok(Some(true)),
                "false" | "no" | "0" => Ok(Some(false)),
                other => err(format!(
                    "line {}: key '{key}': expected true/false, got '{other}'",
                    v.line
                )),
            },
        }
    }

    fn list_f64(&self, section: &str, key: &str) -> Result<Option<Vec<f64>>> {
        match self.get(section, key) {
            None => Ok(None),
            Some(v) => {
                let mut out = Vec::new();
                for tok in v.value.split_whitespace() {
                    match tok.parse::<f64>() {
                        Ok(x) if x.is_finite() => out.push(x),
                        _ => {
                            return err(format!(
                                "line {}: key '{key}': cannot parse '{tok}' as a number",
                                v.line
                            ))
                        }
                    }
                }
                if out.is_empty() {
                    return err(format!("line {}: key '{key}': empty list", v.line));
                }
                Ok(Some(out))
            }
        }
    }

    fn list_usize(&self, section: &str, key: &str) -> Result<Option<Vec<usize>>> {
        match self.get(section, key) {
            None => Ok(None),
            Some(v) => {
                let mut out = Vec::new();
                for tok in v.value.split_whitespace() {
                    out.push(tok.parse::<usize>().map_err(|_| {
                        ConfigError(format!(
                            "line {}: key '{key}': cannot parse '{tok}' as an integer",
                            v.line
                        ))
                    })?);
                }
                Ok(Some(out))
            }
        }
    }

    fn string(&self, section: &str, key: &str) -> Option<String> {
        self.get(section, key).map(|v| v.value.clone())
    }

    /// Error on the first key that was never consumed by the schema.
    fn check_unused(&self) -> Result<()> {
        let mut unused: Vec<(&(String, String), &RawValue)> = self
            .entries
            .iter()
            .filter(|(_, v)| !v.used.get())
            .collect();
        unused.sort_by_key(|(_, v)| v.line);
        if let Some(((section, key), v)) = unused.first() {
            let loc = if section.is_empty() {
                "top level".to_string()
            } else {
                format!("section [{section}]")
            };
            return err(format!("line {}: unknown key '{key}' at {loc}", v.line));
        }
        Ok(())
    }
}

fn strip_comment(line: &str) -> &str {
    match line.find(['#', ';']) {
        Some(pos) => &line[..pos],
        None => line,
    }
}

const DIRECT_KEYS: [&str; 11] = [
    "delta", "delta_c", "omega", "g", "kappa", "gamma", "eta", "phi", "theta_l", "theta_c",
    "nu_si",
];

/// Parse and validate a configuration.
///
/// `config_dir` anchors relative paths (e.g. `molecule_file`).
pub fn parse_config(text: &str, config_dir: &Path) -> Result<RunConfig> {
    let raw = RawConfig::parse(text)?;

    let mode = match raw.string("", "mode") {
        None => return err("mode required (simulate|rates|sweep|omega-scan|molecule|convergence)"),
        Some(s) => match Mode::parse(&s) {
            Some(m) => m,
            None => return err(format!("unknown mode '{s}'")),
        },
    };
    let method = match raw.string("", "method") {
        None => MethodSel::Perturbative,
        Some(s) => match MethodSel::parse(&s) {
            Some(m) => m,
            None => return err(format!("unknown method '{s}' (perturbative|numeric|both)")),
        },
    };

    // --- numerics ---------------------------------------------------------
    let mut numerics = Numerics::default();
    if let Some(v) = raw.f64("numerics", "dt")? {
        numerics.dt = Some(v);
    }
    if let Some(v) = raw.f64("numerics", "t_end")? {
        numerics.t_end = v;
    }
    if let Some(v) = raw.usize("numerics", "n_trap")? {
        numerics.n_trap = v;
    }
    if let Some(v) = raw.usize("numerics", "record_every")? {
        numerics.record_every = Some(v);
    }
    if let Some(v) = raw.f64("numerics", "mean_n0")? {
        numerics.mean_n0 = v;
    }
    if let Some(v) = raw.f64("numerics", "skip_time")? {
        numerics.skip_time = v;
    }
    if let Some(v) = raw.f64("numerics", "min_decay_fraction")? {
        numerics.min_decay_fraction = v;
    }
    if let Some(v) = raw.list_usize("numerics", "n_traps")? {
        numerics.n_traps = v;
    }

    // --- parameter route --------------------------------------------------
    let direct_present = DIRECT_KEYS
        .iter()
        .any(|k| raw.entries.contains_key(&(String::new(), k.to_string())));
    let physical_present = raw.has_section("physical");
    if direct_present && physical_present {
        return err(
            "both the direct trap-unit parameter block and the [physical] block are present; \
             use exactly one",
        );
    }

    let mut molecule_file = None;
    let mut molecule_name = None;
    let mut trap = TrapSpec::standing_wave_default();
    let mut cavity = CavitySpec::science_cavity_default();
    let mut geometry = GeometrySpec::diagonal_default();

    let (params, source) = if direct_present {
        let delta = require(raw.f64("", "delta")?, "delta")?;
        let delta_c = require(raw.f64("", "delta_c")?, "delta_c")?;
        let omega = require(raw.f64("", "omega")?, "omega")?;
        let mut p = ModelParams::cos_reference(omega, delta, delta_c);
        if let Some(v) = raw.f64("", "nu_si")? {
            p.nu_si = v;
            p.gamma = 424.0 / v;
        }
        if let Some(v) = raw.f64("", "g")? {
            p.g = v;
        }
        if let Some(v) = raw.f64("", "kappa")? {
            p.kappa = v;
        }
        if let Some(v) = raw.f64("", "gamma")? {
            p.gamma = v;
        }
        if let Some(v) = raw.f64("", "eta")? {
            p.eta = v;
        }
        if let Some(v) = raw.f64("", "phi")? {
            p.phi = v;
        }
        if let Some(v) = raw.f64("", "theta_l")? {
            p.theta_l = v;
        }
        if let Some(v) = raw.f64("", "theta_c")? {
            p.theta_c = v;
        }
        (Some(p), ParamsSource::Direct)
    } else if physical_present {
        if let Some(v) = raw.f64("physical", "nu_si")? {
            trap.nu_si = v;
        }
        if let Some(v) = raw.f64("physical", "trap_depth")? {
            trap.depth = v;
        }
        if let Some(v) = raw.f64("physical", "trap_wavelength")? {
            trap.trap_wavelength = v;
        }
        if let Some(v) = raw.f64("physical", "field_amplitude")? {
            cavity.field_amplitude = v;
        }
        if let Some(v) = raw.f64("physical", "kappa_si")? {
            cavity.kappa_si = v;
        }
        if let Some(v) = raw.f64("physical", "phi")? {
            geometry.phi = v;
        }
        if let Some(v) = raw.f64("physical", "theta_l")? {
            geometry.theta_l = v;
        }
        if let Some(v) = raw.f64("physical", "theta_c")? {
            geometry.theta_c = v;
        }
        if let Some(f) = raw.string("physical", "molecule_file") {
            // Canonicalize so manifests stay valid from any directory; this
            // also enforces that the file exists at parse time.
            let path = config_dir.join(&f).canonicalize().map_err(|e| {
                ConfigError(format!("molecule_file '{f}' is not readable: {e}"))
            })?;
            if !path.is_file() {
                return err(format!("molecule_file '{}' is not a file", path.display()));
            }
            molecule_file = Some(path);
        }
        molecule_name = raw.string("physical", "molecule");

        if mode == Mode::Molecule {
            // Listing mode: drive values are not needed.
            raw.f64("physical", "omega")?;
            raw.f64("physical", "delta")?;
            raw.f64("physical", "delta_c")?;
            (None, ParamsSource::None)
        } else {
            let name = match &molecule_name {
                Some(n) => n.clone(),
                None => return err("[physical] block needs 'molecule = <name>'"),
            };
            let table = load_table(&molecule_file)?;
            let Some(m) = find_molecule(&table, &name) else {
                return err(format!("molecule '{name}' not found in the table"));
            };
            let drive = DriveSpec {
                omega: require(raw.f64("physical", "omega")?, "[physical] omega")?,
                delta: require(raw.f64("physical", "delta")?, "[physical] delta")?,
                delta_c: require(raw.f64("physical", "delta_c")?, "[physical] delta_c")?,
            };
            let p = to_model_params(m, &trap, &cavity, &drive, &geometry)
                .map_err(|e| ConfigError(format!("physical block: {e}")))?;
            (Some(p), ParamsSource::Physical { molecule: name })
        }
    } else if mode == Mode::Molecule {
        (None, ParamsSource::None)
    } else {
        return err(format!(
            "mode {} needs model parameters: give the trap-unit keys (delta, delta_c, omega, \
             ...) or a [physical] block",
            mode.name()
        ));
    };

    // Apply the trap-level override and validate.
    let params = match params {
        Some(mut p) => {
            p.layout = HilbertLayout::new(numerics.n_trap)
                .map_err(|e| ConfigError(format!("numerics: {e}")))?;
            p.validate().map_err(|e| ConfigError(e.to_string()))?;
            Some(p)
        }
        None => None,
    };

    // --- sweep axes ---------------------------------------------------------
    let mut sweep = SweepSection::default();
    if let Some(axis) = resolve_axis(&raw, "delta")? {
        sweep.delta_axis = axis;
    }
    if let Some(axis) = resolve_axis(&raw, "delta_c")? {
        sweep.delta_c_axis = axis;
    }

    // --- omega scan -------------------------------------------------------
    let mut omega = OmegaSection::default();
    if let Some(v) = raw.list_f64("omega-scan", "omega_values")? {
        omega.omega_values = v;
    }
    if let Some(v) = raw.bool("omega-scan", "stark_tracked")? {
        omega.stark_tracked = v;
    }
    if let Some(v) = raw.usize("omega-scan", "n_delta")? {
        omega.n_delta = v;
    }
    if let Some(v) = raw.f64("omega-scan", "stark_coeff")? {
        omega.stark_coeff = v;
    }
    if let Some(v) = raw.f64("omega-scan", "width_scale")? {
        omega.width_scale = v;
    }
    if let Some(v) = raw.f64("omega-scan", "min_half_width")? {
        omega.min_half_width = v;
    }

    raw.check_unused()?;

    Ok(RunConfig {
        mode,
        method,
        params,
        source,
        numerics,
        sweep,
        omega,
        molecule_file,
        molecule_name,
        trap,
        cavity,
        geometry,
    })
}

fn require(v: Option<f64>, key: &str) -> Result<f64> {
    v.ok_or_else(|| ConfigError(format!("missing required key '{key}'")))
}

/// Resolve one `[sweep]` axis from either `<name>_values` or the full
/// `<name>_min` / `<name>_max` / `<name>_count` triple.
fn resolve_axis(raw: &RawConfig, name: &str) -> Result<Option<Vec<f64>>> {
    let values = raw.list_f64("sweep", &format!("{name}_values"))?;
    let lo = raw.f64("sweep", &format!("{name}_min"))?;
    let hi = raw.f64("sweep", &format!("{name}_max"))?;
    let n = raw.usize("sweep", &format!("{name}_count"))?;
    let any_range = lo.is_some() || hi.is_some() || n.is_some();
    if values.is_some() && any_range {
        return err(format!(
            "[sweep]: give either {name}_values or {name}_min/max/count, not both"
        ));
    }
    if let Some(values) = values {
        return Ok(Some(values));
    }
    if !any_range {
        return Ok(None);
    }
    let (Some(lo), Some(hi), Some(n)) = (lo, hi, n) else {
        return err(format!(
            "[sweep]: {name} axis needs all of {name}_min, {name}_max, {name}_count"
        ));
    };
    if n == 0 || hi < lo {
        return err(format!(
            "[sweep]: {name} axis needs {name}_min <= {name}_max and {name}_count >= 1"
        ));
    }
    Ok(Some(uniform_axis(lo, hi, n)))
}

/// Load the user table or fall back to the bundled one.
pub fn load_table(path: &Option<PathBuf>) -> Result<Vec<MoleculeSpec>> {
    match path {
        Some(p) => load_molecule_table(p).map_err(|e| ConfigError(e.to_string())),
        None => Ok(builtin_molecules().to_vec()),
    }
}

/// Serialize the fully resolved configuration as a config file that re-runs
/// identically. Floats are written in shortest round-trip form, so re-parsing
/// reproduces the exact same binary values.
pub fn manifest(config: &RunConfig, version: &str, workers: Option<usize>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# cavity-sideband {version} run manifest");
    let _ = writeln!(out, "# re-run with: cavity-sideband --config <this file>");
    if let Some(w) = workers {
        let _ = writeln!(out, "# workers: {w} (pass --workers {w} to reproduce)");
    }
    let _ = writeln!(out, "mode = {}", config.mode.name());
    let _ = writeln!(out, "method = {}", config.method.name());
    if config.params.is_none() {
        // Listing modes resolve no trap-unit parameters; preserve the
        // laboratory-unit inputs instead so the run reproduces exactly.
        let _ = writeln!(out, "\n[physical]");
        if let Some(m) = &config.molecule_name {
            let _ = writeln!(out, "molecule = {m}");
        }
        if let Some(f) = &config.molecule_file {
            let _ = writeln!(out, "molecule_file = {}", f.display());
        }
        let _ = writeln!(out, "nu_si = {:?}", config.trap.nu_si);
        let _ = writeln!(out, "trap_depth = {:?}", config.trap.depth);
        let _ = writeln!(out, "trap_wavelength = {:?}", config.trap.trap_wavelength);
        let _ = writeln!(out, "field_amplitude = {:?}", config.cavity.field_amplitude);
        let _ = writeln!(out, "kappa_si = {:?}", config.cavity.kappa_si);
        let _ = writeln!(out, "phi = {:?}", config.geometry.phi);
        let _ = writeln!(out, "theta_l = {:?}", config.geometry.theta_l);
        let _ = writeln!(out, "theta_c = {:?}", config.geometry.theta_c);
    }
    if let Some(p) = &config.params {
        if let ParamsSource::Physical { molecule } = &config.source {
            let _ = writeln!(out, "# resolved from [physical] molecule = {molecule}");
        }
        let _ = writeln!(out, "delta = {:?}", p.delta);
        let _ = writeln!(out, "delta_c = {:?}", p.delta_c);
        let _ = writeln!(out, "omega = {:?}", p.omega);
        let _ = writeln!(out, "g = {:?}", p.g);
        let _ = writeln!(out, "kappa = {:?}", p.kappa);
        let _ = writeln!(out, "gamma = {:?}", p.gamma);
        let _ = writeln!(out, "eta = {:?}", p.eta);
        let _ = writeln!(out, "phi = {:?}", p.phi);
        let _ = writeln!(out, "theta_l = {:?}", p.theta_l);
        let _ = writeln!(out, "theta_c = {:?}", p.theta_c);
        let _ = writeln!(out, "nu_si = {:?}", p.nu_si);
    }
    let n = &config.numerics;
    let _ = writeln!(out, "\n[numerics]");
    if let Some(dt) = n.dt {
        let _ = writeln!(out, "dt = {dt:?}");
    }
    let _ = writeln!(out, "t_end = {:?}", n.t_end);
    let _ = writeln!(out, "n_trap = {}", n.n_trap);
    if let Some(r) = n.record_every {
        let _ = writeln!(out, "record_every = {r}");
    }
    let _ = writeln!(out, "mean_n0 = {:?}", n.mean_n0);
    let _ = writeln!(out, "skip_time = {:?}", n.skip_time);
    let _ = writeln!(out, "min_decay_fraction = {:?}", n.min_decay_fraction);
    let _ = writeln!(
        out,
        "n_traps = {}",
        n.n_traps
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    );
    let _ = writeln!(out, "\n[sweep]");
    let _ = writeln!(out, "delta_values = {}", join_floats(&config.sweep.delta_axis));
    let _ = writeln!(
        out,
        "delta_c_values = {}",
        join_floats(&config.sweep.delta_c_axis)
    );
    let o = &config.omega;
    let _ = writeln!(out, "\n[omega-scan]");
    let _ = writeln!(out, "omega_values = {}", join_floats(&o.omega_values));
    let _ = writeln!(out, "stark_tracked = {}", o.stark_tracked);
    let _ = writeln!(out, "n_delta = {}", o.n_delta);
    let _ = writeln!(out, "stark_coeff = {:?}", o.stark_coeff);
    let _ = writeln!(out, "width_scale = {:?}", o.width_scale);
    let _ = writeln!(out, "min_half_width = {:?}", o.min_half_width);
    out
}

fn join_floats(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| format!("{v:?}"))
        .collect::<Vec<_>>()
        .join(" ")
}
