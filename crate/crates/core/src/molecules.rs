//! Laboratory-unit molecular and cavity properties, and their conversion into
//! the trap-unit parameters of the model.
//!
//! Everything in [`ModelParams`](crate::model::ModelParams) is expressed in
//! units of the trap frequency `nu`. This module holds the SI-side picture: a
//! table of candidate molecules (transition wavenumber, transition dipole,
//! Einstein A coefficient, mass), trap and cavity hardware figures, and the
//! standard formulas that turn them into `(g, kappa, gamma, eta)` in `nu`
//! units:
//!
//! * Einstein A coefficient `gamma = omega^3 mu^2 / (3 pi eps0 hbar c^3)`,
//! * Lamb-Dicke parameter `eta = sqrt(hbar k^2 / (2 M nu))`,
//! * vacuum Rabi coupling `g = mu eps_c / (2 hbar)`,
//! * single-particle cooperativity `C1 = g^2 / (kappa gamma)`.
//!
//! The factor-of-two convention in the vacuum Rabi coupling (dipole energy
//! split between the two rotating-frame components) is deliberate: with the
//! default cavity field of 150 V/m it reproduces the design point
//! `g = 0.41 nu` for the carbonyl sulfide stretch transition, whereas the
//! `mu eps_c / hbar` convention would not.
//!
//! A built-in candidate table ships with the crate
//! ([`builtin_molecules`]); user-supplied tables in the same plain-text
//! format are read with [`load_molecule_table`].

use std::path::Path;
use std::sync::OnceLock;

use crate::hilbert::HilbertLayout;
use crate::model::ModelParams;
use crate::{Error, Result};

/// Physical constants (CODATA 2018) used by the laboratory-unit formulas.
pub mod constants {
    /// Speed of light in vacuum [m/s].
    pub const SPEED_OF_LIGHT: f64 = 2.997_924_58e8;
    /// Vacuum permittivity [F/m].
    pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;
    /// Reduced Planck constant [J s].
    pub const REDUCED_PLANCK: f64 = 1.054_571_817e-34;
    /// Atomic unit of electric dipole moment [C m].
    pub const ATOMIC_DIPOLE: f64 = 8.478_353_625_5e-30;
    /// Atomic mass unit [kg].
    pub const ATOMIC_MASS: f64 = 1.660_539_066_60e-27;
}

/// One row of the molecular candidate table: an infrared-active vibrational
/// transition treated as the two-level cooling transition.
#[derive(Debug, Clone, PartialEq)]
pub struct MoleculeSpec {
    /// Molecule label, e.g. `"COS"`.
    pub name: String,
    /// Point group of the molecule, e.g. `"C3v"`.
    pub point_group: String,
    /// Irreducible representation of the active mode, e.g. `"A1"`.
    pub irrep: String,
    /// Transition wavenumber [cm^-1].
    pub wavenumber: f64,
    /// Transition dipole moment [atomic units, 1 au = 2.54 Debye].
    pub dipole: f64,
    /// Einstein A coefficient of the transition [1/s], as tabulated.
    pub gamma_si: f64,
    /// Molecular mass [amu].
    pub mass: f64,
}

impl MoleculeSpec {
    /// Check the row invariants: positive wavenumber and mass, non-negative
    /// dipole and decay rate, all finite.
    pub fn validate(&self) -> Result<()> {
        let checks = [
            ("wavenumber", self.wavenumber, true),
            ("dipole", self.dipole, false),
            ("gamma_si", self.gamma_si, false),
            ("mass", self.mass, true),
        ];
        for (name, value, strictly_positive) in checks {
            if !value.is_finite() {
                return Err(Error::InvalidParams(format!(
                    "{}: {name} must be finite, got {value}",
                    self.name
                )));
            }
            if value < 0.0 || (strictly_positive && value == 0.0) {
                return Err(Error::InvalidParams(format!(
                    "{}: {name} must be {}, got {value}",
                    self.name,
                    if strictly_positive { "> 0" } else { ">= 0" }
                )));
            }
        }
        Ok(())
    }

    /// Einstein A coefficient recomputed from this row's wavenumber and
    /// dipole, for cross-checking against the tabulated [`gamma_si`].
    ///
    /// [`gamma_si`]: MoleculeSpec::gamma_si
    pub fn einstein_a(&self) -> f64 {
        einstein_a(self.wavenumber, self.dipole)
    }
}

/// Harmonic-trap hardware figures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrapSpec {
    /// Trap angular frequency `nu` [rad/s].
    pub nu_si: f64,
    /// Trap depth [uK]; informational only.
    pub depth: f64,
    /// Trapping-laser wavelength [nm]; informational only.
    pub trap_wavelength: f64,
}

impl TrapSpec {
    /// The default standing-wave optical trap: `nu = 2 pi x 350 kHz`,
    /// depth about 900 uK, formed by a 532 nm build-up cavity.
    pub fn standing_wave_default() -> Self {
        Self {
            nu_si: 2.0 * std::f64::consts::PI * 350.0e3,
            depth: 900.0,
            trap_wavelength: 532.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.nu_si > 0.0) || !self.nu_si.is_finite() {
            return Err(Error::InvalidParams(format!(
                "trap frequency nu_si must be positive and finite, got {}",
                self.nu_si
            )));
        }
        Ok(())
    }
}

/// Optical-cavity hardware figures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CavitySpec {
    /// Vacuum field amplitude of the cavity mode `eps_c` [V/m].
    pub field_amplitude: f64,
    /// Cavity linewidth `kappa` [rad/s].
    pub kappa_si: f64,
}

impl CavitySpec {
    /// The default science cavity: `eps_c = 150 V/m`, `kappa = 2 pi x 5 MHz`.
    pub fn science_cavity_default() -> Self {
        Self {
            field_amplitude: 150.0,
            kappa_si: 2.0 * std::f64::consts::PI * 5.0e6,
        }
    }

    fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("field_amplitude", self.field_amplitude),
            ("kappa_si", self.kappa_si),
        ] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::InvalidParams(format!(
                    "cavity {name} must be positive and finite, got {value}"
                )));
            }
        }
        Ok(())
    }
}

/// Drive working point, in trap units: laser Rabi frequency and the two
/// detunings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveSpec {
    /// Laser Rabi frequency `Omega` [nu].
    pub omega: f64,
    /// Laser detuning `Delta` [nu].
    pub delta: f64,
    /// Cavity detuning `delta_c` [nu].
    pub delta_c: f64,
}

/// Beam/cavity geometry angles [rad].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometrySpec {
    /// Position of the trap centre in the cavity standing wave.
    pub phi: f64,
    /// Angle between the driving laser and the trap axis.
    pub theta_l: f64,
    /// Angle between the cavity axis and the trap axis.
    pub theta_c: f64,
}

impl GeometrySpec {
    /// All three angles at `pi/4`, the reference geometry.
    pub fn diagonal_default() -> Self {
        let q = std::f64::consts::FRAC_PI_4;
        Self {
            phi: q,
            theta_l: q,
            theta_c: q,
        }
    }
}

/// Einstein A coefficient `gamma = omega^3 mu^2 / (3 pi eps0 hbar c^3)` for a
/// transition at `wavenumber` [cm^-1] with dipole moment `dipole` [au], with
/// `omega = 2 pi c nutilde` the SI angular transition frequency.
///
/// Returns the spontaneous decay rate in 1/s.
pub fn einstein_a(wavenumber: f64, dipole: f64) -> f64 {
    use constants::*;
    let omega = 2.0 * std::f64::consts::PI * SPEED_OF_LIGHT * (wavenumber * 100.0);
    let mu = dipole * ATOMIC_DIPOLE;
    omega.powi(3) * mu * mu
        / (3.0 * std::f64::consts::PI * VACUUM_PERMITTIVITY * REDUCED_PLANCK * SPEED_OF_LIGHT.powi(3))
}

/// Lamb-Dicke parameter `eta = sqrt(hbar k^2 / (2 M nu))` for light at
/// `wavenumber` [cm^-1] addressing a molecule of `mass` [amu] in a trap of
/// angular frequency `nu_si` [rad/s], with `k = 2 pi nutilde` the SI angular
/// wavenumber.
pub fn lamb_dicke(wavenumber: f64, mass: f64, nu_si: f64) -> f64 {
    use constants::*;
    let k = 2.0 * std::f64::consts::PI * (wavenumber * 100.0);
    let m = mass * ATOMIC_MASS;
    (REDUCED_PLANCK * k * k / (2.0 * m * nu_si)).sqrt()
}

/// Vacuum Rabi coupling `g = mu eps_c / (2 hbar)` [rad/s] of a transition with
/// dipole moment `dipole` [au] to a cavity mode of vacuum field amplitude
/// `field_amplitude` [V/m].
///
/// See the module docs for the factor-of-two convention.
pub fn vacuum_rabi(dipole: f64, field_amplitude: f64) -> f64 {
    dipole * constants::ATOMIC_DIPOLE * field_amplitude / (2.0 * constants::REDUCED_PLANCK)
}

/// Single-particle cooperativity `C1 = g^2 / (kappa gamma)`.
///
/// Dimensionless as long as all three rates are given in the same unit
/// (rad/s, or trap units, etc.).
pub fn cooperativity(g: f64, kappa: f64, gamma: f64) -> f64 {
    g * g / (kappa * gamma)
}

/// Convert a rate from SI [1/s or rad/s] into trap units given the trap
/// angular frequency `nu_si` [rad/s].
pub fn to_trap_units(rate_si: f64, nu_si: f64) -> f64 {
    rate_si / nu_si
}

/// Convert a rate from trap units back to SI [same unit as `nu_si`].
pub fn to_si_units(rate_nu: f64, nu_si: f64) -> f64 {
    rate_nu * nu_si
}

/// Assemble trap-unit [`ModelParams`] for `molecule` in the given trap and
/// cavity, at drive working point `drive` and geometry `geometry`.
///
/// Derived quantities: `g` from [`vacuum_rabi`], `kappa = kappa_si / nu`,
/// `gamma = gamma_si / nu` (the tabulated Einstein A coefficient, not the
/// recomputed one), and `eta` from [`lamb_dicke`]. The trap frequency is
/// recorded in `nu_si` so rates in trap units can be converted back to 1/s.
pub fn to_model_params(
    molecule: &MoleculeSpec,
    trap: &TrapSpec,
    cavity: &CavitySpec,
    drive: &DriveSpec,
    geometry: &GeometrySpec,
) -> Result<ModelParams> {
    molecule.validate()?;
    trap.validate()?;
    cavity.validate()?;

    let nu = trap.nu_si;
    let params = ModelParams {
        delta: drive.delta,
        delta_c: drive.delta_c,
        omega: drive.omega,
        g: vacuum_rabi(molecule.dipole, cavity.field_amplitude) / nu,
        kappa: cavity.kappa_si / nu,
        gamma: molecule.gamma_si / nu,
        eta: lamb_dicke(molecule.wavenumber, molecule.mass, nu),
        phi: geometry.phi,
        theta_l: geometry.theta_l,
        theta_c: geometry.theta_c,
        nu_si: nu,
        layout: HilbertLayout::default(),
    };
    params.validate()?;
    Ok(params)
}

/// Parse a molecule table from text.
///
/// Format: one record per line with whitespace-separated fields
/// `name point_group irrep wavenumber_cm1 dipole_au gamma_s1 mass_amu`;
/// blank lines and lines starting with `#` are ignored, and `#` starts a
/// trailing comment on a record line.
pub fn parse_molecule_table(text: &str) -> Result<Vec<MoleculeSpec>> {
    let mut rows = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 7 {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected 7 fields, got {}", fields.len()),
            });
        }
        let num = |i: usize, what: &str| -> Result<f64> {
            fields[i].parse::<f64>().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("{what}: cannot parse '{}' as a number", fields[i]),
            })
        };
        let row = MoleculeSpec {
            name: fields[0].to_string(),
            point_group: fields[1].to_string(),
            irrep: fields[2].to_string(),
            wavenumber: num(3, "wavenumber_cm1")?,
            dipole: num(4, "dipole_au")?,
            gamma_si: num(5, "gamma_s1")?,
            mass: num(6, "mass_amu")?,
        };
        row.validate().map_err(|e| Error::Parse {
            line: line_no,
            msg: e.to_string(),
        })?;
        rows.push(row);
    }
    Ok(rows)
}

/// Read a molecule table from a file in the [`parse_molecule_table`] format.
pub fn load_molecule_table(path: &Path) -> Result<Vec<MoleculeSpec>> {
    let text = std::fs::read_to_string(path)?;
    parse_molecule_table(&text)
}

/// The built-in candidate table bundled with the crate.
pub fn builtin_molecules() -> &'static [MoleculeSpec] {
    static TABLE: OnceLock<Vec<MoleculeSpec>> = OnceLock::new();
    TABLE.get_or_init(|| {
        parse_molecule_table(include_str!("../data/molecules.dat"))
            .expect("bundled molecule table is valid")
    })
}

/// Look up a molecule by name (ASCII case-insensitive).
pub fn find_molecule<'a>(table: &'a [MoleculeSpec], name: &str) -> Option<&'a MoleculeSpec> {
    table.iter().find(|m| m.name.eq_ignore_ascii_case(name))
}
