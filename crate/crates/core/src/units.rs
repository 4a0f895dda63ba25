//! SI <-> internal unit conversion.
//!
//! Internally every length is measured in the gravitational length
//! `l0 = hbar^2 / (G m^3)` and every energy in `G m^2 / l0`, so that the
//! one-body Hamiltonian reads `-(1/2) laplacian + Phi` with unit coupling.
//! The only remaining parameters are the inverse ranges of the kernel
//! measured in `1/l0` (`beta` for the nonlocal kernel, `mu` for Yukawa).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pinned CODATA 2018 constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub hbar_j_s: f64,
    pub g_si: f64,
    pub c_m_s: f64,
    pub ev_j: f64,
    pub hbar_c_ev_m: f64,
    pub source: &'static str,
}

pub const HBAR: f64 = 1.054_571_817e-34;
pub const G_NEWTON: f64 = 6.674_30e-11;
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
pub const ELECTRON_VOLT: f64 = 1.602_176_634e-19;
/// hbar * c in eV m.
pub const HBAR_C_EV_M: f64 = HBAR * SPEED_OF_LIGHT / ELECTRON_VOLT;

pub const CONSTANTS: Constants = Constants {
    hbar_j_s: HBAR,
    g_si: G_NEWTON,
    c_m_s: SPEED_OF_LIGHT,
    ev_j: ELECTRON_VOLT,
    hbar_c_ev_m: HBAR_C_EV_M,
    source: "CODATA 2018",
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Newtonian,
    Idg,
    Yukawa,
}

impl Model {
    pub fn as_str(self) -> &'static str {
        match self {
            Model::Newtonian => "newtonian",
            Model::Idg => "idg",
            Model::Yukawa => "yukawa",
        }
    }
}

impl std::fmt::Display for Model {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "newtonian" | "newton" => Ok(Model::Newtonian),
            "idg" => Ok(Model::Idg),
            "yukawa" => Ok(Model::Yukawa),
            other => Err(Error::Domain(format!("unknown gravity model `{other}`"))),
        }
    }
}

/// Physical inputs in SI-facing units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    pub mass_kg: f64,
    /// Non-locality scale in eV, required for the `idg` model.
    pub ms_ev: Option<f64>,
    pub model: Model,
    /// Yukawa inverse range in 1/m, required for the `yukawa` model.
    pub yukawa_mu_inv_m: Option<f64>,
}

impl PhysicalParams {
    pub fn newtonian(mass_kg: f64) -> Self {
        Self {
            mass_kg,
            ms_ev: None,
            model: Model::Newtonian,
            yukawa_mu_inv_m: None,
        }
    }

    pub fn idg(mass_kg: f64, ms_ev: f64) -> Self {
        Self {
            mass_kg,
            ms_ev: Some(ms_ev),
            model: Model::Idg,
            yukawa_mu_inv_m: None,
        }
    }

    pub fn yukawa(mass_kg: f64, mu_inv_m: f64) -> Self {
        Self {
            mass_kg,
            ms_ev: None,
            model: Model::Yukawa,
            yukawa_mu_inv_m: Some(mu_inv_m),
        }
    }

    /// Same physical setup with a different mass.
    pub fn with_mass(self, mass_kg: f64) -> Self {
        Self { mass_kg, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mass_kg.is_finite() && self.mass_kg > 0.0) {
            return Err(Error::Domain(format!(
                "mass must be positive, got {} kg",
                self.mass_kg
            )));
        }
        match self.model {
            Model::Newtonian => {}
            Model::Idg => match self.ms_ev {
                Some(ms) if ms.is_finite() && ms > 0.0 => {}
                other => {
                    return Err(Error::Domain(format!(
                        "idg model requires a positive M_s, got {other:?}"
                    )))
                }
            },
            Model::Yukawa => match self.yukawa_mu_inv_m {
                Some(mu) if mu.is_finite() && mu > 0.0 => {}
                other => {
                    return Err(Error::Domain(format!(
                        "yukawa model requires a positive mu, got {other:?}"
                    )))
                }
            },
        }
        Ok(())
    }
}

/// Nondimensionalization bundle for one physical instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NaturalScales {
    /// Gravitational length hbar^2/(G m^3) in meters.
    pub l0_m: f64,
    /// M_s * l0 (dimensionless); zero when the model has no M_s.
    pub beta: f64,
    /// Yukawa mu * l0 (dimensionless); zero when unused.
    pub mu: f64,
    /// Energy unit G^2 m^5 / hbar^2 in joules.
    pub e0_j: f64,
    /// Time unit hbar / e0 in seconds.
    pub t0_s: f64,
    pub hbar_c_ev_m: f64,
    pub g_si: f64,
}

pub fn gravitational_length_m(mass_kg: f64) -> f64 {
    HBAR * HBAR / (G_NEWTON * mass_kg.powi(3))
}

/// Length hbar c / M_s (meters) below which the nonlocal kernel flattens.
pub fn nonlocality_length_m(ms_ev: f64) -> f64 {
    HBAR_C_EV_M / ms_ev
}

pub fn natural_scales(p: &PhysicalParams) -> Result<NaturalScales> {
    p.validate()?;
    let l0_m = gravitational_length_m(p.mass_kg);
    let beta = p.ms_ev.map_or(0.0, |ms| l0_m / nonlocality_length_m(ms));
    let mu = p.yukawa_mu_inv_m.map_or(0.0, |mu| mu * l0_m);
    let e0_j = G_NEWTON * p.mass_kg * p.mass_kg / l0_m;
    Ok(NaturalScales {
        l0_m,
        beta,
        mu,
        e0_j,
        t0_s: HBAR / e0_j,
        hbar_c_ev_m: HBAR_C_EV_M,
        g_si: G_NEWTON,
    })
}

pub fn length_to_si(x_natural: f64, s: &NaturalScales) -> f64 {
    x_natural * s.l0_m
}

pub fn length_to_natural(x_m: f64, s: &NaturalScales) -> f64 {
    x_m / s.l0_m
}

pub fn energy_to_si(e_natural: f64, s: &NaturalScales) -> f64 {
    e_natural * s.e0_j
}

pub fn time_to_si(t_natural: f64, s: &NaturalScales) -> f64 {
    t_natural * s.t0_s
}

/// Recover SI-facing parameters from a scales bundle.
pub fn params_from_scales(s: &NaturalScales, model: Model) -> PhysicalParams {
    let mass_kg = (HBAR * HBAR / (G_NEWTON * s.l0_m)).cbrt();
    PhysicalParams {
        mass_kg,
        ms_ev: (model == Model::Idg).then(|| s.beta / s.l0_m * HBAR_C_EV_M),
        model,
        yukawa_mu_inv_m: (model == Model::Yukawa).then(|| s.mu / s.l0_m),
    }
}
