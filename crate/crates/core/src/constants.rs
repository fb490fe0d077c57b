//! Physical constants in cgs units.

/// Boltzmann constant, erg per eV.
pub const KB_ERG_PER_EV: f64 = 1.602e-12;

/// Squared elementary charge, eV·cm.
pub const E2_EV_CM: f64 = 1.44e-7;

/// Squared elementary charge, erg·cm.
pub const E2_ERG_CM: f64 = E2_EV_CM * KB_ERG_PER_EV;

pub fn ev_to_erg(t_ev: f64) -> f64 {
    t_ev * KB_ERG_PER_EV
}

pub fn erg_to_ev(t_erg: f64) -> f64 {
    t_erg / KB_ERG_PER_EV
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlasmaConstants {
    pub e2_ev_cm: f64,
    pub kb_erg_per_ev: f64,
}

impl Default for PlasmaConstants {
    fn default() -> Self {
        PlasmaConstants {
            e2_ev_cm: E2_EV_CM,
            kb_erg_per_ev: KB_ERG_PER_EV,
        }
    }
}
