//! External-field handling.
//!
//! The Hamiltonian carries the field as `+ Σ_x h(x) σ(x)`, so a positive
//! field penalises occupation and speeds up desorption. Experiments either
//! supply `h` directly or group it with the attempt frequency into a single
//! desorption constant `c0` (see [`FieldMode::Grouped`]).

use crate::lattice::LatticeSpec;

/// External field `h`, either one value broadcast to every site or per-site.
#[derive(Debug, Clone, PartialEq)]
pub enum ExternalField {
    Constant(f64),
    PerSite(Vec<f64>),
}

impl ExternalField {
    pub const ZERO: ExternalField = ExternalField::Constant(0.0);

    pub fn at(&self, x: usize) -> f64 {
        match self {
            ExternalField::Constant(h) => *h,
            ExternalField::PerSite(hs) => hs[x],
        }
    }

    /// Cell average `h̄(k) = (1/q) Σ_{x∈C_k} h(x)`; exact for constant fields.
    pub fn cell_average(&self, spec: &LatticeSpec, k: usize) -> f64 {
        match self {
            ExternalField::Constant(h) => *h,
            ExternalField::PerSite(hs) => {
                let sites = spec.cell_sites(k);
                let q = sites.len() as f64;
                hs[sites].iter().sum::<f64>() / q
            }
        }
    }

    pub fn len_matches(&self, n: usize) -> bool {
        match self {
            ExternalField::Constant(_) => true,
            ExternalField::PerSite(hs) => hs.len() == n,
        }
    }
}

/// How the field enters the transition rates.
///
/// `External(h)` is the textbook form: desorption `d0·exp(-β(W - h))` with
/// `W` the interaction part of the local field. `Grouped` folds the constant
/// field and the attempt frequency into the single desorption constant
/// `c0`, so the rate exponent carries `ln(d0/c0)` in place of `β h`;
/// `c0 = d0` reproduces the field-free dynamics.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldMode {
    External(ExternalField),
    Grouped,
}

impl FieldMode {
    pub const NONE: FieldMode = FieldMode::External(ExternalField::ZERO);
}
