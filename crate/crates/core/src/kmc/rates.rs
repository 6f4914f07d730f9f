//! Transition rates for the three processes and the elementary KMC steps:
//! rate-table construction, event selection, event application and the
//! local (incremental) table update.
//!
//! Arrhenius adsorption/desorption: an empty unit adsorbs at the attempt
//! frequency `d0`; an occupied unit desorbs at `d0·exp(βh - βW)` with `W`
//! the interaction part of its local field. In grouped mode the constant
//! field moves into the adsorption constant `c0`: empty units adsorb at
//! `c0` and occupied ones desorb at the bare Arrhenius rate
//! `d0·exp(-βW)`. Both conventions satisfy detailed balance against the
//! Gibbs measure with effective field `βh̄ = ln(d0/c0)`; the grouped form
//! additionally fixes the time unit by bare desorption attempts, which is
//! the clock the reference exit-time and hysteresis results are quoted in.

use crate::error::KmcError;
use crate::field::FieldMode;
use crate::lattice::{
    coarse_interaction_field, micro_interaction_field, project, CoarseConfig, LatticeSpec,
    MicroConfig, PotentialModel,
};

/// Adsorption rate of one empty site.
pub(crate) fn adsorption_unit(model: &PotentialModel, field: &FieldMode) -> f64 {
    match field {
        FieldMode::External(_) => model.d0,
        FieldMode::Grouped => model.c0,
    }
}

/// Field contribution `βh` to the desorption exponent at a single site.
pub(crate) fn beta_h_site(model: &PotentialModel, field: &FieldMode, x: usize) -> f64 {
    match field {
        FieldMode::External(h) => model.beta * h.at(x),
        FieldMode::Grouped => 0.0,
    }
}

/// Field contribution `βh̄(k)` at a coarse cell (cell average of `h`).
pub(crate) fn beta_h_cell(
    model: &PotentialModel,
    field: &FieldMode,
    spec: &LatticeSpec,
    k: usize,
) -> f64 {
    match field {
        FieldMode::External(h) => model.beta * h.cell_average(spec, k),
        FieldMode::Grouped => 0.0,
    }
}

/// Per-unit adsorption/desorption rates with their running totals.
///
/// Units are sites for the microscopic and synthetic processes, cells for
/// the coarse process.
#[derive(Debug, Clone, PartialEq)]
pub struct RateTable {
    pub adsorption: Vec<f64>,
    pub desorption: Vec<f64>,
    pub total_a: f64,
    pub total_d: f64,
}

impl RateTable {
    pub fn from_rates(adsorption: Vec<f64>, desorption: Vec<f64>) -> Self {
        let total_a = adsorption.iter().sum();
        let total_d = desorption.iter().sum();
        Self {
            adsorption,
            desorption,
            total_a,
            total_d,
        }
    }

    pub fn len(&self) -> usize {
        self.adsorption.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adsorption.is_empty()
    }

    /// Total rate `R_T = R_a + R_d`.
    pub fn total(&self) -> f64 {
        self.total_a + self.total_d
    }

    /// Check the stored totals against fresh sums of the entries.
    pub fn verify_totals(&self, rel_tol: f64) -> Result<(), KmcError> {
        let fresh_a: f64 = self.adsorption.iter().sum();
        let fresh_d: f64 = self.desorption.iter().sum();
        let scale = (fresh_a + fresh_d).abs().max(f64::MIN_POSITIVE);
        let drift = ((self.total_a - fresh_a).abs() + (self.total_d - fresh_d).abs()) / scale;
        if drift > rel_tol {
            return Err(KmcError::TotalsDrift(drift));
        }
        Ok(())
    }
}

/// Adsorb or desorb one particle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Adsorb,
    Desorb,
}

/// One accepted KMC event: what happened, where, and the time increment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KmcEvent {
    pub kind: EventKind,
    pub location: usize,
    pub dt: f64,
}

/// Microscopic rates from Arrhenius dynamics: empty sites adsorb at `d0`,
/// occupied sites desorb at `d0·exp(βh(x) - βW(x,σ))`.
pub fn micro_rates(
    spec: &LatticeSpec,
    model: &PotentialModel,
    sigma: &MicroConfig,
    field: &FieldMode,
) -> RateTable {
    let n = spec.n_sites();
    let mut adsorption = vec![0.0; n];
    let mut desorption = vec![0.0; n];
    let ads_unit = adsorption_unit(model, field);
    for x in 0..n {
        if sigma.occupied(x) {
            let w = micro_interaction_field(spec, model, sigma, x);
            desorption[x] = model.d0 * (beta_h_site(model, field, x) - model.beta * w).exp();
        } else {
            adsorption[x] = ads_unit;
        }
    }
    RateTable::from_rates(adsorption, desorption)
}

/// Coarse birth–death rates: `c̄_a(k) = d0(q - η(k))`,
/// `c̄_d(k) = d0·η(k)·exp(βh̄(k) - βW̄(k,η))`.
pub fn coarse_rates(
    spec: &LatticeSpec,
    model: &PotentialModel,
    eta: &CoarseConfig,
    field: &FieldMode,
) -> RateTable {
    let m = spec.n_cells();
    let q = spec.coarse_q() as f64;
    let mut adsorption = vec![0.0; m];
    let mut desorption = vec![0.0; m];
    let ads_unit = adsorption_unit(model, field);
    for k in 0..m {
        let occ = eta.block(k) as f64;
        adsorption[k] = ads_unit * (q - occ);
        if eta.block(k) > 0 {
            let w = coarse_interaction_field(spec, model, eta, k);
            desorption[k] =
                occ * model.d0 * (beta_h_cell(model, field, spec, k) - model.beta * w).exp();
        }
    }
    RateTable::from_rates(adsorption, desorption)
}

/// Synthetic-process rates: site-resolution dynamics driven by the
/// coarse-grained field of the projected configuration, constant within
/// each cell.
pub fn synthetic_rates(
    spec: &LatticeSpec,
    model: &PotentialModel,
    gamma: &MicroConfig,
    field: &FieldMode,
) -> RateTable {
    let n = spec.n_sites();
    let eta = project(spec, gamma);
    let mut cell_rate = vec![0.0; spec.n_cells()];
    for k in 0..spec.n_cells() {
        let w = coarse_interaction_field(spec, model, &eta, k);
        cell_rate[k] = model.d0 * (beta_h_cell(model, field, spec, k) - model.beta * w).exp();
    }
    let mut adsorption = vec![0.0; n];
    let mut desorption = vec![0.0; n];
    let ads_unit = adsorption_unit(model, field);
    for x in 0..n {
        if gamma.occupied(x) {
            desorption[x] = cell_rate[spec.cell_of(x)];
        } else {
            adsorption[x] = ads_unit;
        }
    }
    RateTable::from_rates(adsorption, desorption)
}

/// Paper-mode event selection from two uniforms.
///
/// `rho1` picks the channel (adsorb iff `rho1 < R_a/R_T`), `rho2` picks
/// the unit as the smallest index whose cumulative channel rate reaches
/// `rho2·R`, ties broken towards the smallest index. The time increment
/// is the paper rule `Δt = 1/R_T`; exponential waiting times are handled
/// by the engine with a third uniform.
pub fn select_event(table: &RateTable, rho1: f64, rho2: f64) -> Result<KmcEvent, KmcError> {
    let total = table.total();
    if !(total > 0.0) {
        return Err(KmcError::AbsorbingState);
    }
    let (kind, rates, channel_total) = if rho1 < table.total_a / total {
        (EventKind::Adsorb, &table.adsorption, table.total_a)
    } else {
        (EventKind::Desorb, &table.desorption, table.total_d)
    };
    let target = rho2 * channel_total;
    let location = linear_select(rates, target).ok_or(KmcError::AbsorbingState)?;
    Ok(KmcEvent {
        kind,
        location,
        dt: 1.0 / total,
    })
}

/// Linear-scan weighted selection; the reference the sum tree is tested
/// against.
pub(crate) fn linear_select(rates: &[f64], target: f64) -> Option<usize> {
    if target <= 0.0 {
        return rates.iter().position(|&r| r > 0.0);
    }
    let mut cum = 0.0;
    let mut last_positive = None;
    for (i, &r) in rates.iter().enumerate() {
        if r > 0.0 {
            last_positive = Some(i);
            cum += r;
            if cum >= target {
                return Some(i);
            }
        }
    }
    // Rounding pushed the target past the final cumulative sum.
    last_positive
}

/// Apply a spin-flip event to a microscopic configuration.
pub fn apply_micro_event(sigma: &mut MicroConfig, event: &KmcEvent) -> Result<(), KmcError> {
    let x = event.location;
    let legal = match event.kind {
        EventKind::Adsorb => !sigma.occupied(x),
        EventKind::Desorb => sigma.occupied(x),
    };
    if !legal {
        return Err(KmcError::IllegalEvent {
            kind: event.kind,
            location: x,
        });
    }
    sigma.flip(x);
    Ok(())
}

/// Apply a birth/death event to a coarse configuration.
pub fn apply_coarse_event(
    eta: &mut CoarseConfig,
    spec: &LatticeSpec,
    event: &KmcEvent,
) -> Result<(), KmcError> {
    let k = event.location;
    let legal = match event.kind {
        EventKind::Adsorb => (eta.block(k) as usize) < spec.coarse_q(),
        EventKind::Desorb => eta.block(k) > 0,
    };
    if !legal {
        return Err(KmcError::IllegalEvent {
            kind: event.kind,
            location: k,
        });
    }
    eta.add(k, if event.kind == EventKind::Adsorb { 1 } else { -1 });
    Ok(())
}

/// Coarse-cell radius of the interaction: cells farther apart than this
/// hold no site pair within range `L`.
pub(crate) fn coarse_radius(spec: &LatticeSpec) -> usize {
    (spec.interaction_range() - 1) / spec.coarse_q() + 1
}

/// Patch a microscopic rate table after one event, recomputing only the
/// entries within interaction range of the event location.
///
/// `sigma_pre` is the configuration the table was built from; the result
/// matches a fresh [`micro_rates`] call on the post-event configuration.
pub fn micro_local_update(
    spec: &LatticeSpec,
    model: &PotentialModel,
    sigma_pre: &MicroConfig,
    table: &RateTable,
    event: &KmcEvent,
    field: &FieldMode,
) -> Result<RateTable, KmcError> {
    let mut sigma = sigma_pre.clone();
    apply_micro_event(&mut sigma, event)?;
    let mut out = table.clone();
    let n = spec.n_sites();
    let l = spec.interaction_range();
    if 2 * l + 1 >= n {
        // Window covers the whole torus.
        for x in 0..n {
            patch_micro_entry(spec, model, &sigma, field, x, &mut out);
        }
    } else {
        // Walk [loc-L, loc+L] with periodic wrap, each site once.
        let start = (event.location + n - l) % n;
        for offset in 0..=(2 * l) {
            let x = (start + offset) % n;
            patch_micro_entry(spec, model, &sigma, field, x, &mut out);
        }
    }
    Ok(out)
}

fn patch_micro_entry(
    spec: &LatticeSpec,
    model: &PotentialModel,
    sigma: &MicroConfig,
    field: &FieldMode,
    x: usize,
    out: &mut RateTable,
) {
    let (ads, des) = if sigma.occupied(x) {
        let w = micro_interaction_field(spec, model, sigma, x);
        (
            0.0,
            model.d0 * (beta_h_site(model, field, x) - model.beta * w).exp(),
        )
    } else {
        (adsorption_unit(model, field), 0.0)
    };
    out.total_a += ads - out.adsorption[x];
    out.total_d += des - out.desorption[x];
    out.adsorption[x] = ads;
    out.desorption[x] = des;
}

/// Coarse analogue of [`micro_local_update`]: only cells within the
/// coarse interaction radius of the event cell are recomputed.
pub fn coarse_local_update(
    spec: &LatticeSpec,
    model: &PotentialModel,
    eta_pre: &CoarseConfig,
    table: &RateTable,
    event: &KmcEvent,
    field: &FieldMode,
) -> Result<RateTable, KmcError> {
    let mut eta = eta_pre.clone();
    apply_coarse_event(&mut eta, spec, event)?;
    let mut out = table.clone();
    let m = spec.n_cells();
    let radius = coarse_radius(spec);
    let q = spec.coarse_q() as f64;
    for k in 0..m {
        if spec.cell_min_image(k, event.location) > radius {
            continue;
        }
        let occ = eta.block(k) as f64;
        let ads = adsorption_unit(model, field) * (q - occ);
        let des = if eta.block(k) > 0 {
            let w = coarse_interaction_field(spec, model, &eta, k);
            occ * model.d0 * (beta_h_cell(model, field, spec, k) - model.beta * w).exp()
        } else {
            0.0
        };
        out.total_a += ads - out.adsorption[k];
        out.total_d += des - out.desorption[k];
        out.adsorption[k] = ads;
        out.desorption[k] = des;
    }
    Ok(out)
}

/// Synthetic analogue: the event changes one block count, so every site
/// in a cell within the coarse radius must refresh its cell rate.
pub fn synthetic_local_update(
    spec: &LatticeSpec,
    model: &PotentialModel,
    gamma_pre: &MicroConfig,
    table: &RateTable,
    event: &KmcEvent,
    field: &FieldMode,
) -> Result<RateTable, KmcError> {
    let mut gamma = gamma_pre.clone();
    apply_micro_event(&mut gamma, event)?;
    let eta = project(spec, &gamma);
    let mut out = table.clone();
    let radius = coarse_radius(spec);
    let event_cell = spec.cell_of(event.location);
    for k in 0..spec.n_cells() {
        if spec.cell_min_image(k, event_cell) > radius {
            continue;
        }
        let w = coarse_interaction_field(spec, model, &eta, k);
        let rate = model.d0 * (beta_h_cell(model, field, spec, k) - model.beta * w).exp();
        for x in spec.cell_sites(k) {
            let (ads, des) = if gamma.occupied(x) {
                (0.0, rate)
            } else {
                (adsorption_unit(model, field), 0.0)
            };
            out.total_a += ads - out.adsorption[x];
            out.total_d += des - out.desorption[x];
            out.adsorption[x] = ads;
            out.desorption[x] = des;
        }
    }
    Ok(out)
}
