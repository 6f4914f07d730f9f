//! Lattice geometry, interaction potentials, Hamiltonians and the
//! block-spin projection/reconstruction pair.
//!
//! Everything here is a pure function over immutable value objects. Sites
//! live on a periodic 1-D torus of `N` sites; coarse cells are the
//! contiguous aligned blocks `C_k = [kq, (k+1)q)`.

use rand::Rng;

use crate::error::ModelError;
use crate::field::ExternalField;

/// Lattice geometry: `N` sites, `M` cells of `q` sites each, interaction
/// half-width `L` (full window `2L+1`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LatticeSpec {
    n_sites: usize,
    coarse_q: usize,
    n_cells: usize,
    interaction_range: usize,
}

impl LatticeSpec {
    pub fn new(n_sites: usize, coarse_q: usize, interaction_range: usize) -> Result<Self, ModelError> {
        if n_sites == 0 {
            return Err(ModelError::EmptyLattice);
        }
        if coarse_q == 0 || coarse_q > n_sites {
            return Err(ModelError::RatioOutOfRange { q: coarse_q, n: n_sites });
        }
        if n_sites % coarse_q != 0 {
            return Err(ModelError::RatioDoesNotDivide { q: coarse_q, n: n_sites });
        }
        if interaction_range == 0 || interaction_range > n_sites / 2 {
            return Err(ModelError::RangeOutOfBounds { l: interaction_range, n: n_sites });
        }
        Ok(Self {
            n_sites,
            coarse_q,
            n_cells: n_sites / coarse_q,
            interaction_range,
        })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn coarse_q(&self) -> usize {
        self.coarse_q
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn interaction_range(&self) -> usize {
        self.interaction_range
    }

    /// Periodic minimal-image distance between two sites.
    pub fn min_image(&self, a: usize, b: usize) -> usize {
        let d = a.abs_diff(b);
        d.min(self.n_sites - d)
    }

    /// Minimal-image distance between two cells on the coarse torus.
    pub fn cell_min_image(&self, k: usize, l: usize) -> usize {
        let d = k.abs_diff(l);
        d.min(self.n_cells - d)
    }

    pub fn cell_of(&self, x: usize) -> usize {
        x / self.coarse_q
    }

    pub fn cell_sites(&self, k: usize) -> std::ops::Range<usize> {
        k * self.coarse_q..(k + 1) * self.coarse_q
    }
}

/// Shape of the compactly supported pair potential `V`.
///
/// `Uniform` is `V(r) = J0/2` on `|r| <= 1`, which makes `Σ_{y≠x} J(x-y)`
/// equal `J0` exactly whenever the full `2L` window exists.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Uniform,
}

/// Interaction strength and rate constants: total coupling `J0`, inverse
/// temperature `β`, attempt frequency `d0` and the grouped desorption
/// constant `c0` (equal to `d0` when no constant field is applied).
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialModel {
    pub j0: f64,
    pub shape: Shape,
    pub beta: f64,
    pub d0: f64,
    pub c0: f64,
}

impl PotentialModel {
    pub fn new(j0: f64, beta: f64, d0: f64, c0: f64) -> Result<Self, ModelError> {
        for (name, value) in [("j0", j0), ("beta", beta), ("d0", d0), ("c0", c0)] {
            if !value.is_finite() {
                return Err(ModelError::NotFinite { name, value });
            }
        }
        if beta < 0.0 {
            return Err(ModelError::NegativeBeta(beta));
        }
        if d0 <= 0.0 {
            return Err(ModelError::NonPositive { name: "d0", value: d0 });
        }
        if c0 <= 0.0 {
            return Err(ModelError::NonPositive { name: "c0", value: c0 });
        }
        Ok(Self {
            j0,
            shape: Shape::Uniform,
            beta,
            d0,
            c0,
        })
    }

    /// `J` evaluated on the support interior: `j0 / 2L` for the uniform shape.
    pub fn j_unit(&self, spec: &LatticeSpec) -> f64 {
        match self.shape {
            Shape::Uniform => self.j0 / (2.0 * spec.interaction_range() as f64),
        }
    }
}

/// Relative deviation of `Σ_{y≠x} J(x-y)` from `j0`.
///
/// Returns `None` when the lattice is too small to hold the full `2L`
/// window (then fewer than `2L` neighbours exist and the sum cannot
/// reach `j0` by construction).
pub fn potential_normalization_deviation(spec: &LatticeSpec, model: &PotentialModel) -> Option<f64> {
    if 2 * spec.interaction_range() + 1 > spec.n_sites() {
        return None;
    }
    let mut sum = 0.0;
    for y in 1..spec.n_sites() {
        sum += j_value(spec, model, spec.min_image(0, y));
    }
    let scale = model.j0.abs().max(f64::MIN_POSITIVE);
    Some((sum - model.j0).abs() / scale)
}

/// Microscopic configuration σ ∈ {0,1}^N.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MicroConfig {
    spins: Vec<u8>,
}

impl MicroConfig {
    pub fn new(spins: Vec<u8>, spec: &LatticeSpec) -> Result<Self, ModelError> {
        if spins.len() != spec.n_sites() {
            return Err(ModelError::ConfigLength {
                got: spins.len(),
                expected: spec.n_sites(),
            });
        }
        Ok(Self {
            spins: spins.into_iter().map(|s| (s != 0) as u8).collect(),
        })
    }

    pub(crate) fn from_spins_unchecked(spins: Vec<u8>) -> Self {
        Self { spins }
    }

    pub fn empty(spec: &LatticeSpec) -> Self {
        Self {
            spins: vec![0; spec.n_sites()],
        }
    }

    pub fn full(spec: &LatticeSpec) -> Self {
        Self {
            spins: vec![1; spec.n_sites()],
        }
    }

    pub fn spins(&self) -> &[u8] {
        &self.spins
    }

    pub fn occupied(&self, x: usize) -> bool {
        self.spins[x] != 0
    }

    pub fn flip(&mut self, x: usize) {
        self.spins[x] ^= 1;
    }

    pub fn n_particles(&self) -> usize {
        self.spins.iter().map(|&s| s as usize).sum()
    }

    pub fn len(&self) -> usize {
        self.spins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spins.is_empty()
    }
}

/// Coarse configuration η ∈ {0,…,q}^M of block occupancies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoarseConfig {
    blocks: Vec<u32>,
}

impl CoarseConfig {
    pub fn new(blocks: Vec<u32>, spec: &LatticeSpec) -> Result<Self, ModelError> {
        if blocks.len() != spec.n_cells() {
            return Err(ModelError::ConfigLength {
                got: blocks.len(),
                expected: spec.n_cells(),
            });
        }
        for (cell, &value) in blocks.iter().enumerate() {
            if value as usize > spec.coarse_q() {
                return Err(ModelError::BlockOverflow {
                    cell,
                    value,
                    q: spec.coarse_q(),
                });
            }
        }
        Ok(Self { blocks })
    }

    pub(crate) fn from_blocks_unchecked(blocks: Vec<u32>) -> Self {
        Self { blocks }
    }

    pub fn empty(spec: &LatticeSpec) -> Self {
        Self {
            blocks: vec![0; spec.n_cells()],
        }
    }

    pub fn full(spec: &LatticeSpec) -> Self {
        Self {
            blocks: vec![spec.coarse_q() as u32; spec.n_cells()],
        }
    }

    pub fn blocks(&self) -> &[u32] {
        &self.blocks
    }

    pub fn block(&self, k: usize) -> u32 {
        self.blocks[k]
    }

    pub fn add(&mut self, k: usize, delta: i32) {
        self.blocks[k] = self.blocks[k].checked_add_signed(delta).expect("block underflow");
    }

    pub fn n_particles(&self) -> usize {
        self.blocks.iter().map(|&b| b as usize).sum()
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }
}

/// Pair interaction `J` at a given periodic site separation.
///
/// `(1/L) V(dist/L)`; zero beyond the support and zero at `dist = 0`
/// (no self pair).
pub fn j_value(spec: &LatticeSpec, model: &PotentialModel, dist: usize) -> f64 {
    debug_assert!(dist <= spec.n_sites() / 2, "callers pass minimal distances");
    if dist == 0 || dist > spec.interaction_range() {
        0.0
    } else {
        model.j_unit(spec)
    }
}

/// Microscopic Hamiltonian `H(σ) = -1/2 ΣΣ J(x-y)σ(x)σ(y) + Σ h(x)σ(x)`.
pub fn hamiltonian(
    spec: &LatticeSpec,
    model: &PotentialModel,
    sigma: &MicroConfig,
    h_field: &ExternalField,
) -> f64 {
    let n = spec.n_sites();
    let mut energy = 0.0;
    for x in 0..n {
        if !sigma.occupied(x) {
            continue;
        }
        for y in (x + 1)..n {
            if sigma.occupied(y) {
                energy -= j_value(spec, model, spec.min_image(x, y));
            }
        }
    }
    for x in 0..n {
        energy += h_field.at(x) * (sigma.spins()[x] as f64);
    }
    energy
}

/// Interaction part of the local field: `W(x,σ) = Σ_{y≠x} J(x-y)σ(y)`.
pub fn micro_interaction_field(
    spec: &LatticeSpec,
    model: &PotentialModel,
    sigma: &MicroConfig,
    x: usize,
) -> f64 {
    let mut w = 0.0;
    for y in 0..spec.n_sites() {
        if y != x {
            w += j_value(spec, model, spec.min_image(x, y)) * (sigma.spins()[y] as f64);
        }
    }
    w
}

/// Local energy field `U(x,σ) = Σ_{y≠x} J(x-y)σ(y) - h(x)`.
///
/// Satisfies `H(σ^x) - H(σ) = U(x,σ)` when `σ(x) = 1` flips to `0`; the
/// sign convention is pinned by the energy–field identity test below.
pub fn micro_field_u(
    spec: &LatticeSpec,
    model: &PotentialModel,
    sigma: &MicroConfig,
    x: usize,
    h_field: &ExternalField,
) -> f64 {
    micro_interaction_field(spec, model, sigma, x) - h_field.at(x)
}

/// Coarse coupling `J̄(k,l)`: the average pair interaction between cells.
///
/// Off-diagonal: `(1/q²) Σ_{x∈C_k} Σ_{y∈C_l} J(x-y)`. Diagonal:
/// `(1/(q(q-1))) Σ_{x∈C_k} Σ_{y∈C_k, y≠x} J(x-y)`, defined as 0 at `q = 1`
/// where no within-cell pair exists.
pub fn coarse_j(spec: &LatticeSpec, model: &PotentialModel, k: usize, l: usize) -> f64 {
    let q = spec.coarse_q();
    if k == l {
        if q == 1 {
            return 0.0;
        }
        let mut sum = 0.0;
        for x in spec.cell_sites(k) {
            for y in spec.cell_sites(k) {
                if y != x {
                    sum += j_value(spec, model, spec.min_image(x, y));
                }
            }
        }
        sum / (q * (q - 1)) as f64
    } else {
        let mut sum = 0.0;
        for x in spec.cell_sites(k) {
            for y in spec.cell_sites(l) {
                sum += j_value(spec, model, spec.min_image(x, y));
            }
        }
        sum / (q * q) as f64
    }
}

/// Interaction part of the coarse field:
/// `W̄(k,η) = Σ_{l≠k} J̄(k,l)η(l) + J̄(k,k)(η(k)-1)`.
///
/// The self-pair term counts the `η(k)-1` companions of a desorbing
/// particle; it is clamped at zero for empty cells, where no desorption
/// exists to consume the value.
pub fn coarse_interaction_field(
    spec: &LatticeSpec,
    model: &PotentialModel,
    eta: &CoarseConfig,
    k: usize,
) -> f64 {
    let mut w = 0.0;
    for l in 0..spec.n_cells() {
        if l != k {
            w += coarse_j(spec, model, k, l) * (eta.block(l) as f64);
        }
    }
    w += coarse_j(spec, model, k, k) * (eta.block(k).saturating_sub(1) as f64);
    w
}

/// Coarse local field `Ū(k,η) = W̄(k,η) - h̄(k)` with `h̄` the cell average.
pub fn coarse_field_u(
    spec: &LatticeSpec,
    model: &PotentialModel,
    eta: &CoarseConfig,
    k: usize,
    h_field: &ExternalField,
) -> f64 {
    coarse_interaction_field(spec, model, eta, k) - h_field.cell_average(spec, k)
}

/// Coarse Hamiltonian
/// `H̄(η) = -1/2 ΣΣ_{k≠l} J̄(k,l)η(k)η(l) - 1/2 J̄(0,0) Σ η(l)(η(l)-1) + Σ h̄(l)η(l)`.
///
/// Satisfies `H̄(η+δ_k) - H̄(η) = -Ū(k, η+δ_k)`, the identity behind the
/// coarse detailed-balance relation.
pub fn coarse_hamiltonian(
    spec: &LatticeSpec,
    model: &PotentialModel,
    eta: &CoarseConfig,
    h_field: &ExternalField,
) -> f64 {
    let m = spec.n_cells();
    let mut energy = 0.0;
    for k in 0..m {
        if eta.block(k) == 0 {
            continue;
        }
        for l in (k + 1)..m {
            if eta.block(l) != 0 {
                energy -= coarse_j(spec, model, k, l) * (eta.block(k) as f64) * (eta.block(l) as f64);
            }
        }
    }
    let j_diag = if spec.coarse_q() == 1 {
        0.0
    } else {
        coarse_j(spec, model, 0, 0)
    };
    for l in 0..m {
        let b = eta.block(l) as f64;
        energy -= 0.5 * j_diag * b * (b - 1.0);
    }
    for l in 0..m {
        energy += h_field.cell_average(spec, l) * (eta.block(l) as f64);
    }
    energy
}

/// Block-spin projection `(Tσ)(k) = Σ_{x∈C_k} σ(x)`.
pub fn project(spec: &LatticeSpec, sigma: &MicroConfig) -> CoarseConfig {
    let blocks = (0..spec.n_cells())
        .map(|k| spec.cell_sites(k).map(|x| sigma.spins()[x] as u32).sum())
        .collect();
    CoarseConfig { blocks }
}

/// Uniform reconstruction: place `η(k)` particles in each cell, positions
/// chosen uniformly at random without replacement. `project ∘ reconstruct`
/// is the identity on coarse configurations.
///
/// Cells with `η(k) ∈ {0, q}` consume no randomness; any other cell
/// consumes exactly `η(k)` draws (a partial Fisher–Yates shuffle).
pub fn reconstruct<R: Rng + ?Sized>(
    spec: &LatticeSpec,
    eta: &CoarseConfig,
    rng: &mut R,
) -> MicroConfig {
    let q = spec.coarse_q();
    let mut spins = vec![0u8; spec.n_sites()];
    let mut slots: Vec<usize> = (0..q).collect();
    for k in 0..spec.n_cells() {
        let occ = eta.block(k) as usize;
        let base = k * q;
        if occ == q {
            spins[base..base + q].fill(1);
            continue;
        }
        if occ == 0 {
            continue;
        }
        for (i, slot) in slots.iter_mut().enumerate() {
            *slot = i;
        }
        for i in 0..occ {
            let j = rng.random_range(i..q);
            slots.swap(i, j);
            spins[base + slots[i]] = 1;
        }
    }
    MicroConfig { spins }
}
