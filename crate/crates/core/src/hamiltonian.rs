//! Energies and single-flip energy deltas for all four model kinds.
//!
//! Every term is anchored at a lattice site. With σ_d(i,j,k) the link of
//! sublattice σ leaving site (i,j,k) in direction d, the σ-sector terms are
//!
//!   XH: σ_y(i,j,k) σ_t(i,j+1,k) σ_y(i,j,k+1) σ_t(i,j,k)
//!   XV: σ_t(i,j,k) σ_x(i,j,k+1) σ_t(i+1,j,k) σ_x(i,j,k)
//!   QΣ: σ_x(i,j,k) σ_y(i+1,j,k) σ_x(i,j+1,k) σ_y(i,j,k)
//!
//! the τ-sector mirrors are ZH (a (t,x) plaquette at (i+o,j,k)), ZV (a (y,t)
//! plaquette at (i,j+o,k)) and QT, and the couplers are YH = XH·ZH and
//! YV = XV·ZV. The offset `o` is 1 for [`Geometry::Shifted`] and 0 for
//! [`Geometry::Unshifted`]. The planar models use spins on sites (the x-slot
//! of the lattice) with XH = σ(i,j)σ(i+1,j), XV = σ(i,j)σ(i,j+1),
//! ZH = τ(i+o,j)τ(i+o,j+1), ZV = τ(i,j+o)τ(i+1,j+o).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Direction, LatticeState, SpinId, Sublattice};
use crate::model::{ModelKind, TermKind};
use crate::noise::DisorderConfig;
use crate::numeric::pairwise_sum;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Geometry {
    #[default]
    Shifted,
    Unshifted,
}

impl Geometry {
    fn offset(self) -> isize {
        match self {
            Geometry::Shifted => 1,
            Geometry::Unshifted => 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Hamiltonian {
    kind: ModelKind,
    size: usize,
    geometry: Geometry,
    n_spins: usize,
    term_kind: Vec<TermKind>,
    coupling: Vec<f64>,
    bias: Vec<f64>,
    has_bias: bool,
    frozen: Vec<bool>,
    has_frozen: bool,
    term_offsets: Vec<u32>,
    term_spins: Vec<u32>,
    spin_offsets: Vec<u32>,
    spin_terms: Vec<u32>,
    active: Vec<u32>,
}

struct Layout {
    size: usize,
    dim: usize,
}

impl Layout {
    fn at(&self, sub: Sublattice, dir: Direction, i: isize, j: isize, k: isize) -> u32 {
        let l = self.size as isize;
        let sites = self.size.pow(self.dim as u32);
        let (i, j) = (i.rem_euclid(l) as usize, j.rem_euclid(l) as usize);
        let k = if self.dim == 3 { k.rem_euclid(l) as usize } else { 0 };
        let site = (k * self.size + j) * self.size + i;
        ((sub.index() * self.dim + dir.index()) * sites + site) as u32
    }

    fn plaq_yt(&self, s: Sublattice, i: isize, j: isize, k: isize) -> [u32; 4] {
        use Direction::*;
        [
            self.at(s, Y, i, j, k),
            self.at(s, T, i, j + 1, k),
            self.at(s, Y, i, j, k + 1),
            self.at(s, T, i, j, k),
        ]
    }

    fn plaq_tx(&self, s: Sublattice, i: isize, j: isize, k: isize) -> [u32; 4] {
        use Direction::*;
        [
            self.at(s, T, i, j, k),
            self.at(s, X, i, j, k + 1),
            self.at(s, T, i + 1, j, k),
            self.at(s, X, i, j, k),
        ]
    }

    fn plaq_xy(&self, s: Sublattice, i: isize, j: isize, k: isize) -> [u32; 4] {
        use Direction::*;
        [
            self.at(s, X, i, j, k),
            self.at(s, Y, i + 1, j, k),
            self.at(s, X, i, j + 1, k),
            self.at(s, Y, i, j, k),
        ]
    }

    fn bond(&self, s: Sublattice, a: (isize, isize), b: (isize, isize)) -> [u32; 2] {
        [
            self.at(s, Direction::X, a.0, a.1, 0),
            self.at(s, Direction::X, b.0, b.1, 0),
        ]
    }
}

/// Spins of one anchored term.
fn term_spins(layout: &Layout, term: TermKind, o: isize, i: isize, j: isize, k: isize) -> Vec<u32> {
    use Sublattice::{Sigma, Tau};
    use TermKind::*;
    if layout.dim == 2 {
        let xh = layout.bond(Sigma, (i, j), (i + 1, j));
        let xv = layout.bond(Sigma, (i, j), (i, j + 1));
        let zh = layout.bond(Tau, (i + o, j), (i + o, j + 1));
        let zv = layout.bond(Tau, (i, j + o), (i + 1, j + o));
        return match term {
            XH => xh.to_vec(),
            XV => xv.to_vec(),
            ZH => zh.to_vec(),
            ZV => zv.to_vec(),
            YH => [xh, zh].concat(),
            YV => [xv, zv].concat(),
            QSigma | QTau => unreachable!("planar models have no syndrome terms"),
        };
    }
    let xh = layout.plaq_yt(Sigma, i, j, k);
    let xv = layout.plaq_tx(Sigma, i, j, k);
    let zh = layout.plaq_tx(Tau, i + o, j, k);
    let zv = layout.plaq_yt(Tau, i, j + o, k);
    match term {
        XH => xh.to_vec(),
        XV => xv.to_vec(),
        ZH => zh.to_vec(),
        ZV => zv.to_vec(),
        YH => [xh, zh].concat(),
        YV => [xv, zv].concat(),
        QSigma => layout.plaq_xy(Sigma, i, j, k).to_vec(),
        QTau => layout.plaq_xy(Tau, i, j, k).to_vec(),
    }
}

impl Hamiltonian {
    pub fn new(disorder: &DisorderConfig, geometry: Geometry) -> Result<Self> {
        let kind = disorder.kind;
        let size = disorder.size;
        let dim = kind.dim();
        let layout = Layout { size, dim };
        let n_spins = kind.sublattices() * dim * size.pow(dim as u32);
        let o = geometry.offset();
        let l = size as isize;
        let kmax = if dim == 3 { l } else { 1 };

        let mut term_kind = Vec::new();
        let mut coupling = Vec::new();
        let mut bias = Vec::new();
        let mut frozen = Vec::new();
        let mut term_offsets = vec![0u32];
        let mut term_spins_flat = Vec::new();
        for &t in kind.terms() {
            let magnitude = disorder.couplings.magnitude(t);
            if magnitude.is_nan() {
                return Err(crate::error::domain(format!("coupling {} is NaN", t.name())));
            }
            let shift = disorder.couplings.bias(t);
            if !shift.is_finite() {
                return Err(crate::error::domain(format!("bias of {} is not finite", t.name())));
            }
            for k in 0..kmax {
                for j in 0..l {
                    for i in 0..l {
                        let site = ((k * l + j) * l + i) as usize;
                        let sign = disorder.sign(t, site);
                        let spins = term_spins(&layout, t, o, i, j, k);
                        term_spins_flat.extend_from_slice(&spins);
                        term_offsets.push(term_spins_flat.len() as u32);
                        term_kind.push(t);
                        if magnitude.is_infinite() {
                            if sign < 0 || magnitude < 0.0 {
                                return Err(crate::error::domain(
                                    "frozen coupling with a flipped sign",
                                ));
                            }
                            frozen.push(true);
                            coupling.push(0.0);
                            bias.push(0.0);
                        } else {
                            frozen.push(false);
                            coupling.push(sign as f64 * magnitude);
                            bias.push(sign as f64 * shift);
                        }
                    }
                }
            }
        }

        let mut counts = vec![0u32; n_spins];
        for &s in &term_spins_flat {
            counts[s as usize] += 1;
        }
        let mut spin_offsets = vec![0u32; n_spins + 1];
        for s in 0..n_spins {
            spin_offsets[s + 1] = spin_offsets[s] + counts[s];
        }
        let mut fill = spin_offsets.clone();
        let mut spin_terms = vec![0u32; term_spins_flat.len()];
        for t in 0..term_kind.len() {
            for &s in &term_spins_flat[term_offsets[t] as usize..term_offsets[t + 1] as usize] {
                spin_terms[fill[s as usize] as usize] = t as u32;
                fill[s as usize] += 1;
            }
        }
        let active = (0..n_spins as u32).filter(|&s| counts[s as usize] > 0).collect();
        let has_frozen = frozen.iter().any(|&f| f);
        let has_bias = bias.iter().any(|&b| b != 0.0);

        Ok(Hamiltonian {
            kind,
            size,
            geometry,
            n_spins,
            term_kind,
            coupling,
            bias,
            has_bias,
            frozen,
            has_frozen,
            term_offsets,
            term_spins: term_spins_flat,
            spin_offsets,
            spin_terms,
            active,
        })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn n_terms(&self) -> usize {
        self.term_kind.len()
    }

    pub fn n_spins(&self) -> usize {
        self.n_spins
    }

    /// Spins that appear in at least one term, in linear index order. These
    /// are the spins a Metropolis sweep visits.
    pub fn active_spins(&self) -> &[u32] {
        &self.active
    }

    pub fn term_kind(&self, term: usize) -> TermKind {
        self.term_kind[term]
    }

    pub fn term(&self, term: usize) -> &[u32] {
        &self.term_spins[self.term_offsets[term] as usize..self.term_offsets[term + 1] as usize]
    }

    pub fn terms_of(&self, spin: usize) -> &[u32] {
        &self.spin_terms[self.spin_offsets[spin] as usize..self.spin_offsets[spin + 1] as usize]
    }

    /// Signed coupling of a term; frozen terms report `+inf`.
    pub fn coupling(&self, term: usize) -> f64 {
        if self.frozen[term] {
            f64::INFINITY
        } else {
            self.coupling[term]
        }
    }

    /// Whether any term has a temperature-independent coupling part.
    pub fn has_bias(&self) -> bool {
        self.has_bias
    }

    /// Signed temperature-independent part of a term's dimensionless coupling.
    pub fn bias(&self, term: usize) -> f64 {
        self.bias[term]
    }

    /// Digest of the model, geometry and every signed coupling.
    pub fn fingerprint(&self) -> [u8; 32] {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        h.update(self.kind.name().as_bytes());
        h.update((self.size as u64).to_le_bytes());
        h.update([self.geometry.offset() as u8]);
        for t in 0..self.n_terms() {
            h.update(self.coupling(t).to_bits().to_le_bytes());
        }
        if self.has_bias {
            for &b in &self.bias {
                h.update(b.to_bits().to_le_bytes());
            }
        }
        h.finalize().into()
    }

    /// A blank all-plus state with the shape this Hamiltonian expects.
    pub fn blank_state(&self) -> LatticeState {
        LatticeState::new(
            self.size,
            self.kind.dim(),
            self.kind.sublattices(),
            crate::lattice::Init::AllPlus,
        )
        .expect("hamiltonian shape is valid")
    }

    pub fn check_shape(&self, state: &LatticeState) -> Result<()> {
        if state.size() != self.size
            || state.dim() != self.kind.dim()
            || state.sublattices() != self.kind.sublattices()
        {
            return Err(Error::Shape(format!(
                "state (L={}, dim={}, sublattices={}) does not fit a {} model of size {}",
                state.size(),
                state.dim(),
                state.sublattices(),
                self.kind,
                self.size
            )));
        }
        Ok(())
    }

    #[inline]
    fn product(&self, spins: &[i8], term: usize) -> i8 {
        let mut p = 1i8;
        for &s in self.term(term) {
            p *= spins[s as usize];
        }
        p
    }

    /// Products of every term, in term order.
    pub fn products(&self, state: &LatticeState) -> Result<Vec<i8>> {
        self.check_shape(state)?;
        let spins = state.spins();
        Ok((0..self.n_terms()).map(|t| self.product(spins, t)).collect())
    }

    fn energy_from_products(&self, products: &[i8], filter: impl Fn(TermKind) -> bool) -> f64 {
        let parts: Vec<f64> = (0..self.n_terms())
            .filter(|&t| filter(self.term_kind[t]))
            .map(|t| -self.coupling[t] * products[t] as f64)
            .collect();
        pairwise_sum(&parts)
    }

    /// H = -Σ J_t Π_{s∈t} s over all finite terms.
    pub fn total_energy(&self, state: &LatticeState) -> Result<f64> {
        let p = self.products(state)?;
        Ok(self.energy_from_products(&p, |_| true))
    }

    /// B = -Σ b_t Π_{s∈t} s, the temperature-independent part of the
    /// Boltzmann exponent: states carry weight exp(-βH - B).
    pub fn bias_energy(&self, state: &LatticeState) -> Result<f64> {
        let p = self.products(state)?;
        Ok(self.bias_from_products(&p))
    }

    fn bias_from_products(&self, products: &[i8]) -> f64 {
        if !self.has_bias {
            return 0.0;
        }
        let parts: Vec<f64> = (0..self.n_terms()).map(|t| -self.bias[t] * products[t] as f64).collect();
        pairwise_sum(&parts)
    }

    /// Energy restricted to the given term kinds.
    pub fn partial_energy(&self, state: &LatticeState, kinds: &[TermKind]) -> Result<f64> {
        let p = self.products(state)?;
        Ok(self.energy_from_products(&p, |k| kinds.contains(&k)))
    }

    /// Number of frozen constraints the state violates.
    pub fn violated_constraints(&self, state: &LatticeState) -> Result<usize> {
        let p = self.products(state)?;
        Ok((0..self.n_terms()).filter(|&t| self.frozen[t] && p[t] < 0).count())
    }

    /// Energy change from negating one spin, visiting only the terms that
    /// contain it. Breaking a satisfied frozen constraint costs `+inf`.
    pub fn local_delta_energy(&self, state: &LatticeState, spin: SpinId) -> Result<f64> {
        self.check_shape(state)?;
        let idx = state.index(spin)?;
        Ok(self.delta_at(state.spins(), idx))
    }

    pub fn delta_at(&self, spins: &[i8], idx: usize) -> f64 {
        let mut sum = 0.0;
        for &t in self.terms_of(idx) {
            let t = t as usize;
            let p = self.product(spins, t);
            if self.has_frozen && self.frozen[t] && p > 0 {
                return f64::INFINITY;
            }
            sum += self.coupling[t] * p as f64;
        }
        2.0 * sum
    }
}

/// Total energy plus a per-term product cache, kept in step with one state.
#[derive(Clone, Debug, PartialEq)]
pub struct EnergyCache {
    energy: f64,
    bias: f64,
    products: Vec<i8>,
}

impl EnergyCache {
    pub fn new(ham: &Hamiltonian, state: &LatticeState) -> Result<Self> {
        let products = ham.products(state)?;
        let energy = ham.energy_from_products(&products, |_| true);
        let bias = ham.bias_from_products(&products);
        Ok(EnergyCache { energy, bias, products })
    }

    pub fn energy(&self) -> f64 {
        self.energy
    }

    /// Cached [`Hamiltonian::bias_energy`].
    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn products(&self) -> &[i8] {
        &self.products
    }

    pub(crate) fn set_energy(&mut self, energy: f64, bias: f64) {
        self.energy = energy;
        self.bias = bias;
    }

    /// Energy change of flipping `idx`, read from the cached products.
    #[inline]
    pub fn delta(&self, ham: &Hamiltonian, idx: usize) -> f64 {
        let mut sum = 0.0;
        if ham.has_frozen {
            for &t in ham.terms_of(idx) {
                let t = t as usize;
                if ham.frozen[t] && self.products[t] > 0 {
                    return f64::INFINITY;
                }
                sum += ham.coupling[t] * self.products[t] as f64;
            }
        } else {
            for &t in ham.terms_of(idx) {
                let t = t as usize;
                sum += ham.coupling[t] * self.products[t] as f64;
            }
        }
        2.0 * sum
    }

    /// Changes of energy and bias from flipping `idx`.
    #[inline]
    pub fn delta_with_bias(&self, ham: &Hamiltonian, idx: usize) -> (f64, f64) {
        let mut sum = 0.0;
        let mut shift = 0.0;
        for &t in ham.terms_of(idx) {
            let t = t as usize;
            if ham.has_frozen && ham.frozen[t] && self.products[t] > 0 {
                return (f64::INFINITY, 0.0);
            }
            let p = self.products[t] as f64;
            sum += ham.coupling[t] * p;
            shift += ham.bias[t] * p;
        }
        (2.0 * sum, 2.0 * shift)
    }

    /// Flip `idx` in `state` and update the cache by the known delta.
    #[inline]
    pub fn apply_flip(&mut self, ham: &Hamiltonian, state: &mut LatticeState, idx: usize, delta: f64) {
        state.flip(idx);
        for &t in ham.terms_of(idx) {
            let t = t as usize;
            self.products[t] = -self.products[t];
        }
        self.energy += delta;
    }

    /// [`EnergyCache::apply_flip`] that also moves the bias.
    #[inline]
    pub fn apply_flip_with_bias(
        &mut self,
        ham: &Hamiltonian,
        state: &mut LatticeState,
        idx: usize,
        delta: f64,
        shift: f64,
    ) {
        self.apply_flip(ham, state, idx, delta);
        self.bias += shift;
    }

    /// Recompute the energy from the cached products, dropping accumulated
    /// rounding drift.
    pub fn refresh(&mut self, ham: &Hamiltonian) {
        self.energy = ham.energy_from_products(&self.products, |_| true);
        self.bias = ham.bias_from_products(&self.products);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Init;
    use crate::noise::{sample_disorder, CouplingSet, NoiseRates};
    use approx::assert_abs_diff_eq;

    fn uniform(kind: ModelKind, l: usize, c: CouplingSet) -> Hamiltonian {
        let d = DisorderConfig::uniform(kind, l, c).unwrap();
        Hamiltonian::new(&d, Geometry::Shifted).unwrap()
    }

    #[test]
    fn all_plus_energies() {
        let h = uniform(ModelKind::Rpgm, 3, CouplingSet::uniform(0.7, 0.7));
        let s = h.blank_state();
        assert_abs_diff_eq!(h.total_energy(&s).unwrap(), -3.0 * 27.0 * 0.7, epsilon = 1e-12);

        let c = CouplingSet {
            jx_x: 0.3,
            jy_x: 0.5,
            jx_y: 0.7,
            jy_y: 1.1,
            jx_z: 1.3,
            jy_z: 1.7,
            jq_sigma: 1.9,
            jq_tau: 2.3,
            jq_bias: 0.0,
        };
        let h = uniform(ModelKind::Rcpgm, 4, c);
        let sum: f64 = TermKind::ALL.iter().map(|&t| c.magnitude(t)).sum();
        assert_abs_diff_eq!(h.total_energy(&h.blank_state()).unwrap(), -64.0 * sum, epsilon = 1e-10);

        let h = uniform(ModelKind::Rbim, 5, CouplingSet::uniform(1.0, 0.0));
        assert_abs_diff_eq!(h.total_energy(&h.blank_state()).unwrap(), -50.0, epsilon = 1e-12);
        let h = uniform(ModelKind::R8vm, 5, CouplingSet::uniform(1.0, 0.0));
        assert_abs_diff_eq!(h.total_energy(&h.blank_state()).unwrap(), -150.0, epsilon = 1e-12);
    }

    #[test]
    fn link_neighbourhoods() {
        let h = uniform(ModelKind::Rpgm, 4, CouplingSet::uniform(1.0, 1.0));
        let s = h.blank_state();
        for dir in Direction::ALL {
            let id = SpinId::new([1, 2, 3], dir, Sublattice::Sigma);
            assert_eq!(h.terms_of(s.index(id).unwrap()).len(), 4);
            assert_abs_diff_eq!(h.local_delta_energy(&s, id).unwrap(), 8.0, epsilon = 1e-12);
        }
        let h = uniform(ModelKind::Rcpgm, 4, CouplingSet::uniform(1.0, 1.0));
        let t_link = s.index(SpinId::new([0, 0, 0], Direction::T, Sublattice::Sigma)).unwrap();
        assert_eq!(h.terms_of(t_link).len(), 8);
        let x_link = s.index(SpinId::new([0, 0, 0], Direction::X, Sublattice::Sigma)).unwrap();
        assert_eq!(h.terms_of(x_link).len(), 6);
    }

    #[test]
    fn small_lattice_terms_repeat_spins() {
        let rates = NoiseRates::symmetric(0.3);
        let d = sample_disorder(ModelKind::Rcpgm, &rates, &CouplingSet::uniform(0.9, 1.3), 2, 4).unwrap();
        let h = Hamiltonian::new(&d, Geometry::Shifted).unwrap();
        let mut s = LatticeState::new(2, 3, 2, Init::Random(2)).unwrap();
        let mut cache = EnergyCache::new(&h, &s).unwrap();
        for n in 0..s.len() {
            let direct = h.delta_at(s.spins(), n);
            let cached = cache.delta(&h, n);
            assert_abs_diff_eq!(direct, cached, epsilon = 1e-12);
            let before = h.total_energy(&s).unwrap();
            cache.apply_flip(&h, &mut s, n, cached);
            assert_abs_diff_eq!(h.total_energy(&s).unwrap() - before, direct, epsilon = 1e-9);
        }
        assert_abs_diff_eq!(cache.energy(), h.total_energy(&s).unwrap(), epsilon = 1e-9);
    }

    #[test]
    fn frozen_terms_block_breaking_moves() {
        let c = CouplingSet::from_rates(ModelKind::Rpgm, &NoiseRates::zero()).unwrap();
        let h = uniform(ModelKind::Rpgm, 3, c);
        let s = h.blank_state();
        assert_eq!(h.total_energy(&s).unwrap(), 0.0);
        assert!(h.delta_at(s.spins(), 0).is_infinite());
        let g = s.gauge_transform([1, 1, 1], Sublattice::Sigma).unwrap();
        assert_eq!(h.violated_constraints(&g).unwrap(), 0);
    }

    #[test]
    fn shape_mismatch() {
        let h = uniform(ModelKind::Rpgm, 3, CouplingSet::uniform(1.0, 1.0));
        let s = LatticeState::new(4, 3, 1, Init::AllPlus).unwrap();
        assert!(matches!(h.total_energy(&s), Err(Error::Shape(_))));
    }

    #[test]
    fn planar_active_spins() {
        let h = uniform(ModelKind::Rbim, 4, CouplingSet::uniform(1.0, 0.0));
        assert_eq!(h.active_spins().len(), 16);
        let h = uniform(ModelKind::R8vm, 4, CouplingSet::uniform(1.0, 0.0));
        assert_eq!(h.active_spins().len(), 32);
        let h = uniform(ModelKind::Rcpgm, 4, CouplingSet::uniform(1.0, 1.0));
        assert_eq!(h.active_spins().len(), 384);
    }

    #[test]
    fn cached_bias_tracks_recompute() {
        let rates = NoiseRates::symmetric(0.1);
        let c = crate::noise::symmetric_depolarizing_family();
        let d = sample_disorder(ModelKind::Rcpgm, &rates, &c, 3, 9).unwrap();
        let h = Hamiltonian::new(&d, Geometry::Shifted).unwrap();
        assert!(h.has_bias());
        let mut s = LatticeState::new(3, 3, 2, Init::Random(4)).unwrap();
        let mut cache = EnergyCache::new(&h, &s).unwrap();
        for n in (0..s.len()).step_by(7).chain(0..40) {
            let (de, db) = cache.delta_with_bias(&h, n);
            assert_eq!(de, cache.delta(&h, n));
            let before = h.bias_energy(&s).unwrap();
            cache.apply_flip_with_bias(&h, &mut s, n, de, db);
            assert_abs_diff_eq!(h.bias_energy(&s).unwrap() - before, db, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(cache.bias(), h.bias_energy(&s).unwrap(), epsilon = 1e-9);
        assert_abs_diff_eq!(cache.energy(), h.total_energy(&s).unwrap(), epsilon = 1e-9);
        assert!(!uniform(ModelKind::Rcpgm, 3, CouplingSet::uniform(1.0, 1.0)).has_bias());
    }
}
