//! Periodic square and cubic lattices of Ising link spins.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::codec::{Reader, Writer};
use crate::error::{domain, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    X,
    Y,
    T,
}

impl Direction {
    pub const ALL: [Direction; 3] = [Direction::X, Direction::Y, Direction::T];

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sublattice {
    Sigma,
    Tau,
}

impl Sublattice {
    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SpinId {
    pub site: [usize; 3],
    pub direction: Direction,
    pub sublattice: Sublattice,
}

impl SpinId {
    pub fn new(site: [usize; 3], direction: Direction, sublattice: Sublattice) -> Self {
        SpinId {
            site,
            direction,
            sublattice,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Init {
    AllPlus,
    Random(u64),
}

/// Ising link spins, one per (sublattice, direction, site), stored in that
/// order with the site index running `k`, `j`, `i` from slowest to fastest.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LatticeState {
    size: usize,
    dim: usize,
    sublattices: usize,
    spins: Vec<i8>,
}

impl LatticeState {
    pub fn new(size: usize, dim: usize, sublattices: usize, init: Init) -> Result<Self> {
        if size < 2 {
            return Err(domain(format!("lattice size must be at least 2, got {size}")));
        }
        if dim != 2 && dim != 3 {
            return Err(domain(format!("dimension must be 2 or 3, got {dim}")));
        }
        if sublattices != 1 && sublattices != 2 {
            return Err(domain(format!("sublattices must be 1 or 2, got {sublattices}")));
        }
        let count = sublattices * dim * size.pow(dim as u32);
        let spins = match init {
            Init::AllPlus => vec![1; count],
            Init::Random(seed) => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (0..count)
                    .map(|_| if rng.random::<bool>() { 1 } else { -1 })
                    .collect()
            }
        };
        Ok(LatticeState {
            size,
            dim,
            sublattices,
            spins,
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sublattices(&self) -> usize {
        self.sublattices
    }

    pub fn sites(&self) -> usize {
        self.size.pow(self.dim as u32)
    }

    pub fn len(&self) -> usize {
        self.spins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spins.is_empty()
    }

    pub fn spins(&self) -> &[i8] {
        &self.spins
    }

    /// Linear index of a spin given signed (wrapped) coordinates.
    #[inline]
    pub fn index_wrapped(&self, sub: Sublattice, dir: Direction, i: isize, j: isize, k: isize) -> usize {
        let l = self.size as isize;
        let i = i.rem_euclid(l) as usize;
        let j = j.rem_euclid(l) as usize;
        let k = if self.dim == 3 { k.rem_euclid(l) as usize } else { 0 };
        let site = (k * self.size + j) * self.size + i;
        (sub.index() * self.dim + dir.index()) * self.sites() + site
    }

    pub fn index(&self, id: SpinId) -> Result<usize> {
        self.check(id)?;
        let [i, j, k] = id.site;
        Ok(self.index_wrapped(id.sublattice, id.direction, i as isize, j as isize, k as isize))
    }

    pub fn spin_id(&self, index: usize) -> SpinId {
        let sites = self.sites();
        let site = index % sites;
        let slot = index / sites;
        let dir = Direction::ALL[slot % self.dim];
        let sub = if slot / self.dim == 0 {
            Sublattice::Sigma
        } else {
            Sublattice::Tau
        };
        let i = site % self.size;
        let j = (site / self.size) % self.size;
        let k = site / (self.size * self.size);
        SpinId::new([i, j, k], dir, sub)
    }

    fn check(&self, id: SpinId) -> Result<()> {
        let [i, j, k] = id.site;
        let l = self.size;
        let k_ok = if self.dim == 3 { k < l } else { k == 0 };
        if i >= l || j >= l || !k_ok {
            return Err(domain(format!("site {:?} outside lattice of size {l}", id.site)));
        }
        if id.direction == Direction::T && self.dim != 3 {
            return Err(domain("t-direction spin on a 2D lattice"));
        }
        if id.sublattice.index() >= self.sublattices {
            return Err(domain("tau spin on a single-sublattice lattice"));
        }
        Ok(())
    }

    pub fn get(&self, id: SpinId) -> Result<i8> {
        Ok(self.spins[self.index(id)?])
    }

    #[inline]
    pub fn spin(&self, index: usize) -> i8 {
        self.spins[index]
    }

    #[inline]
    pub fn flip(&mut self, index: usize) {
        self.spins[index] = -self.spins[index];
    }

    pub fn set(&mut self, index: usize, value: i8) -> Result<()> {
        if value != 1 && value != -1 {
            return Err(domain(format!("spin value must be +1 or -1, got {value}")));
        }
        self.spins[index] = value;
        Ok(())
    }

    /// The six links touching a vertex on one sublattice: three outgoing,
    /// three incoming.
    pub fn incident_links(&self, site: [usize; 3], sub: Sublattice) -> Result<[usize; 6]> {
        if self.dim != 3 {
            return Err(domain("gauge moves are defined for 3D lattices only"));
        }
        self.check(SpinId::new(site, Direction::X, sub))?;
        let [i, j, k] = site.map(|c| c as isize);
        Ok([
            self.index_wrapped(sub, Direction::X, i, j, k),
            self.index_wrapped(sub, Direction::Y, i, j, k),
            self.index_wrapped(sub, Direction::T, i, j, k),
            self.index_wrapped(sub, Direction::X, i - 1, j, k),
            self.index_wrapped(sub, Direction::Y, i, j - 1, k),
            self.index_wrapped(sub, Direction::T, i, j, k - 1),
        ])
    }

    /// Apply a vertex gauge move in place.
    pub fn apply_gauge(&mut self, site: [usize; 3], sub: Sublattice) -> Result<()> {
        for idx in self.incident_links(site, sub)? {
            self.flip(idx);
        }
        Ok(())
    }

    pub fn gauge_transform(&self, site: [usize; 3], sub: Sublattice) -> Result<LatticeState> {
        let mut out = self.clone();
        out.apply_gauge(site, sub)?;
        Ok(out)
    }

    pub(crate) fn encode_spins(&self, w: &mut Writer) {
        w.u32(self.size as u32);
        w.u8(self.dim as u8);
        w.u8(self.sublattices as u8);
        w.u64(self.spins.len() as u64);
        let mut bytes = vec![0u8; self.spins.len().div_ceil(8)];
        for (n, &s) in self.spins.iter().enumerate() {
            if s < 0 {
                bytes[n / 8] |= 1 << (n % 8);
            }
        }
        w.bytes(&bytes);
    }

    pub(crate) fn decode_spins(r: &mut Reader) -> Result<LatticeState> {
        let size = r.u32()? as usize;
        let dim = r.u8()? as usize;
        let sublattices = r.u8()? as usize;
        let count = r.u64()? as usize;
        let mut state = LatticeState::new(size, dim, sublattices, Init::AllPlus)
            .map_err(|e| Error::Checkpoint(e.to_string()))?;
        if count != state.spins.len() {
            return Err(Error::Checkpoint(format!(
                "spin count {count} does not match lattice shape ({} expected)",
                state.spins.len()
            )));
        }
        let bytes = r.bytes(count.div_ceil(8))?;
        for (n, s) in state.spins.iter_mut().enumerate() {
            if bytes[n / 8] >> (n % 8) & 1 == 1 {
                *s = -1;
            }
        }
        Ok(state)
    }
}

const LATTICE_MAGIC: [u8; 4] = *b"RPGL";
const LATTICE_VERSION: u16 = 1;

/// A lattice state together with the seed and sweep counter it was taken at.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LatticeCheckpoint {
    pub state: LatticeState,
    pub seed: u64,
    pub sweep: u64,
}

impl LatticeCheckpoint {
    pub fn write_to<W: Write>(&self, out: W) -> Result<()> {
        let mut w = Writer::new(LATTICE_MAGIC, LATTICE_VERSION);
        w.u64(self.seed);
        w.u64(self.sweep);
        self.state.encode_spins(&mut w);
        w.finish(out)
    }

    pub fn read_from<R: Read>(input: R) -> Result<Self> {
        let mut r = Reader::open(input, LATTICE_MAGIC, LATTICE_VERSION)?;
        let seed = r.u64()?;
        let sweep = r.u64()?;
        let state = LatticeState::decode_spins(&mut r)?;
        r.expect_end()?;
        Ok(LatticeCheckpoint { state, seed, sweep })
    }
}
