//! Noise rates, Nishimori couplings and quenched sign disorder.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::codec::{Reader, Writer};
use crate::error::{domain, Error, Result};
use crate::model::{ModelKind, Orientation, TermKind};

/// Pauli rates per data-qubit orientation plus the syndrome flip rate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NoiseRates {
    pub px_h: f64,
    pub px_v: f64,
    pub py_h: f64,
    pub py_v: f64,
    pub pz_h: f64,
    pub pz_v: f64,
    pub q: f64,
}

impl NoiseRates {
    pub fn zero() -> Self {
        NoiseRates::default()
    }

    /// Each Pauli with probability p/3 and syndrome flips with probability p.
    pub fn symmetric(p: f64) -> Self {
        let w = p / 3.0;
        NoiseRates {
            px_h: w,
            px_v: w,
            py_h: w,
            py_v: w,
            pz_h: w,
            pz_v: w,
            q: p,
        }
    }

    /// Independent bit- and phase-flip channels with rates `px` and `pz`.
    pub fn independent_xz(px: f64, pz: f64, q: f64) -> Self {
        let x = px * (1.0 - pz);
        let y = px * pz;
        let z = pz * (1.0 - px);
        NoiseRates {
            px_h: x,
            px_v: x,
            py_h: y,
            py_v: y,
            pz_h: z,
            pz_v: z,
            q,
        }
    }

    /// (pX, pY, pZ) for one orientation.
    pub fn paulis(&self, o: Orientation) -> (f64, f64, f64) {
        match o {
            Orientation::H => (self.px_h, self.py_h, self.pz_h),
            Orientation::V => (self.px_v, self.py_v, self.pz_v),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let named = [
            ("px_h", self.px_h),
            ("px_v", self.px_v),
            ("py_h", self.py_h),
            ("py_v", self.py_v),
            ("pz_h", self.pz_h),
            ("pz_v", self.pz_v),
            ("q", self.q),
        ];
        for (name, v) in named {
            if !(0.0..=1.0).contains(&v) {
                return Err(domain(format!("rate {name} = {v} is not a probability")));
            }
        }
        for o in [Orientation::H, Orientation::V] {
            let (x, y, z) = self.paulis(o);
            if x + y + z > 1.0 + 1e-12 {
                return Err(domain(format!("Pauli rates for {o:?} qubits sum above 1")));
            }
        }
        Ok(())
    }
}

/// Bond coupling on the Nishimori line: e^{-2J} = p/(1-p).
pub fn nishimori_bond_coupling(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(domain(format!("bond probability must lie in (0, 1), got {p}")));
    }
    Ok(0.5 * ((1.0 - p) / p).ln())
}

/// Vertex couplings (|J(X)|, |J(Y)|, |J(Z)|) for one qubit with Pauli rates
/// pX, pY, pZ on the Nishimori line.
pub fn nishimori_vertex_couplings(px: f64, py: f64, pz: f64) -> Result<[f64; 3]> {
    if !(px > 0.0 && py > 0.0 && pz > 0.0) {
        return Err(domain(format!(
            "vertex couplings need strictly positive rates, got ({px}, {py}, {pz})"
        )));
    }
    let pi = 1.0 - px - py - pz;
    if pi <= 0.0 {
        return Err(domain("Pauli rates sum to 1 or more"));
    }
    let prod = px * py * pz;
    Ok([px, py, pz].map(|pw| -0.25 * (prod / (pw * pw * pi)).ln()))
}

/// Coupling magnitudes, named J{orientation}_{Pauli}.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingSet {
    pub jx_x: f64,
    pub jy_x: f64,
    pub jx_y: f64,
    pub jy_y: f64,
    pub jx_z: f64,
    pub jy_z: f64,
    pub jq_sigma: f64,
    pub jq_tau: f64,
    /// Temperature-independent part of the dimensionless space-like
    /// couplings: a Jq term carries β·Jq + jq_bias (times its sign).
    #[serde(default, skip_serializing_if = "is_zero")]
    pub jq_bias: f64,
}

fn is_zero(v: &f64) -> bool {
    *v == 0.0
}

impl CouplingSet {
    pub fn uniform(j: f64, jq: f64) -> Self {
        CouplingSet {
            jx_x: j,
            jy_x: j,
            jx_y: j,
            jy_y: j,
            jx_z: j,
            jy_z: j,
            jq_sigma: jq,
            jq_tau: jq,
            jq_bias: 0.0,
        }
    }

    /// β-independent part of a term's dimensionless coupling.
    pub fn bias(&self, term: TermKind) -> f64 {
        match term {
            TermKind::QSigma | TermKind::QTau => self.jq_bias,
            _ => 0.0,
        }
    }

    pub fn magnitude(&self, term: TermKind) -> f64 {
        match term {
            TermKind::XH => self.jx_x,
            TermKind::XV => self.jy_x,
            TermKind::YH => self.jx_y,
            TermKind::YV => self.jy_y,
            TermKind::ZH => self.jx_z,
            TermKind::ZV => self.jy_z,
            TermKind::QSigma => self.jq_sigma,
            TermKind::QTau => self.jq_tau,
        }
    }

    pub fn set(&mut self, term: TermKind, value: f64) {
        let slot = match term {
            TermKind::XH => &mut self.jx_x,
            TermKind::XV => &mut self.jy_x,
            TermKind::YH => &mut self.jx_y,
            TermKind::YV => &mut self.jy_y,
            TermKind::ZH => &mut self.jx_z,
            TermKind::ZV => &mut self.jy_z,
            TermKind::QSigma => &mut self.jq_sigma,
            TermKind::QTau => &mut self.jq_tau,
        };
        *slot = value;
    }

    /// Divide every magnitude by `jx_x`, the unit of temperature in the
    /// normalized convention.
    pub fn normalized(&self) -> Result<CouplingSet> {
        let unit = self.jx_x;
        if !(unit.is_finite() && unit > 0.0) {
            return Err(domain(format!("cannot normalize by Jx(X) = {unit}")));
        }
        let mut out = *self;
        for t in TermKind::ALL {
            out.set(t, self.magnitude(t) / unit);
        }
        Ok(out)
    }

    /// Nishimori couplings for a model from explicit rates. Uncoupled models
    /// keep one term per qubit, flipped by X or Y; a zero rate there freezes
    /// the term as an infinitely strong ferromagnetic constraint.
    pub fn from_rates(kind: ModelKind, rates: &NoiseRates) -> Result<CouplingSet> {
        rates.validate()?;
        let mut c = CouplingSet::uniform(0.0, 0.0);
        if kind.is_coupled() {
            for (o, [x, y, z]) in [
                (Orientation::H, [TermKind::XH, TermKind::YH, TermKind::ZH]),
                (Orientation::V, [TermKind::XV, TermKind::YV, TermKind::ZV]),
            ] {
                let (px, py, pz) = rates.paulis(o);
                let [jx, jy, jz] = nishimori_vertex_couplings(px, py, pz)?;
                c.set(x, jx);
                c.set(y, jy);
                c.set(z, jz);
            }
            if kind.has_syndrome_terms() {
                let jq = nishimori_bond_coupling(rates.q)?;
                c.jq_sigma = jq;
                c.jq_tau = jq;
            }
        } else {
            c.jx_x = bond_or_frozen(rates.px_h + rates.py_h)?;
            c.jy_x = bond_or_frozen(rates.px_v + rates.py_v)?;
            if kind.has_syndrome_terms() {
                c.jq_sigma = bond_or_frozen(rates.q)?;
            }
        }
        Ok(c)
    }
}

fn bond_or_frozen(p: f64) -> Result<f64> {
    if p == 0.0 {
        Ok(f64::INFINITY)
    } else {
        nishimori_bond_coupling(p)
    }
}

/// Couplings for symmetric depolarizing noise. Normalized mode fixes
/// J = 1 and Jq = 2 - ln(3)/2 independently of p.
pub fn couplings_symmetric_depolarizing(p: f64, normalize: bool) -> Result<CouplingSet> {
    if normalize {
        if !(0.0..1.0).contains(&p) {
            return Err(domain(format!("depolarizing rate must lie in [0, 1), got {p}")));
        }
        return Ok(CouplingSet::uniform(1.0, 2.0 - 0.5 * 3f64.ln()));
    }
    let jq = nishimori_bond_coupling(p)?;
    let jx = -0.25 * (p / (3.0 * (1.0 - p))).ln();
    Ok(CouplingSet::uniform(jx, jq))
}

/// The temperature family of symmetric depolarizing noise in units of J:
/// βJ = β and βJq = 2β - ln(3)/2, so that at T = 4/ln(3(1-p)/p) every
/// coupling takes its Nishimori value for that p.
pub fn symmetric_depolarizing_family() -> CouplingSet {
    CouplingSet { jq_bias: -0.5 * 3f64.ln(), ..CouplingSet::uniform(1.0, 2.0) }
}

/// Signed couplings for every term kind at every site of one disorder sample.
#[derive(Clone, Debug, PartialEq)]
pub struct DisorderConfig {
    pub kind: ModelKind,
    pub size: usize,
    pub couplings: CouplingSet,
    pub rates: NoiseRates,
    pub seed: u64,
    signs: Vec<i8>,
}

impl DisorderConfig {
    /// A disorder-free configuration: every sign +1.
    pub fn uniform(kind: ModelKind, size: usize, couplings: CouplingSet) -> Result<Self> {
        if size < 2 {
            return Err(domain(format!("lattice size must be at least 2, got {size}")));
        }
        let sites = size.pow(kind.dim() as u32);
        Ok(DisorderConfig {
            kind,
            size,
            couplings,
            rates: NoiseRates::zero(),
            seed: 0,
            signs: vec![1; TermKind::ALL.len() * sites],
        })
    }

    pub fn sites(&self) -> usize {
        self.size.pow(self.kind.dim() as u32)
    }

    #[inline]
    pub fn sign(&self, term: TermKind, site: usize) -> i8 {
        self.signs[term.index() * self.sites() + site]
    }

    pub fn set_sign(&mut self, term: TermKind, site: usize, sign: i8) {
        let n = self.sites();
        self.signs[term.index() * n + site] = if sign < 0 { -1 } else { 1 };
    }

    fn toggle(&mut self, term: TermKind, site: usize) {
        let n = self.sites();
        let s = &mut self.signs[term.index() * n + site];
        *s = -*s;
    }

    /// Signed coupling of a term (sign times magnitude).
    pub fn value(&self, term: TermKind, site: usize) -> f64 {
        self.sign(term, site) as f64 * self.couplings.magnitude(term)
    }

    pub fn flipped_fraction(&self, term: TermKind) -> f64 {
        let n = self.sites();
        let flipped = (0..n).filter(|&s| self.sign(term, s) < 0).count();
        flipped as f64 / n as f64
    }

    pub fn write_to<W: Write>(&self, out: W) -> Result<()> {
        let mut w = Writer::new(*b"RPGD", 2);
        w.u8(self.kind as u8);
        w.u32(self.size as u32);
        w.u64(self.seed);
        for t in TermKind::ALL {
            w.f64(self.couplings.magnitude(t));
        }
        w.f64(self.couplings.jq_bias);
        for v in [
            self.rates.px_h,
            self.rates.px_v,
            self.rates.py_h,
            self.rates.py_v,
            self.rates.pz_h,
            self.rates.pz_v,
            self.rates.q,
        ] {
            w.f64(v);
        }
        let mut bytes = vec![0u8; self.signs.len().div_ceil(8)];
        for (n, &s) in self.signs.iter().enumerate() {
            if s < 0 {
                bytes[n / 8] |= 1 << (n % 8);
            }
        }
        w.bytes(&bytes);
        w.finish(out)
    }

    pub fn read_from<R: Read>(input: R) -> Result<Self> {
        let mut r = Reader::open(input, *b"RPGD", 2)?;
        let kind = match r.u8()? {
            0 => ModelKind::Rbim,
            1 => ModelKind::R8vm,
            2 => ModelKind::Rpgm,
            3 => ModelKind::Rcpgm,
            k => return Err(Error::Checkpoint(format!("unknown model tag {k}"))),
        };
        let size = r.u32()? as usize;
        let seed = r.u64()?;
        let mut couplings = CouplingSet::uniform(0.0, 0.0);
        for t in TermKind::ALL {
            couplings.set(t, r.f64()?);
        }
        couplings.jq_bias = r.f64()?;
        let mut v = [0.0; 7];
        for x in v.iter_mut() {
            *x = r.f64()?;
        }
        let rates = NoiseRates {
            px_h: v[0],
            px_v: v[1],
            py_h: v[2],
            py_v: v[3],
            pz_h: v[4],
            pz_v: v[5],
            q: v[6],
        };
        let mut d = DisorderConfig::uniform(kind, size, couplings)
            .map_err(|e| Error::Checkpoint(e.to_string()))?;
        d.rates = rates;
        d.seed = seed;
        let bytes = r.bytes(d.signs.len().div_ceil(8))?;
        for (n, s) in d.signs.iter_mut().enumerate() {
            if bytes[n / 8] >> (n % 8) & 1 == 1 {
                *s = -1;
            }
        }
        r.expect_end()?;
        Ok(d)
    }
}

/// Draw one quenched sign configuration. Sites are visited in linear order;
/// per site the horizontal then vertical qubit draws a Pauli, then the σ and
/// τ syndrome plaquettes each flip with probability q.
pub fn sample_disorder(
    kind: ModelKind,
    rates: &NoiseRates,
    couplings: &CouplingSet,
    size: usize,
    seed: u64,
) -> Result<DisorderConfig> {
    rates.validate()?;
    for t in kind.terms() {
        if couplings.magnitude(*t).is_nan() {
            return Err(domain(format!("coupling {} is NaN", t.name())));
        }
    }
    let mut d = DisorderConfig::uniform(kind, size, *couplings)?;
    d.rates = *rates;
    d.seed = seed;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let qubits = [
        (Orientation::H, [TermKind::XH, TermKind::YH, TermKind::ZH]),
        (Orientation::V, [TermKind::XV, TermKind::YV, TermKind::ZV]),
    ];
    for site in 0..d.sites() {
        for (o, [x, y, z]) in qubits {
            let (px, py, pz) = rates.paulis(o);
            let u: f64 = rng.random();
            if kind.is_coupled() {
                if u < px {
                    d.toggle(y, site);
                    d.toggle(z, site);
                } else if u < px + py {
                    d.toggle(x, site);
                    d.toggle(z, site);
                } else if u < px + py + pz {
                    d.toggle(x, site);
                    d.toggle(y, site);
                }
            } else if u < px + py {
                d.toggle(x, site);
            }
        }
        if kind.has_syndrome_terms() {
            if rng.random::<f64>() < rates.q {
                d.toggle(TermKind::QSigma, site);
            }
            if kind.is_coupled() && rng.random::<f64>() < rates.q {
                d.toggle(TermKind::QTau, site);
            }
        }
    }
    Ok(d)
}
