//! Metropolis sweeps with parallel-tempering replica exchange.

use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codec::{Reader, Writer};
use crate::error::{domain, Error, Result};
use crate::hamiltonian::{EnergyCache, Hamiltonian};
use crate::lattice::{Init, LatticeState};
use crate::observables::{order_parameter, ObservableSeries};
use crate::rng::{decode_rng, derive_seed, encode_rng, stream_rng};

/// Inverse temperatures ordered from the hottest (index 0) to the coldest.
#[derive(Clone, Debug, PartialEq)]
pub struct TemperatureLadder {
    betas: Vec<f64>,
}

impl TemperatureLadder {
    /// β_0 = 1/T_max, β_i = r β_{i-1} with r = (T_max/T_min)^{1/(n-1)}.
    pub fn geometric(t_min: f64, t_max: f64, n_steps: usize) -> Result<Self> {
        if !(t_min > 0.0 && t_max > t_min && t_max.is_finite()) {
            return Err(domain(format!(
                "need 0 < T_min < T_max, got T_min = {t_min}, T_max = {t_max}"
            )));
        }
        if n_steps < 2 {
            return Err(domain(format!("ladder needs at least 2 steps, got {n_steps}")));
        }
        let r = (t_max / t_min).powf(1.0 / (n_steps - 1) as f64);
        let mut betas = Vec::with_capacity(n_steps);
        let mut b = 1.0 / t_max;
        for _ in 0..n_steps {
            betas.push(b);
            b *= r;
        }
        *betas.last_mut().expect("n_steps >= 2") = 1.0 / t_min;
        Ok(TemperatureLadder { betas })
    }

    /// An explicit ladder; temperatures must be distinct and positive and are
    /// reordered from hot to cold.
    pub fn from_temperatures(temps: &[f64]) -> Result<Self> {
        if temps.len() < 2 {
            return Err(domain("ladder needs at least 2 temperatures"));
        }
        let mut t: Vec<f64> = temps.to_vec();
        if t.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
            return Err(domain("temperatures must be positive and finite"));
        }
        t.sort_by(|a, b| b.partial_cmp(a).expect("finite"));
        if t.windows(2).any(|w| w[0] == w[1]) {
            return Err(domain("duplicate temperature in ladder"));
        }
        Ok(TemperatureLadder {
            betas: t.iter().map(|x| 1.0 / x).collect(),
        })
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn temperatures(&self) -> Vec<f64> {
        self.betas.iter().map(|b| 1.0 / b).collect()
    }

    pub fn len(&self) -> usize {
        self.betas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.betas.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunParameters {
    /// Thermalization rounds; each round is `n_met` sweeps without exchange.
    pub thermalization_sweeps: u64,
    pub n_sweep: u64,
    pub n_met: u64,
    pub bin_interval: u64,
    pub seed: u64,
}

impl RunParameters {
    pub const DEFAULT_THERMALIZATION: u64 = 10_000;

    pub fn validate(&self) -> Result<()> {
        if self.n_met == 0 || self.bin_interval == 0 {
            return Err(domain("n_met and bin_interval must be at least 1"));
        }
        Ok(())
    }
}

/// Exchange acceptance min[1, exp((β_k − β_{k+1})(E_k − E_{k+1}))] for
/// physical energies E.
pub fn swap_acceptance(beta_k: f64, beta_k1: f64, e_k: f64, e_k1: f64) -> f64 {
    let x = (beta_k - beta_k1) * (e_k - e_k1);
    if x >= 0.0 {
        1.0
    } else {
        x.exp()
    }
}

#[derive(Clone, Debug)]
pub struct Replica {
    pub state: LatticeState,
    pub cache: EnergyCache,
    rng: ChaCha8Rng,
}

impl Replica {
    pub fn new(ham: &Hamiltonian, state: LatticeState, rng: ChaCha8Rng) -> Result<Self> {
        let cache = EnergyCache::new(ham, &state)?;
        Ok(Replica { state, cache, rng })
    }

    pub fn energy(&self) -> f64 {
        self.cache.energy()
    }

    /// One pass over every active spin in index order; returns the fraction
    /// of accepted flips.
    pub fn metropolis_sweep(&mut self, ham: &Hamiltonian, beta: f64) -> f64 {
        let mut accepted = 0usize;
        let active = ham.active_spins();
        if ham.has_bias() {
            for &s in active {
                let s = s as usize;
                let (d, b) = self.cache.delta_with_bias(ham, s);
                let x = beta * d + b;
                if x <= 0.0 || self.rng.random::<f64>() < (-x).exp() {
                    self.cache.apply_flip_with_bias(ham, &mut self.state, s, d, b);
                    accepted += 1;
                }
            }
            return accepted as f64 / active.len().max(1) as f64;
        }
        for &s in active {
            let s = s as usize;
            let d = self.cache.delta(ham, s);
            if d <= 0.0 || self.rng.random::<f64>() < (-beta * d).exp() {
                self.cache.apply_flip(ham, &mut self.state, s, d);
                accepted += 1;
            }
        }
        accepted as f64 / active.len().max(1) as f64
    }
}

/// Where and how often a sample's progress is written.
#[derive(Clone, Debug)]
pub struct CheckpointPolicy {
    pub path: PathBuf,
    /// Steps (thermalization rounds plus iterations) between writes.
    pub every: u64,
    /// Stop with [`Error::Halted`] after this many steps of the current
    /// invocation, leaving a checkpoint behind.
    pub halt_after: Option<u64>,
}

const REFRESH_EVERY: u64 = 64;

/// Parallel-tempering simulation of one disorder sample.
pub struct Tempering<'h> {
    ham: &'h Hamiltonian,
    ladder: TemperatureLadder,
    params: RunParameters,
    sample: usize,
    replicas: Vec<Replica>,
    /// replica_at[t] is the replica currently holding temperature t.
    replica_at: Vec<usize>,
    exchange_rng: ChaCha8Rng,
    thermalized: u64,
    iteration: u64,
    series: Vec<ObservableSeries>,
    swap_attempts: Vec<u64>,
    swap_accepts: Vec<u64>,
}

impl<'h> Tempering<'h> {
    pub fn new(
        ham: &'h Hamiltonian,
        ladder: TemperatureLadder,
        params: RunParameters,
        sample: usize,
    ) -> Result<Self> {
        params.validate()?;
        let n = ladder.len();
        let mut replicas = Vec::with_capacity(n);
        for r in 0..n {
            let blank = ham.blank_state();
            let state = LatticeState::new(
                blank.size(),
                blank.dim(),
                blank.sublattices(),
                Init::Random(derive_seed(params.seed, &[r as u64])),
            )?;
            replicas.push(Replica::new(ham, state, stream_rng(params.seed, r as u64 + 1))?);
        }
        let series = ladder
            .temperatures()
            .into_iter()
            .map(|t| ObservableSeries::new(sample, t))
            .collect();
        Ok(Tempering {
            ham,
            ladder,
            params,
            sample,
            replicas,
            replica_at: (0..n).collect(),
            exchange_rng: stream_rng(params.seed, 0),
            thermalized: 0,
            iteration: 0,
            series,
            swap_attempts: vec![0; n - 1],
            swap_accepts: vec![0; n - 1],
        })
    }

    pub fn ladder(&self) -> &TemperatureLadder {
        &self.ladder
    }

    pub fn replicas(&self) -> &[Replica] {
        &self.replicas
    }

    /// Temperature index assigned to each replica.
    pub fn labels(&self) -> Vec<usize> {
        let mut out = vec![0; self.replicas.len()];
        for (t, &r) in self.replica_at.iter().enumerate() {
            out[r] = t;
        }
        out
    }

    /// The replica at temperature index `t`.
    pub fn replica_at(&self, t: usize) -> &Replica {
        &self.replicas[self.replica_at[t]]
    }

    pub fn series(&self) -> &[ObservableSeries] {
        &self.series
    }

    pub fn into_series(self) -> Vec<ObservableSeries> {
        self.series
    }

    /// Accepted fraction of exchange attempts per adjacent pair.
    pub fn swap_rates(&self) -> Vec<f64> {
        self.swap_attempts
            .iter()
            .zip(&self.swap_accepts)
            .map(|(&a, &n)| if a == 0 { 0.0 } else { n as f64 / a as f64 })
            .collect()
    }

    pub fn total_steps(&self) -> u64 {
        self.params.thermalization_sweeps + self.params.n_sweep
    }

    pub fn steps_done(&self) -> u64 {
        self.thermalized + self.iteration
    }

    pub fn is_finished(&self) -> bool {
        self.steps_done() >= self.total_steps()
    }

    fn sweep_all(&mut self) {
        let ham = self.ham;
        let n_met = self.params.n_met;
        let labels = self.labels();
        let betas = self.ladder.betas();
        let refresh = (self.steps_done() + 1) % REFRESH_EVERY == 0;
        self.replicas
            .par_iter_mut()
            .zip(labels.par_iter())
            .for_each(|(rep, &t)| {
                for _ in 0..n_met {
                    rep.metropolis_sweep(ham, betas[t]);
                }
                if refresh {
                    rep.cache.refresh(ham);
                }
            });
    }

    /// One exchange pass over adjacent pairs, hottest pair first.
    pub fn swap_pass(&mut self) {
        let betas = self.ladder.betas();
        for k in 0..betas.len() - 1 {
            let a = self.replica_at[k];
            let b = self.replica_at[k + 1];
            let acc = swap_acceptance(
                betas[k],
                betas[k + 1],
                self.replicas[a].energy(),
                self.replicas[b].energy(),
            );
            let u: f64 = self.exchange_rng.random();
            self.swap_attempts[k] += 1;
            if u < acc {
                self.replica_at.swap(k, k + 1);
                self.swap_accepts[k] += 1;
            }
        }
    }

    fn measure(&mut self) -> Result<()> {
        for t in 0..self.ladder.len() {
            let r = self.replica_at[t];
            self.replicas[r].cache.refresh(self.ham);
            let rep = &self.replicas[r];
            let order = order_parameter(&rep.state)?;
            let energy = rep.energy() + rep.cache.bias() / self.ladder.betas()[t];
            self.series[t].push(order, energy);
        }
        Ok(())
    }

    /// Advance by one thermalization round or one measurement iteration.
    pub fn step(&mut self) -> Result<()> {
        if self.is_finished() {
            return Ok(());
        }
        self.sweep_all();
        if self.thermalized < self.params.thermalization_sweeps {
            self.thermalized += 1;
            return Ok(());
        }
        self.swap_pass();
        self.iteration += 1;
        if self.iteration % self.params.bin_interval == 0 {
            self.measure()?;
            log::debug!(
                "sample {} bin {} (iteration {}/{})",
                self.sample,
                self.series[0].bins(),
                self.iteration,
                self.params.n_sweep
            );
        }
        Ok(())
    }

    pub fn run_to_end(&mut self) -> Result<()> {
        while !self.is_finished() {
            self.step()?;
        }
        Ok(())
    }

    pub fn write_checkpoint<W: Write>(&self, out: W) -> Result<()> {
        let mut w = Writer::new(*b"RPGT", 2);
        w.bytes(&self.ham.fingerprint());
        w.u64(self.sample as u64);
        w.u64(self.params.seed);
        w.u64(self.params.thermalization_sweeps);
        w.u64(self.params.n_sweep);
        w.u64(self.params.n_met);
        w.u64(self.params.bin_interval);
        w.u32(self.ladder.len() as u32);
        for &b in self.ladder.betas() {
            w.f64(b);
        }
        w.u64(self.thermalized);
        w.u64(self.iteration);
        encode_rng(&mut w, &self.exchange_rng);
        for &r in &self.replica_at {
            w.u32(r as u32);
        }
        for k in 0..self.swap_attempts.len() {
            w.u64(self.swap_attempts[k]);
            w.u64(self.swap_accepts[k]);
        }
        for rep in &self.replicas {
            w.f64(rep.cache.energy());
            w.f64(rep.cache.bias());
            encode_rng(&mut w, &rep.rng);
            rep.state.encode_spins(&mut w);
        }
        for s in &self.series {
            w.u64(s.bins() as u64);
            for (&o, &e) in s.order.iter().zip(&s.energy) {
                w.f64(o);
                w.f64(e);
            }
        }
        w.finish(out)
    }

    /// Rebuild from a checkpoint written for the same Hamiltonian, ladder and
    /// parameters; any mismatch is an error.
    pub fn read_checkpoint<R: Read>(
        ham: &'h Hamiltonian,
        ladder: TemperatureLadder,
        params: RunParameters,
        sample: usize,
        input: R,
    ) -> Result<Self> {
        let mismatch = |what: &str| Error::Checkpoint(format!("{what} does not match this run"));
        let mut r = Reader::open(input, *b"RPGT", 2)?;
        if r.bytes(32)? != ham.fingerprint() {
            return Err(mismatch("disorder"));
        }
        if r.u64()? != sample as u64 {
            return Err(mismatch("sample index"));
        }
        let stored = [r.u64()?, r.u64()?, r.u64()?, r.u64()?, r.u64()?];
        let expected = [
            params.seed,
            params.thermalization_sweeps,
            params.n_sweep,
            params.n_met,
            params.bin_interval,
        ];
        if stored != expected {
            return Err(mismatch("run parameters"));
        }
        let n = r.u32()? as usize;
        if n != ladder.len() {
            return Err(mismatch("ladder"));
        }
        for &b in ladder.betas() {
            if r.f64()?.to_bits() != b.to_bits() {
                return Err(mismatch("ladder"));
            }
        }
        let mut t = Tempering::new(ham, ladder, params, sample)?;
        t.thermalized = r.u64()?;
        t.iteration = r.u64()?;
        t.exchange_rng = decode_rng(&mut r)?;
        let mut seen = vec![false; n];
        for slot in t.replica_at.iter_mut() {
            let v = r.u32()? as usize;
            if v >= n || seen[v] {
                return Err(Error::Checkpoint("replica labels are not a permutation".into()));
            }
            seen[v] = true;
            *slot = v;
        }
        for k in 0..n - 1 {
            t.swap_attempts[k] = r.u64()?;
            t.swap_accepts[k] = r.u64()?;
        }
        for rep in t.replicas.iter_mut() {
            let energy = r.f64()?;
            let bias = r.f64()?;
            rep.rng = decode_rng(&mut r)?;
            let state = LatticeState::decode_spins(&mut r)?;
            ham.check_shape(&state)
                .map_err(|e| Error::Checkpoint(e.to_string()))?;
            rep.cache = EnergyCache::new(ham, &state)?;
            rep.cache.set_energy(energy, bias);
            rep.state = state;
        }
        for s in t.series.iter_mut() {
            let bins = r.u64()? as usize;
            for _ in 0..bins {
                let o = r.f64()?;
                let e = r.f64()?;
                s.push(o, e);
            }
        }
        r.expect_end()?;
        Ok(t)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("ckpt.tmp");
        {
            let f = fs::File::create(&tmp)?;
            self.write_checkpoint(BufWriter::new(f))?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }
}

/// Run one disorder sample to completion, resuming from and periodically
/// writing a checkpoint when a policy is given.
pub fn run_disorder_sample(
    params: &RunParameters,
    ham: &Hamiltonian,
    ladder: &TemperatureLadder,
    sample: usize,
    checkpoint: Option<&CheckpointPolicy>,
) -> Result<Vec<ObservableSeries>> {
    let mut sim = match checkpoint {
        Some(p) if p.path.exists() => {
            let f = fs::File::open(&p.path)?;
            Tempering::read_checkpoint(ham, ladder.clone(), *params, sample, std::io::BufReader::new(f))?
        }
        _ => Tempering::new(ham, ladder.clone(), *params, sample)?,
    };
    let Some(policy) = checkpoint else {
        sim.run_to_end()?;
        return Ok(sim.into_series());
    };
    let every = policy.every.max(1);
    let mut done_here = 0u64;
    while !sim.is_finished() {
        sim.step()?;
        done_here += 1;
        if sim.steps_done() % every == 0 {
            sim.save(&policy.path)?;
        }
        if policy.halt_after == Some(done_here) && !sim.is_finished() {
            sim.save(&policy.path)?;
            return Err(Error::Halted(sim.steps_done()));
        }
    }
    sim.save(&policy.path)?;
    Ok(sim.into_series())
}
