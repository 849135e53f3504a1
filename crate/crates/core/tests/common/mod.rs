//! Helpers shared by the integration test targets.

#![allow(dead_code)]

use rcpgm::model::TermKind;
use rcpgm::noise::DisorderConfig;
use rcpgm::ptmc::{RunParameters, Tempering, TemperatureLadder};
use rcpgm::{Geometry, Hamiltonian};

pub const TEMPS: [f64; 3] = [1.5, 2.0, 3.0];

/// Boltzmann averages of an L = 2 plaquette gauge sector by summing all 2^24
/// link configurations. Links are numbered d*8 + (k*2 + j)*2 + i with
/// d = 0, 1, 2 for x, y, t; a set bit is a spin of -1.
pub struct Enumeration {
    pub energy: Vec<f64>,
    pub polyakov: Vec<f64>,
}

pub fn link(d: usize, i: usize, j: usize, k: usize) -> u32 {
    (d * 8 + ((k % 2) * 2 + j % 2) * 2 + i % 2) as u32
}

const X: usize = 0;
const Y: usize = 1;
const T: usize = 2;

pub fn yt(i: usize, j: usize, k: usize) -> u32 {
    1 << link(Y, i, j, k) | 1 << link(T, i, j + 1, k) | 1 << link(Y, i, j, k + 1) | 1 << link(T, i, j, k)
}

pub fn tx(i: usize, j: usize, k: usize) -> u32 {
    1 << link(T, i, j, k) | 1 << link(X, i, j, k + 1) | 1 << link(T, i + 1, j, k) | 1 << link(X, i, j, k)
}

pub fn xy(i: usize, j: usize, k: usize) -> u32 {
    1 << link(X, i, j, k) | 1 << link(Y, i + 1, j, k) | 1 << link(X, i, j + 1, k) | 1 << link(Y, i, j, k)
}

/// Signed plaquette terms of one sector: (mask, coupling) with energy
/// -coupling * product.
pub fn sector_terms(disorder: &DisorderConfig, tau: bool) -> Vec<(u32, f64)> {
    let mut terms = Vec::new();
    for k in 0..2 {
        for j in 0..2 {
            for i in 0..2 {
                let site = (k * 2 + j) * 2 + i;
                if tau {
                    terms.push((tx(i + 1, j, k), disorder.value(TermKind::ZH, site)));
                    terms.push((yt(i, j + 1, k), disorder.value(TermKind::ZV, site)));
                    terms.push((xy(i, j, k), disorder.value(TermKind::QTau, site)));
                } else {
                    terms.push((yt(i, j, k), disorder.value(TermKind::XH, site)));
                    terms.push((tx(i, j, k), disorder.value(TermKind::XV, site)));
                    terms.push((xy(i, j, k), disorder.value(TermKind::QSigma, site)));
                }
            }
        }
    }
    terms
}

/// Exact ⟨E⟩ and ⟨|P̄|⟩ of a sector at each temperature.
pub fn enumerate(terms: &[(u32, f64)], temperatures: &[f64]) -> Enumeration {
    let columns: Vec<u32> = (0..4)
        .map(|c| 1 << link(T, c % 2, c / 2, 0) | 1 << link(T, c % 2, c / 2, 1))
        .collect();
    let ground: f64 = -terms.iter().map(|t| t.1.abs()).sum::<f64>();
    let n = temperatures.len();
    let mut z = vec![0.0; n];
    let mut ez = vec![0.0; n];
    let mut pz = vec![0.0; n];
    let betas: Vec<f64> = temperatures.iter().map(|t| 1.0 / t).collect();
    for s in 0u32..1 << 24 {
        let mut e = 0.0;
        for &(m, j) in terms {
            let prod = if (s & m).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            e -= j * prod;
        }
        let p: i32 = columns
            .iter()
            .map(|&m| if (s & m).count_ones() % 2 == 0 { 1 } else { -1 })
            .sum();
        let p = (p as f64 / 4.0).abs();
        for t in 0..n {
            let w = (-(e - ground) * betas[t]).exp();
            z[t] += w;
            ez[t] += w * e;
            pz[t] += w * p;
        }
    }
    Enumeration {
        energy: (0..n).map(|t| ez[t] / z[t]).collect(),
        polyakov: (0..n).map(|t| pz[t] / z[t]).collect(),
    }
}

/// Mean and standard error from equal blocks of a correlated series.
pub fn blocked(values: &[f64], blocks: usize) -> (f64, f64) {
    let per = values.len() / blocks;
    let means: Vec<f64> = (0..blocks)
        .map(|b| values[b * per..(b + 1) * per].iter().sum::<f64>() / per as f64)
        .collect();
    let m = means.iter().sum::<f64>() / blocks as f64;
    let var = means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (blocks - 1) as f64;
    (m, (var / blocks as f64).sqrt())
}

/// Standard normal deviate by Box–Muller.
pub fn gaussian(rng: &mut impl rand::Rng) -> f64 {
    let u: f64 = 1.0 - rng.random::<f64>();
    let v: f64 = rng.random();
    (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
}

pub const FIT_SIZES: [f64; 5] = [8.0, 12.0, 16.0, 20.0, 24.0];

/// Number of noisy synthetic power-law trials, out of `trials`, whose fitted
/// T_c(∞) lies within 3σ of the truth. Each T_c(L) carries 1% Gaussian noise.
pub fn fit_coverage(trials: usize, seed: u64) -> usize {
    use rand::SeedableRng;
    let (a, b, tc) = (0.8, 2.0, 1.0);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut covered = 0;
    for _ in 0..trials {
        let clean: Vec<f64> = FIT_SIZES.iter().map(|l| a * l.powf(-b) + tc).collect();
        let err: Vec<f64> = clean.iter().map(|v| 0.01 * v).collect();
        let noisy: Vec<f64> = clean.iter().zip(&err).map(|(v, e)| v + e * gaussian(&mut rng)).collect();
        let fit = rcpgm::analysis::fit_finite_size(&FIT_SIZES, &noisy, Some(&err)).unwrap();
        if (fit.tc - tc).abs() <= 3.0 * fit.tc_err {
            covered += 1;
        }
    }
    covered
}

/// MC means and standard errors per temperature, ordered as `TEMPS`.
pub fn monte_carlo(disorder: &DisorderConfig, seed: u64) -> Vec<((f64, f64), (f64, f64))> {
    let ham = Hamiltonian::new(disorder, Geometry::Shifted).unwrap();
    let ladder = TemperatureLadder::from_temperatures(&TEMPS).unwrap();
    let params = RunParameters {
        thermalization_sweeps: 2000,
        n_sweep: 200_000,
        n_met: 1,
        bin_interval: 1,
        seed,
    };
    let mut sim = Tempering::new(&ham, ladder, params, 0).unwrap();
    sim.run_to_end().unwrap();
    let mut out: Vec<_> = sim
        .series()
        .iter()
        .map(|s| (s.temperature, blocked(&s.energy, 100), blocked(&s.order, 100)))
        .collect();
    out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    out.into_iter().map(|(_, e, p)| (e, p)).collect()
}

