mod common;

use common::{enumerate, monte_carlo, sector_terms, TEMPS};
use rcpgm::model::TermKind;
use rcpgm::noise::{sample_disorder, CouplingSet, NoiseRates};
use rcpgm::{DisorderConfig, ModelKind};

fn check(label: &str, exact_e: &[f64], exact_p: &[f64], mc: &[((f64, f64), (f64, f64))]) {
    for (t, ((e, se), (p, sp))) in mc.iter().enumerate() {
        println!(
            "{label} T = {}: E {e:.5} ± {se:.5} (exact {:.5}), |P| {p:.5} ± {sp:.5} (exact {:.5})",
            TEMPS[t], exact_e[t], exact_p[t]
        );
        assert!((e - exact_e[t]).abs() <= 3.0 * se, "{label} energy at T = {}", TEMPS[t]);
        assert!((p - exact_p[t]).abs() <= 3.0 * sp, "{label} Polyakov at T = {}", TEMPS[t]);
    }
}

#[test]
fn rpgm_matches_enumeration() {
    let rates = NoiseRates::independent_xz(0.1, 0.1, 0.1);
    let couplings = CouplingSet::from_rates(ModelKind::Rpgm, &rates).unwrap();
    let disorder = sample_disorder(ModelKind::Rpgm, &rates, &couplings, 2, 17).unwrap();
    let flipped: f64 = [TermKind::XH, TermKind::XV, TermKind::QSigma]
        .iter()
        .map(|t| disorder.flipped_fraction(*t))
        .sum();
    assert!(flipped > 0.0, "the instance should carry some disorder");
    let exact = enumerate(&sector_terms(&disorder, false), &TEMPS);
    check("rpgm", &exact.energy, &exact.polyakov, &monte_carlo(&disorder, 1));
}

#[test]
fn clean_rpgm_energy_increases_with_temperature() {
    let disorder = DisorderConfig::uniform(ModelKind::Rpgm, 2, CouplingSet::uniform(1.0, 1.0)).unwrap();
    let temps = [1.0, 1.5, 2.0, 3.0, 4.0];
    let exact = enumerate(&sector_terms(&disorder, false), &temps);
    assert!(exact.energy.windows(2).all(|w| w[0] < w[1]));
    let mc = monte_carlo(&disorder, 5);
    assert!(mc.windows(2).all(|w| w[0].0 .0 < w[1].0 .0));
    let at = |t: f64| exact.energy[temps.iter().position(|x| *x == t).unwrap()];
    check(
        "clean rpgm",
        &TEMPS.map(at),
        &TEMPS.map(|t| exact.polyakov[temps.iter().position(|x| *x == t).unwrap()]),
        &mc,
    );
}

#[test]
fn decoupled_rcpgm_factorizes() {
    let rates = NoiseRates::symmetric(0.12);
    let mut couplings = CouplingSet::uniform(1.0, 0.8);
    couplings.set(TermKind::YH, 0.0);
    couplings.set(TermKind::YV, 0.0);
    couplings.set(TermKind::ZV, 0.7);
    let disorder = sample_disorder(ModelKind::Rcpgm, &rates, &couplings, 2, 23).unwrap();
    let sigma = enumerate(&sector_terms(&disorder, false), &TEMPS);
    let tau = enumerate(&sector_terms(&disorder, true), &TEMPS);
    let energy: Vec<f64> = (0..3).map(|t| sigma.energy[t] + tau.energy[t]).collect();
    check("decoupled rcpgm", &energy, &sigma.polyakov, &monte_carlo(&disorder, 41));
}

#[test]
fn temperature_family_matches_enumeration() {
    // βJq = 2β - ln(3)/2 is the fixed Hamiltonian with Jq(T) = 2 - T ln(3)/2.
    let rates = NoiseRates::independent_xz(0.1, 0.1, 0.1);
    let couplings = CouplingSet { jq_bias: -0.5 * 3f64.ln(), ..CouplingSet::uniform(1.0, 2.0) };
    let disorder = sample_disorder(ModelKind::Rpgm, &rates, &couplings, 2, 17).unwrap();
    let mut exact_e = [0.0; 3];
    let mut exact_p = [0.0; 3];
    for (n, &t) in TEMPS.iter().enumerate() {
        let mut fixed = disorder.clone();
        fixed.couplings = CouplingSet::uniform(1.0, 2.0 - 0.5 * t * 3f64.ln());
        let exact = enumerate(&sector_terms(&fixed, false), &[t]);
        exact_e[n] = exact.energy[0];
        exact_p[n] = exact.polyakov[0];
    }
    check("temperature family", &exact_e, &exact_p, &monte_carlo(&disorder, 1));
}
