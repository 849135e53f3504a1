//! Order parameters, their thermal moments and disorder averages.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::lattice::{Direction, LatticeState, Sublattice};
use crate::numeric::{central_moment, mean};

/// |P̄| with P̄ the column average of the product of t-links along time.
pub fn mean_abs_polyakov(state: &LatticeState, sub: Sublattice) -> Result<f64> {
    if state.dim() != 3 {
        return Err(domain("the Polyakov line needs a 3D lattice"));
    }
    if sub.index() >= state.sublattices() {
        return Err(domain("sublattice not present"));
    }
    let l = state.size() as isize;
    let mut total: i64 = 0;
    for j in 0..l {
        for i in 0..l {
            let mut p = 1i8;
            for k in 0..l {
                p *= state.spin(state.index_wrapped(sub, Direction::T, i, j, k));
            }
            total += p as i64;
        }
    }
    Ok((total as f64 / (l * l) as f64).abs())
}

/// |m| over the site spins of a planar model.
pub fn magnetization_2d(state: &LatticeState, sub: Sublattice) -> Result<f64> {
    if state.dim() != 2 {
        return Err(domain("site magnetization is defined for 2D lattices"));
    }
    if sub.index() >= state.sublattices() {
        return Err(domain("sublattice not present"));
    }
    let l = state.size() as isize;
    let mut total: i64 = 0;
    for j in 0..l {
        for i in 0..l {
            total += state.spin(state.index_wrapped(sub, Direction::X, i, j, 0)) as i64;
        }
    }
    Ok((total as f64 / (l * l) as f64).abs())
}

/// The order parameter of the σ sector: Polyakov line in 3D, magnetization in 2D.
pub fn order_parameter(state: &LatticeState) -> Result<f64> {
    if state.dim() == 3 {
        mean_abs_polyakov(state, Sublattice::Sigma)
    } else {
        magnetization_2d(state, Sublattice::Sigma)
    }
}

/// χ = ⟨P̃²⟩, the population variance of the binned values.
pub fn susceptibility(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::Undefined(format!(
            "susceptibility needs at least 2 bins, got {}",
            values.len()
        )));
    }
    Ok(central_moment(values, 2))
}

/// B3 = ⟨P̃³⟩ / ⟨P̃²⟩^{3/2}.
pub fn cumulant_b3(values: &[f64]) -> Result<f64> {
    if values.len() < 3 {
        return Err(Error::Undefined(format!(
            "B3 needs at least 3 bins, got {}",
            values.len()
        )));
    }
    let m2 = central_moment(values, 2);
    if m2 <= 0.0 {
        return Err(Error::Undefined("B3 of a series with zero variance".into()));
    }
    Ok(central_moment(values, 3) / m2.powf(1.5))
}

/// Binder cumulant U4 = 1 - ⟨m⁴⟩ / (3⟨m²⟩²) from raw moments.
pub fn binder_cumulant(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Undefined("Binder cumulant of an empty series".into()));
    }
    let m2 = mean(&values.iter().map(|v| v * v).collect::<Vec<_>>());
    if m2 <= 0.0 {
        return Err(Error::Undefined("Binder cumulant with vanishing ⟨m²⟩".into()));
    }
    let m4 = mean(&values.iter().map(|v| v.powi(4)).collect::<Vec<_>>());
    Ok(1.0 - m4 / (3.0 * m2 * m2))
}

/// Binned measurements for one (disorder sample, temperature) pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservableSeries {
    pub sample: usize,
    pub temperature: f64,
    pub order: Vec<f64>,
    pub energy: Vec<f64>,
}

impl ObservableSeries {
    pub fn new(sample: usize, temperature: f64) -> Self {
        ObservableSeries {
            sample,
            temperature,
            order: Vec::new(),
            energy: Vec::new(),
        }
    }

    pub fn bins(&self) -> usize {
        self.order.len()
    }

    pub fn push(&mut self, order: f64, energy: f64) {
        self.order.push(order);
        self.energy.push(energy);
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Averaging {
    /// Form B3 and U4 in every sample, then average the ratios.
    #[default]
    PerSample,
    /// Average numerator and denominator moments over samples first.
    RatioOfAverages,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

/// Leave-one-out jackknife of `stat` over `n` units. Units for which the
/// statistic is undefined are handled by `stat` returning `None`.
pub fn jackknife<F>(n: usize, stat: F) -> Option<Estimate>
where
    F: Fn(&[usize]) -> Option<f64>,
{
    let all: Vec<usize> = (0..n).collect();
    let value = stat(&all)?;
    if n < 2 {
        return Some(Estimate { value, error: 0.0 });
    }
    let mut partial = Vec::with_capacity(n);
    for drop in 0..n {
        let keep: Vec<usize> = all.iter().copied().filter(|&u| u != drop).collect();
        if let Some(v) = stat(&keep) {
            partial.push(v);
        }
    }
    let m = partial.len();
    if m < 2 {
        return Some(Estimate { value, error: 0.0 });
    }
    let pm = mean(&partial);
    let var = partial.iter().map(|v| (v - pm).powi(2)).sum::<f64>() * (m as f64 - 1.0) / m as f64;
    Some(Estimate {
        value,
        error: var.sqrt(),
    })
}

/// Disorder-averaged statistics at one temperature.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisorderAverage {
    pub temperature: f64,
    pub samples: usize,
    pub order: Estimate,
    pub chi: Estimate,
    pub b3: Option<Estimate>,
    pub b3_samples: usize,
    pub binder: Option<Estimate>,
    pub energy: Estimate,
}

/// Per-unit thermal moments: one unit is a disorder sample, or a block of
/// bins when only one sample is available.
struct Unit {
    order: f64,
    energy: f64,
    m2: f64,
    m3: f64,
    raw2: f64,
    raw4: f64,
}

impl Unit {
    fn from_values(order: &[f64], energy: &[f64]) -> Unit {
        Unit {
            order: mean(order),
            energy: mean(energy),
            m2: central_moment(order, 2),
            m3: central_moment(order, 3),
            raw2: mean(&order.iter().map(|v| v * v).collect::<Vec<_>>()),
            raw4: mean(&order.iter().map(|v| v.powi(4)).collect::<Vec<_>>()),
        }
    }
}

const THERMAL_BLOCKS: usize = 10;

/// Average series from different disorder samples at a common temperature.
/// With a single sample the error bars come from a blocked jackknife over bins.
pub fn disorder_average(series: &[&ObservableSeries], mode: Averaging) -> Result<DisorderAverage> {
    let first = series
        .first()
        .ok_or_else(|| Error::Undefined("no samples to average".into()))?;
    let temperature = first.temperature;
    for s in series {
        if s.bins() < 3 {
            return Err(Error::Undefined(format!(
                "sample {} has {} bins, at least 3 needed",
                s.sample,
                s.bins()
            )));
        }
    }
    let units: Vec<Unit> = if series.len() == 1 {
        let s = first;
        let blocks = THERMAL_BLOCKS.min(s.bins() / 3).max(1);
        let per = s.bins() / blocks;
        (0..blocks)
            .map(|b| {
                let r = b * per..(b + 1) * per;
                Unit::from_values(&s.order[r.clone()], &s.energy[r])
            })
            .collect()
    } else {
        series
            .iter()
            .map(|s| Unit::from_values(&s.order, &s.energy))
            .collect()
    };
    let n = units.len();
    let avg = |sel: &[usize], f: &dyn Fn(&Unit) -> Option<f64>| -> Option<f64> {
        let vals: Vec<f64> = sel.iter().filter_map(|&u| f(&units[u])).collect();
        if vals.is_empty() {
            None
        } else {
            Some(mean(&vals))
        }
    };

    let order = jackknife(n, |sel| avg(sel, &|u| Some(u.order))).expect("non-empty");
    let energy = jackknife(n, |sel| avg(sel, &|u| Some(u.energy))).expect("non-empty");
    let chi = jackknife(n, |sel| avg(sel, &|u| Some(u.m2))).expect("non-empty");
    let (b3, binder) = match mode {
        Averaging::PerSample => (
            jackknife(n, |sel| {
                avg(sel, &|u| (u.m2 > 0.0).then(|| u.m3 / u.m2.powf(1.5)))
            }),
            jackknife(n, |sel| {
                avg(sel, &|u| (u.raw2 > 0.0).then(|| 1.0 - u.raw4 / (3.0 * u.raw2 * u.raw2)))
            }),
        ),
        Averaging::RatioOfAverages => (
            jackknife(n, |sel| {
                let m2 = avg(sel, &|u| Some(u.m2))?;
                let m3 = avg(sel, &|u| Some(u.m3))?;
                (m2 > 0.0).then(|| m3 / m2.powf(1.5))
            }),
            jackknife(n, |sel| {
                let r2 = avg(sel, &|u| Some(u.raw2))?;
                let r4 = avg(sel, &|u| Some(u.raw4))?;
                (r2 > 0.0).then(|| 1.0 - r4 / (3.0 * r2 * r2))
            }),
        ),
    };
    let b3_samples = units.iter().filter(|u| u.m2 > 0.0).count();
    Ok(DisorderAverage {
        temperature,
        samples: series.len(),
        order,
        chi,
        b3,
        b3_samples,
        binder,
        energy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{Init, SpinId};
    use approx::assert_abs_diff_eq;

    #[test]
    fn polyakov_fixtures() {
        let mut s = LatticeState::new(4, 3, 1, Init::AllPlus).unwrap();
        assert_eq!(mean_abs_polyakov(&s, Sublattice::Sigma).unwrap(), 1.0);
        let idx = s.index(SpinId::new([1, 2, 3], Direction::T, Sublattice::Sigma)).unwrap();
        s.flip(idx);
        assert_abs_diff_eq!(mean_abs_polyakov(&s, Sublattice::Sigma).unwrap(), 0.875);
        // Space-like links do not enter.
        let idx = s.index(SpinId::new([0, 0, 0], Direction::X, Sublattice::Sigma)).unwrap();
        s.flip(idx);
        assert_abs_diff_eq!(mean_abs_polyakov(&s, Sublattice::Sigma).unwrap(), 0.875);
        let planar = LatticeState::new(4, 2, 1, Init::AllPlus).unwrap();
        assert!(mean_abs_polyakov(&planar, Sublattice::Sigma).is_err());
    }

    #[test]
    fn magnetization_fixtures() {
        let mut s = LatticeState::new(4, 2, 1, Init::AllPlus).unwrap();
        assert_eq!(magnetization_2d(&s, Sublattice::Sigma).unwrap(), 1.0);
        for n in 0..8 {
            s.flip(n);
        }
        assert_eq!(magnetization_2d(&s, Sublattice::Sigma).unwrap(), 0.0);
        let mut g = LatticeState::new(4, 2, 1, Init::Random(3)).unwrap();
        let m = magnetization_2d(&g, Sublattice::Sigma).unwrap();
        for n in 0..16 {
            g.flip(n);
        }
        assert_eq!(magnetization_2d(&g, Sublattice::Sigma).unwrap(), m);
    }

    #[test]
    fn moment_fixtures() {
        assert_eq!(susceptibility(&[0.3, 0.3, 0.3]).unwrap(), 0.0);
        assert_abs_diff_eq!(susceptibility(&[0.2, 0.4]).unwrap(), 0.01, epsilon = 1e-15);
        assert!(susceptibility(&[0.2]).is_err());
        let v = [0.1, 0.5, 0.2, 0.9];
        let c = 3.0;
        let scaled: Vec<f64> = v.iter().map(|x| x * c).collect();
        assert_abs_diff_eq!(
            susceptibility(&scaled).unwrap(),
            c * c * susceptibility(&v).unwrap(),
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(cumulant_b3(&[0.2, 0.4, 0.2, 0.4]).unwrap(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(cumulant_b3(&[0.0, 0.0, 0.3]).unwrap(), 0.707_11, epsilon = 5e-6);
        assert_abs_diff_eq!(cumulant_b3(&[0.0, 0.0, 0.3]).unwrap(), 0.5f64.sqrt(), epsilon = 1e-12);
        assert!(matches!(cumulant_b3(&[0.5; 5]), Err(Error::Undefined(_))));
        assert!(cumulant_b3(&[0.2, 0.4]).is_err());
    }

    #[test]
    fn binder_limits() {
        assert_abs_diff_eq!(binder_cumulant(&[1.0; 10]).unwrap(), 2.0 / 3.0, epsilon = 1e-14);
    }

    #[test]
    fn jackknife_of_mean_is_standard_error() {
        let v = [1.0, 2.0, 4.0, 7.0];
        let est = jackknife(v.len(), |sel| Some(sel.iter().map(|&i| v[i]).sum::<f64>() / sel.len() as f64)).unwrap();
        let m = 3.5;
        let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 3.0;
        assert_abs_diff_eq!(est.value, m);
        assert_abs_diff_eq!(est.error, (var / 4.0).sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn disorder_average_modes() {
        let a = ObservableSeries {
            sample: 0,
            temperature: 1.0,
            order: vec![0.0, 0.0, 0.3],
            energy: vec![-1.0, -2.0, -3.0],
        };
        let b = ObservableSeries {
            sample: 1,
            temperature: 1.0,
            order: vec![0.5, 0.5, 0.5],
            energy: vec![-1.0, -1.0, -1.0],
        };
        let avg = disorder_average(&[&a, &b], Averaging::PerSample).unwrap();
        assert_abs_diff_eq!(avg.b3.unwrap().value, 0.5f64.sqrt(), epsilon = 1e-12);
        assert_eq!(avg.b3_samples, 1);
        assert_abs_diff_eq!(avg.energy.value, -1.5, epsilon = 1e-12);
        assert_abs_diff_eq!(avg.chi.value, 0.01, epsilon = 1e-12);
        let ratio = disorder_average(&[&a, &b], Averaging::RatioOfAverages).unwrap();
        assert_abs_diff_eq!(ratio.b3.unwrap().value, 0.001 / 0.01f64.powf(1.5), epsilon = 1e-12);
    }
}
