//! Transition temperatures from finite-size curves, their infinite-volume
//! extrapolation, and the threshold verdict against the Nishimori line.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::model::ModelKind;
use crate::noise::{CouplingSet, NoiseRates};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub t: f64,
    pub value: f64,
    pub error: f64,
}

impl CurvePoint {
    pub fn new(t: f64, value: f64, error: f64) -> Self {
        CurvePoint { t, value, error }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    B3Zero,
    ChiPeak,
    Crossing,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionEstimate {
    pub method: Method,
    pub temperature: f64,
    pub uncertainty: f64,
    pub size: Option<usize>,
    /// χ maximum sits on the first or last point, so no vertex was fitted.
    pub boundary: bool,
    /// More than one sign change was found; the hottest one is reported.
    pub multiple_crossings: bool,
}

impl TransitionEstimate {
    pub fn with_size(mut self, size: usize) -> Self {
        self.size = Some(size);
        self
    }
}

fn sorted_descending(points: &[CurvePoint]) -> Vec<CurvePoint> {
    let mut p = points.to_vec();
    p.sort_by(|a, b| b.t.partial_cmp(&a.t).unwrap_or(std::cmp::Ordering::Equal));
    p
}

/// Highest-temperature sign change of `value`, scanning from hot to cold,
/// located by linear interpolation. `None` if the curve never changes sign.
pub fn find_b3_zero_crossing(points: &[CurvePoint]) -> Result<Option<TransitionEstimate>> {
    find_zero(points, Method::B3Zero)
}

fn find_zero(points: &[CurvePoint], method: Method) -> Result<Option<TransitionEstimate>> {
    if points.len() < 2 {
        return Err(domain("a crossing needs at least 2 points"));
    }
    if points.iter().any(|p| !p.t.is_finite() || !p.value.is_finite()) {
        return Err(domain("curve contains non-finite points"));
    }
    let p = sorted_descending(points);
    let mut found: Option<TransitionEstimate> = None;
    let mut crossings = 0;
    for (n, w) in p.windows(2).enumerate() {
        let (hi, lo) = (w[0], w[1]);
        // A point sitting exactly on zero is counted once, on the pair where
        // it is the colder end (or the hotter end for the hottest point).
        let change = hi.value * lo.value < 0.0
            || (lo.value == 0.0 && hi.value != 0.0)
            || (n == 0 && hi.value == 0.0 && lo.value != 0.0);
        if !change {
            continue;
        }
        crossings += 1;
        if found.is_some() {
            continue;
        }
        let (t1, b1, s1) = (lo.t, lo.value, lo.error);
        let (t2, b2, s2) = (hi.t, hi.value, hi.error);
        let d = b2 - b1;
        let tc = (t1 * b2 - t2 * b1) / d;
        let g1 = b2 * (t1 - t2) / (d * d);
        let g2 = b1 * (t2 - t1) / (d * d);
        let unc = ((g1 * s1).powi(2) + (g2 * s2).powi(2)).sqrt();
        found = Some(TransitionEstimate {
            method,
            temperature: tc,
            uncertainty: unc,
            size: None,
            boundary: false,
            multiple_crossings: false,
        });
    }
    if let Some(est) = found.as_mut() {
        est.multiple_crossings = crossings > 1;
        if est.multiple_crossings {
            log::warn!(
                "{crossings} sign changes found; reporting the hottest at T = {:.4}",
                est.temperature
            );
        }
    }
    Ok(found)
}

/// Crossing of two curves sampled at the same temperatures (for example the
/// Binder cumulants of two sizes).
pub fn find_curve_crossing(a: &[CurvePoint], b: &[CurvePoint]) -> Result<Option<TransitionEstimate>> {
    if a.len() != b.len() {
        return Err(domain("curves have different lengths"));
    }
    let mut diff = Vec::with_capacity(a.len());
    for (x, y) in a.iter().zip(b) {
        if (x.t - y.t).abs() > 1e-9 * x.t.abs().max(1.0) {
            return Err(domain("curves are sampled at different temperatures"));
        }
        diff.push(CurvePoint::new(
            x.t,
            x.value - y.value,
            (x.error * x.error + y.error * y.error).sqrt(),
        ));
    }
    find_zero(&diff, Method::Crossing)
}

fn parabola_vertex(x: [f64; 3], y: [f64; 3]) -> f64 {
    let denom = (x[0] - x[1]) * (x[0] - x[2]) * (x[1] - x[2]);
    let a = (x[2] * (y[1] - y[0]) + x[1] * (y[0] - y[2]) + x[0] * (y[2] - y[1])) / denom;
    let b = (x[2] * x[2] * (y[0] - y[1]) + x[1] * x[1] * (y[2] - y[0]) + x[0] * x[0] * (y[1] - y[2])) / denom;
    -b / (2.0 * a)
}

/// Peak of χ from the parabola through the maximum and its two neighbours.
pub fn find_chi_peak(points: &[CurvePoint]) -> Result<TransitionEstimate> {
    if points.len() < 3 {
        return Err(domain("a peak fit needs at least 3 points"));
    }
    let mut p = points.to_vec();
    p.sort_by(|a, b| a.t.partial_cmp(&b.t).unwrap_or(std::cmp::Ordering::Equal));
    let m = p
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.value.partial_cmp(&b.1.value).unwrap_or(std::cmp::Ordering::Equal))
        .map(|(i, _)| i)
        .expect("non-empty");
    if m == 0 || m == p.len() - 1 {
        let spacing = if m == 0 { p[1].t - p[0].t } else { p[m].t - p[m - 1].t };
        return Ok(TransitionEstimate {
            method: Method::ChiPeak,
            temperature: p[m].t,
            uncertainty: spacing.abs(),
            size: None,
            boundary: true,
            multiple_crossings: false,
        });
    }
    let x = [p[m - 1].t, p[m].t, p[m + 1].t];
    let y = [p[m - 1].value, p[m].value, p[m + 1].value];
    let t = parabola_vertex(x, y);
    let mut var = 0.0;
    for k in 0..3 {
        let e = p[m - 1 + k].error;
        if e > 0.0 {
            let h = 1e-6 * y.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1e-12);
            let mut yp = y;
            yp[k] += h;
            let mut ym = y;
            ym[k] -= h;
            let g = (parabola_vertex(x, yp) - parabola_vertex(x, ym)) / (2.0 * h);
            var += (g * e).powi(2);
        }
    }
    Ok(TransitionEstimate {
        method: Method::ChiPeak,
        temperature: t,
        uncertainty: var.sqrt(),
        size: None,
        boundary: false,
        multiple_crossings: false,
    })
}

/// Whether two estimates of the same transition agree within their combined
/// uncertainty.
pub fn estimates_agree(a: &TransitionEstimate, b: &TransitionEstimate) -> bool {
    let u = (a.uncertainty.powi(2) + b.uncertainty.powi(2)).sqrt();
    (a.temperature - b.temperature).abs() <= u
}

/// T_c(L) = a L^{-b} + T_c.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub a: f64,
    pub b: f64,
    pub tc: f64,
    pub residual: f64,
    pub a_err: f64,
    pub b_err: f64,
    pub tc_err: f64,
    /// The exponent ended on the edge of the search bracket.
    pub at_bracket_edge: bool,
}

pub const B_BRACKET: (f64, f64) = (0.1, 5.0);
const GOLDEN_TOL: f64 = 1e-6;

struct Data<'a> {
    l: &'a [f64],
    y: &'a [f64],
    w: Vec<f64>,
}

impl Data<'_> {
    /// Weighted linear least squares in (a, T_c) at fixed b.
    fn linear(&self, b: f64) -> (f64, f64, f64) {
        let x: Vec<f64> = self.l.iter().map(|l| l.powf(-b)).collect();
        let (mut sw, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for i in 0..x.len() {
            let w = self.w[i];
            sw += w;
            sx += w * x[i];
            sy += w * self.y[i];
            sxx += w * x[i] * x[i];
            sxy += w * x[i] * self.y[i];
        }
        let det = sw * sxx - sx * sx;
        let (a, c) = if det.abs() <= 1e-300 {
            (0.0, sy / sw)
        } else {
            ((sw * sxy - sx * sy) / det, (sxx * sy - sx * sxy) / det)
        };
        let res = (0..x.len())
            .map(|i| self.w[i] * (self.y[i] - a * x[i] - c).powi(2))
            .sum();
        (a, c, res)
    }

    /// GᵀG and Gᵀr for the weighted residuals r, with G = -∂r/∂(a, b, T_c).
    fn normal_equations(&self, a: f64, b: f64, c: f64) -> ([[f64; 3]; 3], [f64; 3]) {
        let mut gtg = [[0.0; 3]; 3];
        let mut gtr = [0.0; 3];
        for i in 0..self.l.len() {
            let x = self.l[i].powf(-b);
            let sw = self.w[i].sqrt();
            let row = [sw * x, -sw * a * x * self.l[i].ln(), sw];
            let r = sw * (self.y[i] - a * x - c);
            for p in 0..3 {
                gtr[p] += row[p] * r;
                for q in 0..3 {
                    gtg[p][q] += row[p] * row[q];
                }
            }
        }
        (gtg, gtr)
    }
}

fn invert3(m: [[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    let scale = m.iter().flatten().map(|v| v.abs()).fold(0.0, f64::max);
    if det.abs() <= 1e-14 * scale.powi(3) || !det.is_finite() {
        return None;
    }
    let mut inv = [[0.0; 3]; 3];
    for (r, row) in inv.iter_mut().enumerate() {
        for (c, v) in row.iter_mut().enumerate() {
            let (r1, r2) = ((c + 1) % 3, (c + 2) % 3);
            let (c1, c2) = ((r + 1) % 3, (r + 2) % 3);
            *v = (m[r1][c1] * m[r2][c2] - m[r1][c2] * m[r2][c1]) / det;
        }
    }
    Some(inv)
}

/// Fit T_c(L) = a L^{-b} + T_c: linear least squares in (a, T_c) for each b,
/// golden-section search over b on [0.1, 5] after a coarse scan. With
/// `errors` the fit is weighted by 1/σ² and parameter errors are taken from
/// the unscaled covariance; without them the covariance is scaled by the
/// residual variance.
pub fn fit_finite_size(sizes: &[f64], tc: &[f64], errors: Option<&[f64]>) -> Result<ScalingFit> {
    if sizes.len() != tc.len() || errors.is_some_and(|e| e.len() != sizes.len()) {
        return Err(domain("sizes, estimates and errors must have equal length"));
    }
    let mut distinct: Vec<f64> = sizes.to_vec();
    distinct.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(domain(format!(
            "finite-size fit needs at least 3 distinct sizes, got {}",
            distinct.len()
        )));
    }
    if sizes.iter().any(|&l| !(l > 0.0)) || tc.iter().any(|v| !v.is_finite()) {
        return Err(domain("sizes must be positive and estimates finite"));
    }
    let w: Vec<f64> = match errors {
        Some(e) => {
            if e.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
                return Err(domain("fit errors must be positive and finite"));
            }
            e.iter().map(|s| 1.0 / (s * s)).collect()
        }
        None => vec![1.0; sizes.len()],
    };
    let data = Data { l: sizes, y: tc, w };
    let f = |b: f64| data.linear(b).2;

    let (lo, hi) = B_BRACKET;
    let grid = 60;
    let mut best = 0;
    let mut best_val = f64::INFINITY;
    for k in 0..=grid {
        let b = lo + (hi - lo) * k as f64 / grid as f64;
        let v = f(b);
        if v < best_val {
            best_val = v;
            best = k;
        }
    }
    let step = (hi - lo) / grid as f64;
    let mut x0 = (lo + step * (best as f64 - 1.0)).max(lo);
    let mut x3 = (lo + step * (best as f64 + 1.0)).min(hi);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = x3 - g * (x3 - x0);
    let mut x2 = x0 + g * (x3 - x0);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while (x3 - x0).abs() > GOLDEN_TOL {
        if f1 <= f2 {
            x3 = x2;
            x2 = x1;
            f2 = f1;
            x1 = x3 - g * (x3 - x0);
            f1 = f(x1);
        } else {
            x0 = x1;
            x1 = x2;
            f1 = f2;
            x2 = x0 + g * (x3 - x0);
            f2 = f(x2);
        }
    }
    let mut b = 0.5 * (x0 + x3);
    for edge in [lo, hi] {
        if f(edge) < f(b) {
            b = edge;
        }
    }
    // Gauss-Newton on (a, b, T_c) from the golden-section optimum.
    for _ in 0..20 {
        let (a, c, res) = data.linear(b);
        let (gtg, gtr) = data.normal_equations(a, b, c);
        let Some(inv) = invert3(gtg) else { break };
        let step: f64 = (0..3).map(|s| inv[1][s] * gtr[s]).sum();
        let next = (b + step).clamp(lo, hi);
        if !(f(next) < res) || step.abs() <= 1e-15 * b.abs().max(1.0) {
            break;
        }
        b = next;
    }
    let (a, c, residual) = data.linear(b);
    let at_bracket_edge = (b - lo).abs() < 10.0 * GOLDEN_TOL || (hi - b).abs() < 10.0 * GOLDEN_TOL;

    let n = sizes.len();
    let (jtj, _) = data.normal_equations(a, b, c);
    let scale = if errors.is_some() {
        1.0
    } else if n > 3 {
        residual / (n - 3) as f64
    } else {
        f64::NAN
    };
    let (a_err, b_err, tc_err) = match invert3(jtj) {
        Some(inv) => (
            (inv[0][0] * scale).sqrt(),
            (inv[1][1] * scale).sqrt(),
            (inv[2][2] * scale).sqrt(),
        ),
        None => {
            // The exponent is unidentifiable when a vanishes; fall back to
            // the two-parameter covariance.
            let det = jtj[0][0] * jtj[2][2] - jtj[0][2] * jtj[2][0];
            if det.abs() > 0.0 {
                (
                    (jtj[2][2] / det * scale).sqrt(),
                    f64::INFINITY,
                    (jtj[0][0] / det * scale).sqrt(),
                )
            } else {
                (f64::INFINITY, f64::INFINITY, f64::INFINITY)
            }
        }
    };
    Ok(ScalingFit {
        a,
        b,
        tc: c,
        residual,
        a_err,
        b_err,
        tc_err,
        at_bracket_edge,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Convention {
    Normalized,
    Unnormalized,
}

/// Nishimori temperature: 1 in the unnormalized convention, 1/J_x(X) in the
/// normalized one (4/ln(3(1-p)/p) for symmetric depolarizing noise).
pub fn nishimori_temperature(kind: ModelKind, rates: &NoiseRates, convention: Convention) -> Result<f64> {
    rates.validate()?;
    match convention {
        Convention::Unnormalized => Ok(1.0),
        Convention::Normalized => {
            let jx = CouplingSet::from_rates(kind, rates)?.jx_x;
            if !(jx > 0.0 && jx.is_finite()) {
                return Err(domain(format!("Nishimori temperature undefined for J_x(X) = {jx}")));
            }
            Ok(1.0 / jx)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    /// T_c(∞) lies above the Nishimori temperature: correctable.
    Below,
    /// No limiting transition: above threshold.
    Above,
    Inconclusive,
}

/// Compare the extrapolated transition with the Nishimori temperature.
pub fn threshold_verdict(fit: Option<&ScalingFit>, t_nishimori: f64) -> Verdict {
    let Some(fit) = fit else {
        return Verdict::Above;
    };
    if fit.tc <= 0.0 || (fit.at_bracket_edge && fit.tc < t_nishimori) {
        return Verdict::Above;
    }
    let err = if fit.tc_err.is_finite() { fit.tc_err } else { f64::INFINITY };
    if fit.tc - err > t_nishimori {
        Verdict::Below
    } else {
        Verdict::Inconclusive
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn curve(v: &[(f64, f64)]) -> Vec<CurvePoint> {
        v.iter().map(|&(t, b)| CurvePoint::new(t, b, 0.01)).collect()
    }

    #[test]
    fn b3_crossings() {
        let e = find_b3_zero_crossing(&curve(&[(1.0, -0.5), (1.2, 0.5)])).unwrap().unwrap();
        assert_abs_diff_eq!(e.temperature, 1.1, epsilon = 1e-12);
        let e = find_b3_zero_crossing(&curve(&[(1.0, -0.2), (1.2, 0.6)])).unwrap().unwrap();
        assert_abs_diff_eq!(e.temperature, 1.05, epsilon = 1e-12);
        assert!(find_b3_zero_crossing(&curve(&[(1.0, 0.2), (1.2, 0.6), (1.4, 0.1)]))
            .unwrap()
            .is_none());
        assert!(find_b3_zero_crossing(&curve(&[(1.0, 0.2)])).is_err());
    }

    #[test]
    fn hottest_crossing_wins() {
        let c = curve(&[(1.0, 0.3), (1.1, -0.1), (1.2, -0.4), (1.3, 0.2), (1.4, 0.5)]);
        let e = find_b3_zero_crossing(&c).unwrap().unwrap();
        assert!(e.multiple_crossings);
        assert_abs_diff_eq!(e.temperature, 1.2 + 0.1 * 0.4 / 0.6, epsilon = 1e-12);
    }

    #[test]
    fn crossing_error_propagation() {
        let pts = [CurvePoint::new(1.0, -0.2, 0.05), CurvePoint::new(1.2, 0.6, 0.02)];
        let e = find_b3_zero_crossing(&pts).unwrap().unwrap();
        let tc = |b1: f64, b2: f64| (1.0 * b2 - 1.2 * b1) / (b2 - b1);
        let h = 1e-7;
        let g1 = (tc(-0.2 + h, 0.6) - tc(-0.2 - h, 0.6)) / (2.0 * h);
        let g2 = (tc(-0.2, 0.6 + h) - tc(-0.2, 0.6 - h)) / (2.0 * h);
        assert_abs_diff_eq!(
            e.uncertainty,
            ((g1 * 0.05).powi(2) + (g2 * 0.02).powi(2)).sqrt(),
            epsilon = 1e-7
        );
    }

    #[test]
    fn chi_peaks() {
        let e = find_chi_peak(&curve(&[(1.0, 1.0), (2.0, 3.0), (3.0, 1.0)])).unwrap();
        assert_abs_diff_eq!(e.temperature, 2.0, epsilon = 1e-12);
        assert!(!e.boundary);
        let e = find_chi_peak(&curve(&[(1.0, 1.0), (2.0, 2.0), (3.0, 3.0)])).unwrap();
        assert!(e.boundary);
        // Parabola through (1,1), (2,3), (3,2): -1.5 T² + 6.5 T - 4.
        let e = find_chi_peak(&curve(&[(1.0, 1.0), (2.0, 3.0), (3.0, 2.0)])).unwrap();
        assert_abs_diff_eq!(e.temperature, 13.0 / 6.0, epsilon = 1e-12);
    }

    #[test]
    fn noiseless_fit_is_exact() {
        let l = [8.0, 12.0, 16.0, 20.0, 24.0];
        let y: Vec<f64> = l.iter().map(|x: &f64| 0.5 * x.powf(-1.0) + 1.2).collect();
        let f = fit_finite_size(&l, &y, None).unwrap();
        assert_abs_diff_eq!(f.a, 0.5, epsilon = 1e-6);
        assert_abs_diff_eq!(f.b, 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(f.tc, 1.2, epsilon = 1e-6);
        assert!(f.residual < 1e-10);
    }

    #[test]
    fn constant_fit() {
        let l = [8.0, 12.0, 16.0];
        let f = fit_finite_size(&l, &[1.5, 1.5, 1.5], None).unwrap();
        assert_abs_diff_eq!(f.a, 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(f.tc, 1.5, epsilon = 1e-9);
        assert!(fit_finite_size(&[8.0, 8.0, 8.0], &[1.0, 1.1, 1.2], None).is_err());
    }

    #[test]
    fn nishimori_lines() {
        let r = NoiseRates::symmetric(0.06);
        assert_eq!(nishimori_temperature(ModelKind::Rcpgm, &r, Convention::Unnormalized).unwrap(), 1.0);
        let t = nishimori_temperature(ModelKind::Rcpgm, &r, Convention::Normalized).unwrap();
        assert_abs_diff_eq!(t, 4.0 / 47f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(t, 1.0389, epsilon = 5e-5);
        assert!(nishimori_temperature(ModelKind::Rcpgm, &NoiseRates::symmetric(0.75), Convention::Normalized).is_err());
    }

    #[test]
    fn verdicts() {
        let fit = |tc: f64, err: f64| ScalingFit {
            a: 1.0,
            b: 1.0,
            tc,
            residual: 0.0,
            a_err: 0.1,
            b_err: 0.1,
            tc_err: err,
            at_bracket_edge: false,
        };
        assert_eq!(threshold_verdict(Some(&fit(1.2, 0.02)), 1.0), Verdict::Below);
        assert_eq!(threshold_verdict(None, 1.0), Verdict::Above);
        assert_eq!(threshold_verdict(Some(&fit(0.02, 0.05)), 1.0), Verdict::Inconclusive);
        assert_eq!(threshold_verdict(Some(&fit(-0.1, 0.05)), 1.0), Verdict::Above);
        assert_eq!(threshold_verdict(Some(&fit(1.01, 0.05)), 1.0), Verdict::Inconclusive);
    }

    #[test]
    fn curve_crossing() {
        let a = curve(&[(1.0, 0.6), (2.0, 0.4)]);
        let b = curve(&[(1.0, 0.5), (2.0, 0.5)]);
        let e = find_curve_crossing(&a, &b).unwrap().unwrap();
        assert_abs_diff_eq!(e.temperature, 1.5, epsilon = 1e-12);
    }
}
