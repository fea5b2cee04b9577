//! Functional calculus on eigensystems: `F_{t,λ}`, heat factors, spectral
//! projectors, resolvents, and the decay bounds built from them.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponents::mass_cap;
use crate::geometry::{euclid_dist, sup_dist};
use crate::operator::FiniteHamiltonian;
use crate::spectral::{spacing_threshold, EnergyInterval, Eigensystem};

/// Relative slack allowed for pure round-off in bound comparisons.
pub const BOUND_SLACK: f64 = 1e-9;

/// Resolvents closer than this to the spectrum are refused.
pub const SINGULAR_GAP: f64 = 1e-14;

/// Energies within this distance of the spectrum are excluded from reports.
pub const EXCLUDED_GAP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoundId {
    #[serde(rename = "CT-3.7")]
    CombesThomasEta,
    #[serde(rename = "CT-3.9")]
    CombesThomas,
    #[serde(rename = "heat-3.20")]
    HeatTail,
    #[serde(rename = "green-6.2")]
    Regular,
    #[serde(rename = "green-6.20")]
    GreenDecay,
    #[serde(rename = "split-6.9")]
    Splitting,
    /// Eigenfunctions of a buffered subset on its buffer interior.
    #[serde(rename = "buffer-3.76")]
    BufferInterior,
    /// Parent eigenfunctions inside a buffered subset.
    #[serde(rename = "buffer-3.84")]
    BufferedParent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundPair {
    pub x: Vec<i64>,
    pub y: Vec<i64>,
    pub computed: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub bound_id: BoundId,
    pub pairs: Vec<BoundPair>,
    /// Pairs skipped because the energy sits too close to the spectrum.
    pub excluded: usize,
}

impl BoundReport {
    pub fn new(bound_id: BoundId) -> Self {
        Self {
            bound_id,
            pairs: Vec::new(),
            excluded: 0,
        }
    }

    /// Appends a pair judged with the common relative slack.
    pub fn push(&mut self, x: &[i64], y: &[i64], computed: f64, bound: f64) {
        self.pairs.push(BoundPair {
            x: x.to_vec(),
            y: y.to_vec(),
            computed,
            bound,
            pass: computed <= bound * (1.0 + BOUND_SLACK),
        });
    }

    pub fn all_pass(&self) -> bool {
        self.pairs.iter().all(|p| p.pass)
    }

    pub fn failures(&self) -> usize {
        self.pairs.iter().filter(|p| !p.pass).count()
    }

    /// Largest `computed / bound`; zero for an empty report.
    pub fn worst_ratio(&self) -> f64 {
        self.pairs
            .iter()
            .map(|p| {
                if p.bound > 0.0 {
                    p.computed / p.bound
                } else if p.computed > 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                }
            })
            .fold(0.0, f64::max)
    }

    pub fn summary(&self) -> BoundSummary {
        BoundSummary {
            bound_id: self.bound_id,
            pairs: self.pairs.len(),
            failures: self.failures(),
            excluded: self.excluded,
            // Kept finite so records stay valid JSON.
            worst_ratio: self.worst_ratio().min(f64::MAX),
        }
    }
}

/// Compact view of a report for per-trial records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundSummary {
    pub bound_id: BoundId,
    pub pairs: usize,
    pub failures: usize,
    pub excluded: usize,
    pub worst_ratio: f64,
}

impl BoundSummary {
    pub fn empty(bound_id: BoundId) -> Self {
        Self {
            bound_id,
            pairs: 0,
            failures: 0,
            excluded: 0,
            worst_ratio: 0.0,
        }
    }

    /// Folds another summary of the same bound into this one.
    pub fn absorb(&mut self, other: &BoundSummary) {
        debug_assert_eq!(self.bound_id, other.bound_id);
        self.pairs += other.pairs;
        self.failures += other.failures;
        self.excluded += other.excluded;
        self.worst_ratio = self.worst_ratio.max(other.worst_ratio);
    }
}

/// `Q f(Λ) Qᵀ`.
pub fn apply_spectral_function(es: &Eigensystem, f: impl Fn(f64) -> f64) -> Result<DMatrix<f64>> {
    let vals: Vec<f64> = es.eigenvalues.iter().map(|&e| f(e)).collect();
    if let Some(k) = vals.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteFunction(es.eigenvalues[k]));
    }
    Ok(weighted_gram(es, &vals))
}

fn weighted_gram(es: &Eigensystem, w: &[f64]) -> DMatrix<f64> {
    let q = &es.vectors;
    let mut scaled = q.clone();
    for (j, &wj) in w.iter().enumerate() {
        scaled.column_mut(j).scale_mut(wj);
    }
    scaled * q.transpose()
}

/// `(1 − e^{−u})/u`, with value one at `u = 0`.
fn phi1(u: f64) -> f64 {
    if u.abs() < 1e-8 {
        1.0 - u / 2.0 + u * u / 6.0
    } else {
        -(-u).exp_m1() / u
    }
}

/// `F_{t,λ}(z) = (1 − e^{−t(z² − λ²)})/(z − λ)`, `F_{t,λ}(λ) = 2tλ`.
pub fn f_scalar(z: f64, t: f64, lambda: f64) -> f64 {
    let u = t * (z - lambda) * (z + lambda);
    t * (z + lambda) * phi1(u)
}

/// `F_{t,λ−E}(H − E)`.
pub fn f_t_lambda(es: &Eigensystem, t: f64, lambda: f64, e_shift: f64) -> Result<DMatrix<f64>> {
    if !(t > 0.0) {
        return Err(Error::param("t", "must be positive"));
    }
    let s = lambda - e_shift;
    apply_spectral_function(es, |z| f_scalar(z - e_shift, t, s))
}

/// `e^{−t((H − E)² − (λ − E)²)}`.
pub fn heat_factor(es: &Eigensystem, t: f64, lambda: f64, e_shift: f64) -> Result<DMatrix<f64>> {
    let s = lambda - e_shift;
    apply_spectral_function(es, |z| (-t * ((z - e_shift).powi(2) - s * s)).exp())
}

/// Spectral projector `χ_I(H)`.
pub fn projector(es: &Eigensystem, i: &EnergyInterval) -> DMatrix<f64> {
    let w: Vec<f64> = es
        .eigenvalues
        .iter()
        .map(|&e| if i.contains(e) { 1.0 } else { 0.0 })
        .collect();
    weighted_gram(es, &w)
}

/// Resolvent `(H − λ)^{−1}` from the eigensystem.
#[derive(Debug, Clone)]
pub struct Green {
    pub lambda: f64,
    pub matrix: DMatrix<f64>,
    /// `1 / dist(λ, σ(H))`.
    pub condition: f64,
}

pub fn green(es: &Eigensystem, lambda: f64) -> Result<Green> {
    let gap = es.dist_to_spectrum(lambda);
    if gap < SINGULAR_GAP * lambda.abs().max(1.0) {
        return Err(Error::SingularResolvent { energy: lambda, gap });
    }
    let matrix = apply_spectral_function(es, |z| 1.0 / (z - lambda))?;
    Ok(Green {
        lambda,
        matrix,
        condition: 1.0 / gap,
    })
}

/// `(H − λ)^{−1}` by LU factorization, independent of the eigensolver.
pub fn green_direct(h: &FiniteHamiltonian, lambda: f64) -> Result<DMatrix<f64>> {
    let shifted = h.shifted(lambda).matrix;
    let n = h.len();
    shifted
        .lu()
        .solve(&DMatrix::identity(n, n))
        .ok_or(Error::SingularResolvent {
            energy: lambda,
            gap: 0.0,
        })
}

fn check_cap(m: f64, i: &EnergyInterval, d: usize) -> Result<()> {
    let cap = mass_cap(i.half_width, d);
    if !(m > 0.0) || m > cap * (1.0 + 1e-12) {
        return Err(Error::MassAboveCap { mass: m, cap });
    }
    Ok(())
}

/// Combes–Thomas bounds for `F_{t,λ−E}(H − E)` with `t = m|x−y|/A²` per pair.
/// Returns the explicit bound `70 A^{−1} e^{−m h_I(λ)|x−y|}` and the general
/// form evaluated at `η = A`. Distances are Euclidean.
pub fn check_combes_thomas(
    es: &Eigensystem,
    lambda: f64,
    interval: &EnergyInterval,
    m: f64,
) -> Result<(BoundReport, BoundReport)> {
    if !interval.contains(lambda) {
        return Err(Error::param("lambda", "must lie in I"));
    }
    let d = es.region.dim();
    check_cap(m, interval, d)?;
    let a = interval.half_width;
    let e = interval.center;
    let s = lambda - e;
    let h = interval.h(lambda);
    let decay = (1.0 + a / (4.0 * d as f64)).ln();
    let n = es.len();
    let shifted: Vec<f64> = es.eigenvalues.iter().map(|&z| z - e).collect();
    let mut explicit = BoundReport::new(BoundId::CombesThomas);
    let mut general = BoundReport::new(BoundId::CombesThomasEta);
    let sites = es.region.sites();
    let mut weights = vec![0.0; n];
    for xi in 0..n {
        for yi in 0..n {
            if xi == yi {
                continue;
            }
            let dist = euclid_dist(&sites[xi], &sites[yi]);
            let t = m * dist / (a * a);
            for (w, &z) in weights.iter_mut().zip(&shifted) {
                *w = f_scalar(z, t, s);
            }
            let val: f64 = (0..n)
                .map(|k| weights[k] * es.vectors[(xi, k)] * es.vectors[(yi, k)])
                .sum::<f64>()
                .abs();
            explicit.push(&sites[xi], &sites[yi], val, 70.0 / a * (-m * h * dist).exp());
            let eta2 = a * a + s * s;
            let b = 70.0 / eta2.sqrt() * (t * eta2 - decay * dist).exp();
            general.push(&sites[xi], &sites[yi], val, b);
        }
    }
    Ok((explicit, general))
}

/// `‖e^{−t((H−E)² − (λ−E)²)} χ_{R∖I}(H)‖ ≤ e^{−tA²h_I(λ)}`.
pub fn check_heat_tail(es: &Eigensystem, t: f64, lambda: f64, interval: &EnergyInterval) -> Result<BoundReport> {
    if !(t > 0.0) {
        return Err(Error::param("t", "must be positive"));
    }
    if !interval.contains(lambda) {
        return Err(Error::param("lambda", "must lie in I"));
    }
    let e = interval.center;
    let a = interval.half_width;
    let s = lambda - e;
    let norm = es
        .eigenvalues
        .iter()
        .filter(|&&mu| !interval.contains(mu))
        .map(|&mu| (-t * ((mu - e).powi(2) - s * s)).exp())
        .fold(0.0, f64::max);
    // `A²h_I(λ) = A² − (λ−E)²`; this form makes the boundary case exact.
    let bound = (-t * (a * a - s * s)).exp();
    let mut rep = BoundReport::new(BoundId::HeatTail);
    let origin = vec![0; es.region.dim()];
    rep.push(&origin, &origin, norm, bound);
    Ok(rep)
}

/// `|G(E; x, y)| ≤ e^{−m‖x−y‖}` for all pairs with `‖x−y‖ ≥ L/100`.
pub fn regular_report(es: &Eigensystem, energy: f64, m: f64, l: f64) -> Result<BoundReport> {
    let g = green(es, energy)?;
    let mut rep = BoundReport::new(BoundId::Regular);
    let sites = es.region.sites();
    let min_dist = l / 100.0;
    for (i, x) in sites.iter().enumerate() {
        for (j, y) in sites.iter().enumerate() {
            let dist = sup_dist(x, y) as f64;
            if dist >= min_dist {
                rep.push(x, y, g.matrix[(i, j)].abs(), (-m * dist).exp());
            }
        }
    }
    Ok(rep)
}

/// `(m, E)`-regularity of the box.
pub fn check_regular(es: &Eigensystem, energy: f64, m: f64, l: f64) -> Result<bool> {
    Ok(regular_report(es, energy, m, l)?.all_pass())
}

/// Hypotheses and parameters for [`check_green_decay`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreenDecaySetup {
    pub interval: EnergyInterval,
    /// `I_L`, where `λ` is required to lie.
    pub shrunk: EnergyInterval,
    /// `m″`.
    pub rate: f64,
    pub beta: f64,
    pub side: f64,
    /// The box's localizing verdict.
    pub verdict_ok: bool,
    /// `t` used in the splitting identity.
    pub split_t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreenDecayReport {
    pub lambda: f64,
    pub lambda_in_shrunk: bool,
    pub gap_ok: bool,
    pub verdict_ok: bool,
    pub hypotheses_ok: bool,
    pub decay: BoundReport,
    pub split: BoundReport,
}

/// Regularity at rate `m″ h_I(λ)` together with the splitting identity
/// `G = F_{t,λ}(H) + (H − λ)^{−1} e^{−t(H² − λ²)}`.
pub fn check_green_decay(
    es: &Eigensystem,
    h: &FiniteHamiltonian,
    lambda: f64,
    s: &GreenDecaySetup,
) -> Result<GreenDecayReport> {
    let gap = es.dist_to_spectrum(lambda);
    let gap_ok = gap >= spacing_threshold(s.side, s.beta);
    let lambda_in_shrunk = s.shrunk.contains(lambda);
    let rate = s.rate * s.interval.h(lambda);
    let mut decay = BoundReport::new(BoundId::GreenDecay);
    let mut split = BoundReport::new(BoundId::Splitting);
    if gap < EXCLUDED_GAP {
        decay.excluded = es.len() * es.len();
        split.excluded = 1;
    } else {
        let reg = regular_report(es, lambda, rate, s.side)?;
        decay.pairs = reg.pairs;
        split = splitting_report(es, h, s.split_t, lambda, 0.0)?;
    }
    Ok(GreenDecayReport {
        lambda,
        lambda_in_shrunk,
        gap_ok,
        verdict_ok: s.verdict_ok,
        hypotheses_ok: lambda_in_shrunk && gap_ok && s.verdict_ok,
        decay,
        split,
    })
}

/// Entrywise comparison of the LU resolvent with the spectral splitting
/// `F_{t,λ−E}(H−E) + (H−λ)^{−1} e^{−t((H−E)² − (λ−E)²)}`. Tolerance
/// `1e−8 · max(1, ‖G‖_max)`.
pub fn splitting_report(
    es: &Eigensystem,
    h: &FiniteHamiltonian,
    t: f64,
    lambda: f64,
    e_shift: f64,
) -> Result<BoundReport> {
    let direct = green_direct(h, lambda)?;
    let f = f_t_lambda(es, t, lambda, e_shift)?;
    let s = lambda - e_shift;
    let tail = apply_spectral_function(es, |z| {
        (-t * ((z - e_shift).powi(2) - s * s)).exp() / (z - lambda)
    })?;
    let diff = (&direct - (f + tail)).amax();
    let tol = 1e-8 * direct.amax().max(1.0);
    let mut rep = BoundReport::new(BoundId::Splitting);
    let origin = vec![0; es.region.dim()];
    rep.pairs.push(BoundPair {
        x: origin.clone(),
        y: origin,
        computed: diff,
        bound: tol,
        pass: diff <= tol,
    });
    Ok(rep)
}

/// `λ` grid of `points` equally spaced interior points of `I`, dropping
/// those within `gap` of any listed spectrum.
pub fn energy_grid(i: &EnergyInterval, points: usize, spectra: &[&[f64]], gap: f64) -> (Vec<f64>, usize) {
    let mut kept = Vec::new();
    let mut dropped = 0;
    for k in 0..points {
        let lam = i.lo() + 2.0 * i.half_width * (k as f64 + 1.0) / (points as f64 + 1.0);
        let close = spectra
            .iter()
            .any(|sp| sp.iter().any(|&e| (e - lam).abs() < gap));
        if close {
            dropped += 1;
        } else {
            kept.push(lam);
        }
    }
    (kept, dropped)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::SiteSet;
    use crate::operator::{assemble, Potential};

    fn ham(v: Vec<f64>) -> FiniteHamiltonian {
        let r = SiteSet::segment(0, v.len() as i64 - 1);
        assemble(&r, &Potential::new(r.clone(), v).unwrap()).unwrap()
    }

    #[test]
    fn identity_and_constant() {
        let h = ham(vec![0.3, -1.0, 2.0, 0.5]);
        let es = Eigensystem::of(&h).unwrap();
        let id = apply_spectral_function(&es, |x| x).unwrap();
        assert!((id - &h.matrix).amax() < 1e-10);
        let one = apply_spectral_function(&es, |_| 1.0).unwrap();
        assert!((one - DMatrix::<f64>::identity(4, 4)).amax() < 1e-10);
        assert!(apply_spectral_function(&es, |x| 1.0 / (x - es.eigenvalues[0])).is_err());
    }

    #[test]
    fn square_of_two_site_hopping() {
        let es = Eigensystem::of(&ham(vec![0.0, 0.0])).unwrap();
        let sq = apply_spectral_function(&es, |x| x * x).unwrap();
        assert!((sq - DMatrix::<f64>::identity(2, 2)).amax() < 1e-14);
    }

    #[test]
    fn f_removable_point() {
        assert_eq!(f_scalar(3.0, 1.0, 3.0), 6.0);
        assert!(f_scalar(0.7, 1e-12, 0.2).abs() < 1e-9);
        let (z, t, l): (f64, f64, f64) = (1.3, 0.4, -0.6);
        let direct = (1.0 - (-t * (z * z - l * l)).exp()) / (z - l);
        assert!((f_scalar(z, t, l) - direct).abs() < 1e-14);
    }

    #[test]
    fn f_matches_closed_form_matrix() {
        let v: Vec<f64> = (0..20).map(|k| ((k * 37 % 20) as f64) / 4.0).collect();
        let h = ham(v);
        let es = Eigensystem::of(&h).unwrap();
        let (t, lam) = (0.3, 1.234);
        let f = f_t_lambda(&es, t, lam, 0.0).unwrap();
        let heat = heat_factor(&es, t, lam, 0.0).unwrap();
        let res = green_direct(&h, lam).unwrap();
        let alt = (DMatrix::<f64>::identity(20, 20) - heat) * res;
        assert!((f - alt).amax() < 1e-9);
    }

    #[test]
    fn green_examples() {
        let es = Eigensystem::of(&ham(vec![0.0, 0.0])).unwrap();
        let g = green(&es, 0.0).unwrap();
        let expect = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, -1.0, 0.0]);
        assert!((g.matrix - expect).amax() < 1e-14);
        let es = Eigensystem::of(&ham(vec![2.0])).unwrap();
        assert!((green(&es, 1.0).unwrap().matrix[(0, 0)] - 1.0).abs() < 1e-15);
        assert!(matches!(green(&es, 2.0), Err(Error::SingularResolvent { .. })));
    }

    #[test]
    fn heat_tail_cases() {
        let es = Eigensystem::of(&ham(vec![0.0])).unwrap();
        let i = EnergyInterval::new(0.0, 1.0).unwrap();
        let rep = check_heat_tail(&es, 1.0, 0.2, &i).unwrap();
        assert_eq!(rep.pairs[0].computed, 0.0);
        // Eigenvalue on the edge: equality.
        let es = Eigensystem::of(&ham(vec![1.0])).unwrap();
        let rep = check_heat_tail(&es, 0.7, 0.3, &i).unwrap();
        assert_eq!(rep.pairs[0].computed, rep.pairs[0].bound);
        assert!(rep.all_pass());
    }

    #[test]
    fn combes_thomas_rejects_large_mass() {
        let es = Eigensystem::of(&ham(vec![0.0, 1.0, 2.0])).unwrap();
        let i = EnergyInterval::new(1.0, 4.0).unwrap();
        let cap = mass_cap(4.0, 1);
        assert!(check_combes_thomas(&es, 1.0, &i, cap * 1.01).is_err());
        let (ct, _) = check_combes_thomas(&es, 1.0, &i, cap).unwrap();
        assert_eq!(ct.pairs.len(), 6);
        assert!(ct.pairs.iter().all(|p| p.x != p.y));
    }

    #[test]
    fn regular_trivial_cases() {
        let es = Eigensystem::of(&ham(vec![5.0, -3.0, 4.0])).unwrap();
        let g = green(&es, 0.1).unwrap();
        let all_small = g.matrix.iter().all(|v| v.abs() <= 1.0);
        assert_eq!(check_regular(&es, 0.1, 0.0, 3.0).unwrap(), all_small);
        // At L = 1000 the minimum distance L/100 exceeds the diameter.
        let far = regular_report(&es, 0.1, 1.0, 1000.0).unwrap();
        assert!(far.pairs.is_empty());
    }

    #[test]
    fn projectors() {
        let h = ham(vec![0.0, 3.0, -2.0, 1.0, 0.5]);
        let es = Eigensystem::of(&h).unwrap();
        let i = EnergyInterval::new(0.5, 1.5).unwrap();
        let p = projector(&es, &i);
        let out: Vec<f64> = es
            .eigenvalues
            .iter()
            .map(|&e| if i.contains(e) { 0.0 } else { 1.0 })
            .collect();
        let pbar = weighted_gram(&es, &out);
        assert!((&p + pbar - DMatrix::<f64>::identity(5, 5)).amax() < 1e-10);
        assert!((&p * &p - &p).amax() < 1e-10);
    }

    #[test]
    fn grid_avoids_spectra() {
        let i = EnergyInterval::new(0.0, 1.0).unwrap();
        let (g, dropped) = energy_grid(&i, 3, &[&[0.0]], 0.1);
        assert_eq!(g, vec![-0.5, 0.5]);
        assert_eq!(dropped, 1);
    }
}
