//! Eigensystems, level spacing, the modulating function `h_I`, localization
//! verdicts and cross-scale eigenvalue matching.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, boundary_shell_t, interior, s_d, sup_dist, Site, SiteSet};
use crate::operator::FiniteHamiltonian;

/// Gaps below this are a spacing failure whatever the threshold.
pub const DEGENERATE_GAP: f64 = 1e-12;

/// Relative slack for pointwise decay comparisons.
const DECAY_SLACK: f64 = 1e-12;

/// Cap reported by [`best_rate`] when no site constrains the rate.
pub const RATE_CAP: f64 = 1e6;

/// Open interval `(E − A, E + A)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyInterval {
    pub center: f64,
    pub half_width: f64,
}

impl EnergyInterval {
    pub fn new(center: f64, half_width: f64) -> Result<Self> {
        if !(half_width > 0.0 && half_width.is_finite() && center.is_finite()) {
            return Err(Error::param(
                "interval",
                format!("need finite center and positive half-width, got ({center}, {half_width})"),
            ));
        }
        Ok(Self { center, half_width })
    }

    pub fn lo(&self) -> f64 {
        self.center - self.half_width
    }

    pub fn hi(&self) -> f64 {
        self.center + self.half_width
    }

    pub fn contains(&self, t: f64) -> bool {
        self.lo() < t && t < self.hi()
    }

    /// `h_I(t) = 1 − ((t − E)/A)²` on `I`, zero elsewhere.
    pub fn h(&self, t: f64) -> f64 {
        h_i(t, self)
    }

    /// `I_ℓ`, half-width `A(1 − ℓ^{−κ})`.
    pub fn shrink(&self, ell: f64, kappa: f64) -> Result<Self> {
        shrink_interval(self, ell, kappa)
    }

    /// `I^ℓ`, half-width `A/(1 − ℓ^{−κ})`.
    pub fn expand(&self, ell: f64, kappa: f64) -> Result<Self> {
        expand_interval(self, ell, kappa)
    }

    pub fn is_within(&self, outer: &EnergyInterval) -> bool {
        self.lo() >= outer.lo() - 1e-12 * outer.half_width
            && self.hi() <= outer.hi() + 1e-12 * outer.half_width
    }
}

/// Zero at and beyond the computed endpoints `lo()` and `hi()`.
pub fn h_i(t: f64, i: &EnergyInterval) -> f64 {
    if !i.contains(t) {
        return 0.0;
    }
    let s = (t - i.center) / i.half_width;
    (1.0 - s * s).max(0.0)
}

fn shrink_factor(ell: f64, kappa: f64) -> Result<f64> {
    if !(ell > 1.0) {
        return Err(Error::param("ell", format!("must exceed 1, got {ell}")));
    }
    if !(kappa > 0.0 && kappa < 1.0) {
        return Err(Error::param("kappa", format!("must lie in (0,1), got {kappa}")));
    }
    let f = 1.0 - ell.powf(-kappa);
    if !(f > 0.0) {
        return Err(Error::param("ell", "degenerate half-width"));
    }
    Ok(f)
}

pub fn shrink_interval(i: &EnergyInterval, ell: f64, kappa: f64) -> Result<EnergyInterval> {
    let f = shrink_factor(ell, kappa)?;
    EnergyInterval::new(i.center, i.half_width * f)
}

pub fn expand_interval(i: &EnergyInterval, ell: f64, kappa: f64) -> Result<EnergyInterval> {
    let f = shrink_factor(ell, kappa)?;
    EnergyInterval::new(i.center, i.half_width / f)
}

/// `⌊L^τ⌋`, robust to round-off at exact integers.
pub fn scale_tau(l: f64, tau: f64) -> i64 {
    let p = l.powf(tau);
    let r = p.round();
    if (p - r).abs() <= 1e-12 * p.max(1.0) {
        r as i64
    } else {
        p.floor() as i64
    }
}

/// Complete eigensystem of `H_Θ` with ascending eigenvalues, orthonormal
/// eigenvector columns and one localization center per eigenvalue.
#[derive(Debug, Clone)]
pub struct Eigensystem {
    pub region: SiteSet,
    pub eigenvalues: Vec<f64>,
    /// Column `j` is the eigenvector for `eigenvalues[j]`.
    pub vectors: DMatrix<f64>,
    pub centers: Vec<Site>,
    pub residual_tol: f64,
}

/// Default residual tolerance for a Hamiltonian: backward-stable solvers
/// leave residuals of order `n ε ‖H‖`.
pub fn default_residual_tol(h: &FiniteHamiltonian) -> f64 {
    let n = h.len().max(1) as f64;
    1e3 * n * f64::EPSILON * h.max_abs().max(1.0)
}

/// Lexicographically smallest maximizer of `|φ|`. Ties are resolved with a
/// relative tolerance so that round-off cannot reorder equal moduli.
fn center_of(region: &SiteSet, phi: &[f64]) -> Site {
    let max = phi.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let cut = max * (1.0 - 1e-12);
    let i = phi.iter().position(|&v| v.abs() >= cut).unwrap_or(0);
    region.sites()[i].clone()
}

impl Eigensystem {
    pub fn new(h: &FiniteHamiltonian, tol: f64) -> Result<Self> {
        let n = h.len();
        if n == 0 {
            return Err(Error::param("region", "must be nonempty"));
        }
        let eig = SymmetricEigen::try_new(h.matrix.clone(), f64::EPSILON, 0)
            .ok_or_else(|| Error::EigenSolver("symmetric QR did not converge".into()))?;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let mut vectors = DMatrix::zeros(n, n);
        for (dst, &src) in order.iter().enumerate() {
            let mut col = eig.eigenvectors.column(src).into_owned();
            // Sign convention: the largest-modulus entry (first on ties) is positive.
            let max = col.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
            let k = col.iter().position(|v| v.abs() >= max * (1.0 - 1e-12)).unwrap();
            if col[k] < 0.0 {
                col.neg_mut();
            }
            vectors.set_column(dst, &col);
        }
        let centers = (0..n)
            .map(|j| center_of(&h.region, &vectors.as_slice()[j * n..(j + 1) * n]))
            .collect();
        let es = Eigensystem {
            region: h.region.clone(),
            eigenvalues,
            vectors,
            centers,
            residual_tol: tol,
        };
        let worst = es.max_residual(h);
        if !(worst <= tol) {
            return Err(Error::EigenSolver(format!(
                "residual {worst:e} exceeds tolerance {tol:e}"
            )));
        }
        Ok(es)
    }

    /// Eigensystem with the default residual tolerance.
    pub fn of(h: &FiniteHamiltonian) -> Result<Self> {
        Self::new(h, default_residual_tol(h))
    }

    /// Builds an eigensystem from given eigenpairs, e.g. synthetic fixtures.
    pub fn from_parts(region: SiteSet, eigenvalues: Vec<f64>, vectors: DMatrix<f64>) -> Result<Self> {
        let n = region.len();
        if eigenvalues.len() != n || vectors.nrows() != n || vectors.ncols() != n {
            return Err(Error::RegionMismatch("eigensystem shape".into()));
        }
        if eigenvalues.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::param("eigenvalues", "must be ascending"));
        }
        let centers = (0..n)
            .map(|j| center_of(&region, &vectors.as_slice()[j * n..(j + 1) * n]))
            .collect();
        Ok(Self {
            region,
            eigenvalues,
            vectors,
            centers,
            residual_tol: 0.0,
        })
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn vector(&self, j: usize) -> &[f64] {
        let n = self.len();
        &self.vectors.as_slice()[j * n..(j + 1) * n]
    }

    pub fn max_residual(&self, h: &FiniteHamiltonian) -> f64 {
        let r = &h.matrix * &self.vectors - &self.vectors * DMatrix::from_diagonal(&self.eigen_dvector());
        (0..self.len())
            .map(|j| r.column(j).norm())
            .fold(0.0, f64::max)
    }

    pub fn orthonormality_error(&self) -> f64 {
        let g = self.vectors.transpose() * &self.vectors;
        let n = self.len();
        (g - DMatrix::<f64>::identity(n, n)).amax()
    }

    pub fn eigen_dvector(&self) -> nalgebra::DVector<f64> {
        nalgebra::DVector::from_column_slice(&self.eigenvalues)
    }

    /// `‖QΛQᵀ − H‖_max`.
    pub fn reconstruction_error(&self, h: &FiniteHamiltonian) -> f64 {
        let q = &self.vectors;
        let rec = q * DMatrix::from_diagonal(&self.eigen_dvector()) * q.transpose();
        (rec - &h.matrix).amax()
    }

    /// Smallest distance from `lambda` to the spectrum.
    pub fn dist_to_spectrum(&self, lambda: f64) -> f64 {
        self.eigenvalues
            .iter()
            .map(|&e| (e - lambda).abs())
            .fold(f64::INFINITY, f64::min)
    }

    /// Index of the nearest eigenvalue (lower index on ties).
    pub fn nearest(&self, lambda: f64) -> usize {
        let ev = &self.eigenvalues;
        let p = ev.partition_point(|&e| e < lambda);
        match p {
            0 => 0,
            p if p == ev.len() => ev.len() - 1,
            p => {
                if (lambda - ev[p - 1]) <= (ev[p] - lambda) {
                    p - 1
                } else {
                    p
                }
            }
        }
    }

    /// `min_ν |ν − λ|` over eigenvalues; used as the resolvent condition measure.
    pub fn min_gap(&self) -> f64 {
        self.eigenvalues
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }
}

/// Full eigensystem of `H` with the given residual tolerance.
pub fn eigensystem(h: &FiniteHamiltonian, tol: f64) -> Result<Eigensystem> {
    Eigensystem::new(h, tol)
}

/// `e^{−R^β}`.
pub fn spacing_threshold(r: f64, beta: f64) -> f64 {
    (-r.powf(beta)).exp()
}

/// Whether consecutive eigenvalues differ by at least `e^{−R^β}` (and by
/// more than the degeneracy floor).
pub fn level_spacing(eigenvalues: &[f64], r: f64, beta: f64) -> bool {
    let thr = spacing_threshold(r, beta);
    eigenvalues.windows(2).all(|w| {
        let g = w[1] - w[0];
        g >= thr && g >= DEGENERATE_GAP
    })
}

pub fn level_spacing_check(es: &Eigensystem, r: f64, beta: f64) -> bool {
    level_spacing(&es.eigenvalues, r, beta)
}

/// `(x, m)`-localization of `phi` beyond `⌊L^τ⌋`.
pub fn localized_check(phi: &[f64], region: &SiteSet, x: &[i64], m: f64, l: f64, tau: f64) -> bool {
    let lt = scale_tau(l, tau);
    region.iter().zip(phi).all(|(y, &v)| {
        let dist = sup_dist(y, x);
        dist < lt || v.abs() <= (-m * dist as f64).exp() * (1.0 + DECAY_SLACK)
    })
}

/// Largest `m` for which [`localized_check`] passes, capped at [`RATE_CAP`].
/// Negative when some qualifying `|φ(y)|` exceeds one.
pub fn best_rate(phi: &[f64], region: &SiteSet, x: &[i64], l: f64, tau: f64) -> f64 {
    let lt = scale_tau(l, tau);
    let mut best = RATE_CAP;
    for (y, &v) in region.iter().zip(phi) {
        let dist = sup_dist(y, x);
        if dist < lt {
            continue;
        }
        if dist == 0 {
            if v.abs() > 1.0 + DECAY_SLACK {
                return f64::NEG_INFINITY;
            }
            continue;
        }
        if v == 0.0 {
            continue;
        }
        best = best.min(-v.abs().ln() / dist as f64);
    }
    best
}

/// One eigenvalue's row in a localization verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictRow {
    pub eigenvalue: f64,
    pub in_j: bool,
    pub required_rate: f64,
    pub achieved: bool,
    /// Empirical decay rate of the eigenvector from its center.
    pub best_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationVerdict {
    pub level_spacing: bool,
    pub per_eigenvalue: Vec<VerdictRow>,
    pub overall: bool,
    /// Largest `m` for which every in-`J` row would pass.
    pub witness_rate: f64,
}

/// Shape of a box for the verdict: its side `L` and the exponents `β`, `τ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerdictScale {
    pub side: f64,
    pub beta: f64,
    pub tau: f64,
}

/// `(m, J, I)`-localizing verdict for the box whose eigensystem is `es`.
pub fn localizing_verdict(
    es: &Eigensystem,
    m: f64,
    j: &EnergyInterval,
    i: &EnergyInterval,
    scale: VerdictScale,
) -> Result<LocalizationVerdict> {
    if (j.center - i.center).abs() > 1e-12 * i.center.abs().max(1.0) {
        return Err(Error::param("J", "intervals must share their center"));
    }
    if !j.is_within(i) {
        return Err(Error::param("J", "must be contained in I"));
    }
    if !(m >= 0.0) {
        return Err(Error::param("m", "must be nonnegative"));
    }
    let spacing = level_spacing_check(es, scale.side, scale.beta);
    let mut rows = Vec::with_capacity(es.len());
    let mut witness = RATE_CAP;
    for (k, &nu) in es.eigenvalues.iter().enumerate() {
        let in_j = j.contains(nu);
        let h = i.h(nu);
        let required = if in_j { m * h } else { 0.0 };
        let phi = es.vector(k);
        let x = &es.centers[k];
        let achieved = localized_check(phi, &es.region, x, required, scale.side, scale.tau);
        let br = best_rate(phi, &es.region, x, scale.side, scale.tau);
        if in_j && h > 0.0 {
            witness = witness.min(br / h);
        }
        rows.push(VerdictRow {
            eigenvalue: nu,
            in_j,
            required_rate: required,
            achieved,
            best_rate: br,
        });
    }
    let overall = spacing && rows.iter().all(|r| r.achieved);
    Ok(LocalizationVerdict {
        level_spacing: spacing,
        per_eigenvalue: rows,
        overall,
        witness_rate: witness.max(0.0),
    })
}

/// One selected inner eigenvalue and its nearest outer eigenvalue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchPair {
    pub inner_index: usize,
    pub inner_eigenvalue: f64,
    pub outer_index: usize,
    pub outer_eigenvalue: f64,
    pub distance: f64,
    pub bound: f64,
    pub pass: bool,
    /// Whether the inner eigenvector meets the decay its bound relies on.
    pub localized: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchReport {
    pub pairs: Vec<MatchPair>,
    pub injective: bool,
    pub ell_tau: i64,
}

impl MatchReport {
    pub fn all_pass(&self) -> bool {
        self.pairs.iter().all(|p| p.pass)
    }
}

/// Parameters shared by the cross-scale checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchParams {
    /// Interval `I` carrying the modulating function.
    pub interval: EnergyInterval,
    /// Interval selecting inner eigenvalues (typically `I_{2ℓ}`).
    pub selection: EnergyInterval,
    pub m: f64,
    pub ell: f64,
    pub tau: f64,
}

/// Inner eigenvalues in the selection interval whose centers lie in the
/// `ℓ_τ`-interior of the inner region relative to `outer_region`.
pub fn selected_indices(
    inner: &Eigensystem,
    outer_region: &SiteSet,
    selection: &EnergyInterval,
    t: i64,
) -> Result<Vec<usize>> {
    let deep = interior(&inner.region, outer_region, (t as f64).max(1.0))?;
    Ok((0..inner.len())
        .filter(|&k| selection.contains(inner.eigenvalues[k]) && deep.contains(&inner.centers[k]))
        .collect())
}

/// Matches the selected inner eigenvalues to the outer spectrum and checks
/// `dist(λ, σ(H_Θ)) ≤ √s_d ℓ^{(d−1)/2} e^{−m h_I(λ) ℓ_τ}` for each.
pub fn match_eigenvalues(inner: &Eigensystem, outer: &Eigensystem, p: &MatchParams) -> Result<MatchReport> {
    if outer.is_empty() {
        return Err(Error::param("outer", "spectrum is empty"));
    }
    if !inner.region.is_subset_of(&outer.region) {
        return Err(Error::NotSubset { what: "inner box" });
    }
    let lt = scale_tau(p.ell, p.tau);
    let d = inner.region.dim();
    let sel = selected_indices(inner, &outer.region, &p.selection, lt)?;
    let prefactor = s_d(d).sqrt() * p.ell.powf((d as f64 - 1.0) / 2.0);
    // Both eigensolves carry backward error of order n ε ‖H‖.
    let noise = 64.0
        * f64::EPSILON
        * outer.region.len() as f64
        * outer
            .eigenvalues
            .iter()
            .fold(1.0f64, |a, &b| a.max(b.abs()));
    let mut pairs = Vec::with_capacity(sel.len());
    for k in sel {
        let nu = inner.eigenvalues[k];
        let o = outer.nearest(nu);
        let dist = (outer.eigenvalues[o] - nu).abs();
        let rate = p.m * p.interval.h(nu);
        let bound = prefactor * (-rate * lt as f64).exp();
        let localized = localized_check(
            inner.vector(k),
            &inner.region,
            &inner.centers[k],
            rate,
            p.ell,
            p.tau,
        );
        pairs.push(MatchPair {
            inner_index: k,
            inner_eigenvalue: nu,
            outer_index: o,
            outer_eigenvalue: outer.eigenvalues[o],
            distance: dist,
            bound,
            pass: dist <= bound * (1.0 + 1e-9) + noise,
            localized,
        });
    }
    let mut used: Vec<usize> = pairs.iter().map(|q| q.outer_index).collect();
    used.sort_unstable();
    let injective = used.windows(2).all(|w| w[0] != w[1]);
    Ok(MatchReport {
        pairs,
        injective,
        ell_tau: lt,
    })
}

/// One site's row in a decay check `|ψ(y)| ≤ e^{−r} max_shell |ψ|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayRow {
    pub site: Site,
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteriorDecayReport {
    pub lambda_in_shrunk: bool,
    pub separation_ok: bool,
    pub inner_localizing: bool,
    pub hypotheses_ok: bool,
    /// Deep sites `y ∈ Λ_ℓ^{Θ,2ℓ_τ}` against `e^{−m h_I(λ) ℓ_τ}`.
    pub deep: Vec<DecayRow>,
    /// Sites `y ∈ Λ_ℓ^{Θ,ℓ_τ}` against `e^{−m h_I(λ) R_y}`.
    pub distance_weighted: Vec<DecayRow>,
}

impl InteriorDecayReport {
    pub fn pass_fraction(&self) -> f64 {
        let rows = self.deep.iter().chain(&self.distance_weighted);
        let total = self.deep.len() + self.distance_weighted.len();
        if total == 0 {
            return 1.0;
        }
        rows.filter(|r| r.pass).count() as f64 / total as f64
    }
}

/// Inputs to [`interior_decay_check`] besides the eigenpair.
#[derive(Debug, Clone, Copy)]
pub struct DecaySetup<'a> {
    pub outer_region: &'a SiteSet,
    pub inner: &'a Eigensystem,
    pub inner_localizing: bool,
    pub params: MatchParams,
    pub kappa: f64,
    /// Outer scale `L` and `β` for the separation `½e^{−L^β}`.
    pub big_l: f64,
    pub beta: f64,
    /// Effective rate used in place of `m₂`, `m₃`.
    pub m_eff: f64,
}

/// Pointwise decay of an outer eigenfunction inside a localizing inner box.
pub fn interior_decay_check(psi: &[f64], lambda: f64, s: &DecaySetup<'_>) -> Result<InteriorDecayReport> {
    let p = &s.params;
    let theta = s.outer_region;
    let inner_region = &s.inner.region;
    if psi.len() != theta.len() {
        return Err(Error::RegionMismatch("ψ does not live on Θ".into()));
    }
    let lt = scale_tau(p.ell, p.tau);
    let shrunk = p.interval.shrink(p.ell, s.kappa)?;
    let lambda_in_shrunk = shrunk.contains(lambda);
    let sel = selected_indices(s.inner, theta, &p.selection, lt)?;
    let half_gap = 0.5 * spacing_threshold(s.big_l, s.beta);
    let separation_ok = sel
        .iter()
        .all(|&k| (s.inner.eigenvalues[k] - lambda).abs() >= half_gap);
    let hypotheses_ok = lambda_in_shrunk && separation_ok && s.inner_localizing;

    let value = |y: &[i64]| psi[theta.index_of(y).unwrap()].abs();
    let t2 = (2 * lt).max(1) as f64;
    let shell = boundary_shell_t(inner_region, theta, t2)?;
    let shell_max = shell.iter().map(|v| value(v)).fold(0.0, f64::max);
    let rate = s.m_eff * p.interval.h(lambda);

    let deep_sites = interior(inner_region, theta, t2)?;
    let deep = deep_sites
        .iter()
        .map(|y| {
            let bound = (-rate * lt as f64).exp() * shell_max;
            let v = value(y);
            DecayRow {
                site: y.clone(),
                value: v,
                bound,
                pass: v <= bound * (1.0 + 1e-9),
            }
        })
        .collect();

    let inner_bd = geometry::boundary(inner_region, theta)?.interior;
    let mid_sites = interior(inner_region, theta, (lt as f64).max(1.0))?;
    let distance_weighted = mid_sites
        .iter()
        .map(|y| {
            let ry = inner_bd.dist_to(y).map_or(f64::INFINITY, |r| r as f64);
            let bound = if ry.is_finite() {
                (-rate * ry).exp() * shell_max
            } else {
                shell_max
            };
            let v = value(y);
            DecayRow {
                site: y.clone(),
                value: v,
                bound,
                pass: v <= bound * (1.0 + 1e-9),
            }
        })
        .collect();
    Ok(InteriorDecayReport {
        lambda_in_shrunk,
        separation_ok,
        inner_localizing: s.inner_localizing,
        hypotheses_ok,
        deep,
        distance_weighted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{assemble, Potential};
    use std::f64::consts::PI;

    fn ham(region: SiteSet, v: Vec<f64>) -> FiniteHamiltonian {
        assemble(&region, &Potential::new(region.clone(), v).unwrap()).unwrap()
    }

    #[test]
    fn two_by_two() {
        let h = ham(SiteSet::segment(0, 1), vec![0.0, 0.0]);
        let es = Eigensystem::of(&h).unwrap();
        assert!((es.eigenvalues[0] + 1.0).abs() < 1e-14);
        assert!((es.eigenvalues[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn diagonal_matrix() {
        let r = SiteSet::new(1, vec![vec![0], vec![5], vec![10]]).unwrap();
        let h = ham(r, vec![3.0, 1.0, 2.0]);
        let es = Eigensystem::of(&h).unwrap();
        assert_eq!(es.eigenvalues, vec![1.0, 2.0, 3.0]);
        assert_eq!(es.centers, vec![vec![5], vec![10], vec![0]]);
        assert_eq!(es.vector(0), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn path_spectrum() {
        let n = 50;
        let r = SiteSet::segment(1, n);
        let h = ham(r, vec![0.0; n as usize]);
        let es = Eigensystem::of(&h).unwrap();
        for (j, &e) in es.eigenvalues.iter().enumerate() {
            let exact = -2.0 * ((j + 1) as f64 * PI / (n + 1) as f64).cos();
            assert!((e - exact).abs() < 1e-10);
        }
        assert!(es.orthonormality_error() < 1e-10);
        assert!(es.reconstruction_error(&h) < 1e-8);
    }

    #[test]
    fn spacing_examples() {
        assert!(level_spacing(&[0.3], 2.0, 0.5));
        assert!(level_spacing(&[0.0, 0.5], 2.0, 0.5));
        assert!((spacing_threshold(2.0, 0.5) - 0.2431).abs() < 1e-4);
        assert!(!level_spacing(&[0.1, 0.1], 2.0, 0.5));
        assert!(!level_spacing(&[0.0, 5e-13], 1e-9, 0.5));
    }

    #[test]
    fn h_examples() {
        let i = EnergyInterval::new(2.0, 3.0).unwrap();
        assert_eq!(i.h(2.0), 1.0);
        assert_eq!(i.h(5.0), 0.0);
        assert_eq!(i.h(-1.0), 0.0);
        let u = EnergyInterval::new(0.0, 1.0).unwrap();
        assert_eq!(u.h(0.5), 0.75);
    }

    #[test]
    fn shrink_example() {
        let i = EnergyInterval::new(0.0, 1.0).unwrap();
        let s = i.shrink(4.0, 0.5).unwrap();
        assert_eq!((s.lo(), s.hi()), (-0.5, 0.5));
        assert!(i.shrink(1.0, 0.5).is_err());
        assert!(i.shrink(4.0, 1.0).is_err());
    }

    #[test]
    fn shrunk_interval_weight() {
        let i = EnergyInterval::new(1.5, 2.0).unwrap();
        let (ell, kappa) = (9.0, 0.4);
        let s = i.shrink(ell, kappa).unwrap();
        for k in 1..1000 {
            let t = s.lo() + 2.0 * s.half_width * k as f64 / 1000.0;
            assert!(i.h(t) >= ell.powf(-kappa));
        }
    }

    #[test]
    fn localized_examples() {
        let r = SiteSet::segment(0, 99);
        let flat = vec![0.1; 100];
        assert!(localized_check(&flat, &r, &[50], 0.0, 25.0, 0.8));
        assert!(!localized_check(&flat, &r, &[50], 0.5, 25.0, 0.8));
        let mut delta = vec![0.0; 100];
        delta[7] = 1.0;
        for m in [0.0, 1.0, 100.0] {
            assert!(localized_check(&delta, &r, &[7], m, 25.0, 0.8));
        }
        assert_eq!(best_rate(&delta, &r, &[7], 25.0, 0.8), RATE_CAP);
    }

    #[test]
    fn best_rate_exponential() {
        let r = SiteSet::segment(-30, 30);
        let phi: Vec<f64> = (-30i64..=30).map(|y| (-0.3 * y.abs() as f64).exp()).collect();
        let br = best_rate(&phi, &r, &[0], 10.0, 0.5);
        assert!((br - 0.3).abs() < 1e-12);
        assert!(localized_check(&phi, &r, &[0], br, 10.0, 0.5));
        assert!(!localized_check(&phi, &r, &[0], br + 1e-6, 10.0, 0.5));
    }

    #[test]
    fn verdict_on_delta_fixture() {
        let r = SiteSet::segment(0, 9);
        let es = Eigensystem::from_parts(
            r,
            (0..10).map(|k| k as f64).collect(),
            DMatrix::identity(10, 10),
        )
        .unwrap();
        let i = EnergyInterval::new(4.5, 6.0).unwrap();
        let scale = VerdictScale {
            side: 10.0,
            beta: 0.5,
            tau: 0.8,
        };
        let v = localizing_verdict(&es, 0.5, &i, &i, scale).unwrap();
        assert!(v.overall && v.level_spacing);
        assert_eq!(v.witness_rate, RATE_CAP);
        let j = EnergyInterval::new(4.5, 1.0).unwrap();
        let v = localizing_verdict(&es, 0.5, &j, &i, scale).unwrap();
        for row in &v.per_eigenvalue {
            assert_eq!(row.in_j, j.contains(row.eigenvalue));
            if !row.in_j {
                assert_eq!(row.required_rate, 0.0);
                assert!(row.achieved);
            }
        }
        let off = EnergyInterval::new(1.0, 6.0).unwrap();
        assert!(localizing_verdict(&es, 0.5, &off, &i, scale).is_err());
    }

    #[test]
    fn match_identity() {
        let r = SiteSet::segment(0, 12);
        let v: Vec<f64> = (0..13).map(|k| ((k * 7) % 13) as f64).collect();
        let h = ham(r, v);
        let es = Eigensystem::of(&h).unwrap();
        let i = EnergyInterval::new(6.0, 8.0).unwrap();
        let p = MatchParams {
            interval: i,
            selection: i,
            m: 0.3,
            ell: 13.0,
            tau: 0.8,
        };
        let rep = match_eigenvalues(&es, &es, &p).unwrap();
        assert!(!rep.pairs.is_empty());
        for q in &rep.pairs {
            assert_eq!(q.distance, 0.0);
            assert_eq!(q.inner_index, q.outer_index);
        }
        assert!(rep.injective);
    }

    #[test]
    fn match_empty_selection() {
        let r = SiteSet::segment(0, 4);
        let h = ham(r.clone(), vec![0.0; 5]);
        let es = Eigensystem::of(&h).unwrap();
        let big = ham(SiteSet::segment(-3, 7), vec![0.0; 11]);
        let outer = Eigensystem::of(&big).unwrap();
        let i = EnergyInterval::new(100.0, 1.0).unwrap();
        let p = MatchParams {
            interval: i,
            selection: i,
            m: 0.3,
            ell: 5.0,
            tau: 0.8,
        };
        assert!(match_eigenvalues(&es, &outer, &p).unwrap().pairs.is_empty());
    }

    #[test]
    fn decay_check_trivial_cases() {
        let theta = SiteSet::segment(0, 29);
        let inner_r = SiteSet::segment(10, 19);
        let h = ham(inner_r.clone(), (0..10).map(|k| 3.0 * k as f64).collect());
        let inner = Eigensystem::of(&h).unwrap();
        let i = EnergyInterval::new(100.0, 10.0).unwrap();
        let setup = DecaySetup {
            outer_region: &theta,
            inner: &inner,
            inner_localizing: true,
            params: MatchParams {
                interval: i,
                selection: i,
                m: 0.5,
                ell: 10.0,
                tau: 0.3,
            },
            kappa: 0.5,
            big_l: 30.0,
            beta: 0.5,
            m_eff: 0.25,
        };
        let mut psi = vec![0.0; 30];
        psi[0] = 1.0;
        let rep = interior_decay_check(&psi, 100.0, &setup).unwrap();
        assert!(rep.deep.iter().all(|r| r.pass && r.value == 0.0));
        assert!(!rep.deep.is_empty());
        let flat = vec![30f64.powf(-0.5); 30];
        // A flat vector cannot decay, so every deep row fails at a positive rate.
        let rep = interior_decay_check(&flat, 100.0, &setup).unwrap();
        assert!(rep.deep.iter().all(|r| !r.pass && r.bound < r.value));
        let rep0 = DecaySetup { m_eff: 0.0, ..setup };
        let rep = interior_decay_check(&flat, 100.0, &rep0).unwrap();
        assert_eq!(rep.pass_fraction(), 1.0);
    }
}
