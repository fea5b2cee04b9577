//! Finite-volume Anderson Hamiltonians `H_Θ = −Δ_Θ + V_Θ`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{boundary, SiteSet};
use crate::rng;

/// Stream tag for potential draws.
const POTENTIAL_STREAM: u64 = 0x504F_5445_4E54;

/// Single-site law `μ` before scaling by the amplitude.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Distribution {
    /// Uniform on `[a, b]`.
    Uniform { a: f64, b: f64 },
    /// `atoms` equal-mass pieces, each uniform on `[c_k, c_k + width]` with
    /// `c_k = k(1 − width)/(atoms − 1)`, so the support lies in `[0, 1]`.
    /// Declared Hölder exponent `alpha`; the constant is computed exactly.
    DiscretizedHolder { atoms: usize, width: f64, alpha: f64 },
}

impl Default for Distribution {
    fn default() -> Self {
        Distribution::Uniform { a: 0.0, b: 1.0 }
    }
}

impl Distribution {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Distribution::Uniform { a, b } => {
                if !(a.is_finite() && b.is_finite() && a < b) {
                    return Err(Error::param("uniform", format!("need a < b, got [{a}, {b}]")));
                }
            }
            Distribution::DiscretizedHolder { atoms, width, alpha } => {
                if atoms == 0 {
                    return Err(Error::param("atoms", "must be positive"));
                }
                if !(width > 0.0 && width <= 1.0) {
                    return Err(Error::param("width", format!("must lie in (0,1], got {width}")));
                }
                if !(alpha > 0.5 && alpha <= 1.0) {
                    return Err(Error::param("alpha", format!("must lie in (1/2,1], got {alpha}")));
                }
            }
        }
        Ok(())
    }

    /// The pieces `[lo, hi]` with their masses.
    fn pieces(&self) -> Vec<(f64, f64, f64)> {
        match *self {
            Distribution::Uniform { a, b } => vec![(a, b, 1.0)],
            Distribution::DiscretizedHolder { atoms, width, .. } => {
                let w = 1.0 / atoms as f64;
                (0..atoms)
                    .map(|k| {
                        let c = if atoms == 1 {
                            0.0
                        } else {
                            k as f64 * (1.0 - width) / (atoms - 1) as f64
                        };
                        (c, c + width, w)
                    })
                    .collect()
            }
        }
    }

    /// Inverse-CDF sample from a uniform `[0,1)` variate.
    pub fn sample(&self, u: f64) -> f64 {
        match *self {
            Distribution::Uniform { a, b } => a + (b - a) * u,
            Distribution::DiscretizedHolder { atoms, .. } => {
                let pieces = self.pieces();
                let scaled = u * atoms as f64;
                let k = (scaled.floor() as usize).min(atoms - 1);
                let frac = scaled - k as f64;
                let (lo, hi, _) = pieces[k];
                lo + (hi - lo) * frac
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.pieces()
            .iter()
            .map(|&(lo, hi, w)| w * ((x - lo) / (hi - lo)).clamp(0.0, 1.0))
            .sum()
    }

    /// `μ([a, a + t])`.
    fn mass(&self, a: f64, t: f64) -> f64 {
        self.cdf(a + t) - self.cdf(a)
    }

    /// Support as a union of disjoint closed intervals, ascending.
    pub fn support(&self) -> Vec<(f64, f64)> {
        let mut iv: Vec<(f64, f64)> = self.pieces().iter().map(|&(l, h, _)| (l, h)).collect();
        iv.sort_by(|x, y| x.0.total_cmp(&y.0));
        merge_intervals(iv)
    }

    pub fn diam_support(&self) -> f64 {
        let s = self.support();
        s.last().unwrap().1 - s[0].0
    }

    fn endpoints(&self) -> Vec<f64> {
        let mut e: Vec<f64> = self.pieces().iter().flat_map(|&(l, h, _)| [l, h]).collect();
        e.sort_by(f64::total_cmp);
        e.dedup();
        e
    }

    /// Concentration function `S_μ(t) = sup_a μ([a, a + t])`, exact.
    pub fn concentration(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let e = self.endpoints();
        e.iter()
            .flat_map(|&p| [p, p - t])
            .map(|a| self.mass(a, t))
            .fold(0.0, f64::max)
            .min(1.0)
    }

    /// `(α, K)` with `S_μ(t) ≤ K t^α` for all `t > 0`.
    pub fn holder(&self) -> (f64, f64) {
        match *self {
            Distribution::Uniform { a, b } => (1.0, 1.0 / (b - a)),
            Distribution::DiscretizedHolder { alpha, .. } => (alpha, self.min_holder_constant(alpha)),
        }
    }

    /// Smallest `K` with `S_μ(t) ≤ K t^α`. `S_μ` is piecewise linear with
    /// kinks at differences of endpoints, and on each linear piece the ratio
    /// `S_μ(t)/t^α` peaks at an end, so those differences suffice.
    pub fn min_holder_constant(&self, alpha: f64) -> f64 {
        let e = self.endpoints();
        let mut best: f64 = 0.0;
        for &x in &e {
            for &y in &e {
                let t = y - x;
                if t > 0.0 {
                    best = best.max(self.concentration(t) / t.powf(alpha));
                }
            }
        }
        best
    }

    pub fn mean(&self) -> f64 {
        self.pieces().iter().map(|&(l, h, w)| w * (l + h) / 2.0).sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.pieces()
            .iter()
            .map(|&(l, h, w)| w * ((h - l).powi(2) / 12.0 + ((l + h) / 2.0 - m).powi(2)))
            .sum()
    }
}

fn merge_intervals(sorted: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (l, h) in sorted {
        match out.last_mut() {
            Some(last) if l <= last.1 => last.1 = last.1.max(h),
            _ => out.push((l, h)),
        }
    }
    out
}

/// Disorder law `g·μ` together with the seed material for site draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisorderSpec {
    #[serde(default)]
    pub distribution: Distribution,
    pub amplitude: f64,
    #[serde(default)]
    pub seed: u64,
}

impl DisorderSpec {
    pub fn uniform(a: f64, b: f64, amplitude: f64, seed: u64) -> Self {
        Self {
            distribution: Distribution::Uniform { a, b },
            amplitude,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.distribution.validate()?;
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return Err(Error::param(
                "amplitude",
                format!("must be finite and nonnegative, got {}", self.amplitude),
            ));
        }
        Ok(())
    }

    /// `(α, K)` of the scaled law `g·μ`: `K_g = K g^{−α}`.
    pub fn holder(&self) -> (f64, f64) {
        let (alpha, k) = self.distribution.holder();
        (alpha, k * self.amplitude.powf(-alpha))
    }

    pub fn diam_support(&self) -> f64 {
        self.amplitude * self.distribution.diam_support()
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }

    /// Value `g·ω_x` at one site.
    pub fn site_value(&self, trial: u64, site: &[i64]) -> f64 {
        let u = rng::site_uniform(self.seed, POTENTIAL_STREAM, trial, site);
        self.amplitude * self.distribution.sample(u)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Potential {
    pub region: SiteSet,
    pub values: Vec<f64>,
}

impl Potential {
    pub fn new(region: SiteSet, values: Vec<f64>) -> Result<Self> {
        if values.len() != region.len() {
            return Err(Error::RegionMismatch(format!(
                "{} values for {} sites",
                values.len(),
                region.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("potential", "values must be finite"));
        }
        Ok(Self { region, values })
    }

    pub fn zero(region: SiteSet) -> Self {
        let n = region.len();
        Self {
            region,
            values: vec![0.0; n],
        }
    }

    pub fn from_fn(region: SiteSet, f: impl Fn(&[i64]) -> f64) -> Result<Self> {
        let values = region.iter().map(|s| f(s)).collect();
        Self::new(region, values)
    }

    /// Writes `site coordinates…, value` rows.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header: Vec<String> = (0..self.region.dim()).map(|i| format!("x{i}")).collect();
        header.push("value".into());
        out.write_record(&header)?;
        for (s, v) in self.region.iter().zip(&self.values) {
            let mut row: Vec<String> = s.iter().map(|c| c.to_string()).collect();
            row.push(format!("{v:?}"));
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Draws `V_ω` on `region` for one trial. The value at a site depends only on
/// `(seed, trial, site)`.
pub fn sample_potential(region: &SiteSet, spec: &DisorderSpec, trial: u64) -> Result<Potential> {
    if region.is_empty() {
        return Err(Error::param("region", "must be nonempty"));
    }
    spec.validate()?;
    let values = region.iter().map(|s| spec.site_value(trial, s)).collect();
    Potential::new(region.clone(), values)
}

/// Dense `H_Θ` in the region's site order.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteHamiltonian {
    pub region: SiteSet,
    pub matrix: DMatrix<f64>,
}

impl FiniteHamiltonian {
    pub fn len(&self) -> usize {
        self.region.len()
    }

    pub fn is_empty(&self) -> bool {
        self.region.is_empty()
    }

    pub fn potential(&self) -> Potential {
        Potential {
            region: self.region.clone(),
            values: (0..self.len()).map(|i| self.matrix[(i, i)]).collect(),
        }
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.matrix.iter().fold(0.0, |a, &b| a.max(b.abs()))
    }

    /// Copy of `H − E`.
    pub fn shifted(&self, e: f64) -> FiniteHamiltonian {
        let mut m = self.matrix.clone();
        for i in 0..self.len() {
            m[(i, i)] -= e;
        }
        FiniteHamiltonian {
            region: self.region.clone(),
            matrix: m,
        }
    }
}

/// `H = −Δ + V` on `region`.
pub fn assemble(region: &SiteSet, potential: &Potential) -> Result<FiniteHamiltonian> {
    if &potential.region != region {
        return Err(Error::RegionMismatch(
            "potential is defined on a different region".into(),
        ));
    }
    let n = region.len();
    let mut m = DMatrix::<f64>::zeros(n, n);
    for (i, s) in region.iter().enumerate() {
        m[(i, i)] = potential.values[i];
        let mut nb = s.clone();
        for k in 0..s.len() {
            nb[k] = s[k] + 1;
            if let Some(j) = region.index_of(&nb) {
                m[(i, j)] = -1.0;
                m[(j, i)] = -1.0;
            }
            nb[k] = s[k];
        }
    }
    Ok(FiniteHamiltonian {
        region: region.clone(),
        matrix: m,
    })
}

/// Samples a potential and assembles `H_Θ` for one trial.
pub fn sample_hamiltonian(region: &SiteSet, spec: &DisorderSpec, trial: u64) -> Result<FiniteHamiltonian> {
    assemble(region, &sample_potential(region, spec, trial)?)
}

/// Principal submatrix on `sub`.
pub fn restrict(h: &FiniteHamiltonian, sub: &SiteSet) -> Result<FiniteHamiltonian> {
    if !sub.is_subset_of(&h.region) {
        return Err(Error::NotSubset { what: "sub" });
    }
    let idx: Vec<usize> = sub.iter().map(|s| h.region.index_of(s).unwrap()).collect();
    let n = idx.len();
    let m = DMatrix::from_fn(n, n, |i, j| h.matrix[(idx[i], idx[j])]);
    Ok(FiniteHamiltonian {
        region: sub.clone(),
        matrix: m,
    })
}

/// Symmetric matrix in coordinate form on a region's index space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseSymmetric {
    pub n: usize,
    /// `(row, col, value)`, both orientations listed.
    pub entries: Vec<(usize, usize, f64)>,
}

impl SparseSymmetric {
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for &(i, j, v) in &self.entries {
            m[(i, j)] += v;
        }
        m
    }
}

/// `Γ_{∂^ΘΦ}` indexed by `theta`'s site order.
pub fn coupling_gamma(phi: &SiteSet, theta: &SiteSet) -> Result<SparseSymmetric> {
    let bd = boundary(phi, theta)?;
    let mut entries = Vec::with_capacity(2 * bd.edges.len());
    for (u, v) in &bd.edges {
        let i = theta.index_of(u).unwrap();
        let j = theta.index_of(v).unwrap();
        entries.push((i, j, -1.0));
        entries.push((j, i, -1.0));
    }
    entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    Ok(SparseSymmetric {
        n: theta.len(),
        entries,
    })
}

/// `H_Φ ⊕ H_{Θ∖Φ}` embedded in `theta`'s site order.
pub fn direct_sum(h_phi: &FiniteHamiltonian, h_rest: &FiniteHamiltonian, theta: &SiteSet) -> Result<DMatrix<f64>> {
    if h_phi.len() + h_rest.len() != theta.len() {
        return Err(Error::RegionMismatch("blocks do not partition the region".into()));
    }
    let mut m = DMatrix::zeros(theta.len(), theta.len());
    for h in [h_phi, h_rest] {
        let idx: Vec<usize> = h
            .region
            .iter()
            .map(|s| theta.index_of(s).ok_or(Error::NotSubset { what: "block" }))
            .collect::<Result<_>>()?;
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                m[(i, j)] = h.matrix[(a, b)];
            }
        }
    }
    Ok(m)
}

/// `Σ = [−2d, 2d] + g·supp μ`, as disjoint intervals.
pub fn almost_sure_spectrum(spec: &DisorderSpec, d: usize) -> Result<Vec<(f64, f64)>> {
    spec.validate()?;
    let w = 2.0 * d as f64;
    let g = spec.amplitude;
    let iv = spec
        .distribution
        .support()
        .into_iter()
        .map(|(l, h)| (g * l - w, g * h + w))
        .collect();
    Ok(merge_intervals(iv))
}
