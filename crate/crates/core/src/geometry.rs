//! Finite regions of `Z^d`: boxes, boundaries, interiors, suitable covers and
//! buffered subsets.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A lattice point.
pub type Site = Vec<i64>;

/// Relative tolerance for comparisons of real coordinates against lattice
/// and grid positions.
pub const COORD_TOL: f64 = 1e-12;

fn tol_for(scale: f64) -> f64 {
    COORD_TOL * scale.abs().max(1.0)
}

/// Sup-norm distance between lattice sites.
pub fn sup_dist(a: &[i64], b: &[i64]) -> i64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).max().unwrap_or(0)
}

/// Sup-norm distance between real points.
pub fn sup_dist_real(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Sup-norm distance from a site to a real point.
pub fn sup_dist_mixed(a: &[i64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (*x as f64 - y).abs()).fold(0.0, f64::max)
}

/// Euclidean distance between lattice sites.
pub fn euclid_dist(a: &[i64], b: &[i64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| ((x - y) as f64).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// `s_d = 2^d d`.
pub fn s_d(d: usize) -> f64 {
    2f64.powi(d as i32) * d as f64
}


fn neighbors(site: &[i64]) -> impl Iterator<Item = Site> + '_ {
    (0..site.len()).flat_map(move |i| {
        [-1i64, 1].into_iter().map(move |s| {
            let mut n = site.to_vec();
            n[i] += s;
            n
        })
    })
}

/// Integer product range `∏ [lo_i, hi_i]`; empty when some `lo_i > hi_i`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntBox {
    pub lo: Vec<i64>,
    pub hi: Vec<i64>,
}

impl IntBox {
    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lo.iter().zip(&self.hi).any(|(l, h)| l > h)
    }

    pub fn len(&self) -> usize {
        if self.is_empty() {
            return 0;
        }
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| (h - l + 1) as usize)
            .product()
    }

    pub fn contains(&self, site: &[i64]) -> bool {
        site.len() == self.dim()
            && site
                .iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(x, (l, h))| l <= x && x <= h)
    }

    pub fn is_subset_of(&self, other: &IntBox) -> bool {
        self.is_empty()
            || self
                .lo
                .iter()
                .zip(&self.hi)
                .zip(other.lo.iter().zip(&other.hi))
                .all(|((l, h), (ol, oh))| ol <= l && h <= oh)
    }

    /// All sites in lexicographic order.
    pub fn sites(&self) -> Vec<Site> {
        if self.is_empty() {
            return Vec::new();
        }
        let d = self.dim();
        let mut out = Vec::with_capacity(self.len());
        let mut cur = self.lo.clone();
        loop {
            out.push(cur.clone());
            let mut i = d;
            loop {
                if i == 0 {
                    return out;
                }
                i -= 1;
                if cur[i] < self.hi[i] {
                    cur[i] += 1;
                    for j in i + 1..d {
                        cur[j] = self.lo[j];
                    }
                    break;
                }
            }
        }
    }

    /// Sup distance from `site` (inside `self`) to `outer ∖ self`, or `None`
    /// when `self` covers `outer`.
    pub fn dist_to_complement_within(&self, site: &[i64], outer: &IntBox) -> Option<i64> {
        let mut best: Option<i64> = None;
        for i in 0..self.dim() {
            if self.lo[i] > outer.lo[i] {
                let d = site[i] - self.lo[i] + 1;
                best = Some(best.map_or(d, |b| b.min(d)));
            }
            if self.hi[i] < outer.hi[i] {
                let d = self.hi[i] - site[i] + 1;
                best = Some(best.map_or(d, |b| b.min(d)));
            }
        }
        best
    }
}

/// The box `Λ_L(x) = {y ∈ Z^d : ‖y − x‖_∞ ≤ L/2}` with real center and side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeBox {
    pub center: Vec<f64>,
    pub side: f64,
}

impl LatticeBox {
    pub fn new(center: Vec<f64>, side: f64) -> Result<Self> {
        if !(side > 0.0) || !side.is_finite() {
            return Err(Error::param("side", format!("must be positive, got {side}")));
        }
        if center.is_empty() {
            return Err(Error::param("center", "dimension must be positive"));
        }
        if center.iter().any(|c| !c.is_finite()) {
            return Err(Error::param("center", "coordinates must be finite"));
        }
        Ok(Self { center, side })
    }

    /// Box centered at a lattice site.
    pub fn at_site(center: &[i64], side: f64) -> Result<Self> {
        Self::new(center.iter().map(|&c| c as f64).collect(), side)
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// Integer coordinate ranges of the box.
    pub fn int_box(&self) -> IntBox {
        let h = self.side / 2.0;
        let mut lo = Vec::with_capacity(self.dim());
        let mut hi = Vec::with_capacity(self.dim());
        for &c in &self.center {
            let t = tol_for(c.abs() + h);
            lo.push((c - h - t).ceil() as i64);
            hi.push((c + h + t).floor() as i64);
        }
        IntBox { lo, hi }
    }

    pub fn sites(&self) -> SiteSet {
        SiteSet::from_sorted_unchecked(self.dim(), self.int_box().sites())
    }

    pub fn contains(&self, site: &[i64]) -> bool {
        self.int_box().contains(site)
    }

    /// Whether the closed real boxes `Λ^R` intersect.
    pub fn real_intersects(&self, other: &LatticeBox) -> bool {
        let reach = (self.side + other.side) / 2.0;
        sup_dist_real(&self.center, &other.center) <= reach + tol_for(reach)
    }
}

/// Finite subset of `Z^d`, kept in lexicographic order without duplicates.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SiteSet {
    dim: usize,
    sites: Vec<Site>,
}

impl SiteSet {
    pub fn new(dim: usize, mut sites: Vec<Site>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::param("dim", "must be positive"));
        }
        if let Some(s) = sites.iter().find(|s| s.len() != dim) {
            return Err(Error::param(
                "sites",
                format!("site {s:?} does not have dimension {dim}"),
            ));
        }
        sites.sort();
        sites.dedup();
        Ok(Self { dim, sites })
    }

    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            sites: Vec::new(),
        }
    }

    pub(crate) fn from_sorted_unchecked(dim: usize, sites: Vec<Site>) -> Self {
        debug_assert!(sites.windows(2).all(|w| w[0] < w[1]));
        Self { dim, sites }
    }

    /// One-dimensional segment `{lo, …, hi}`.
    pub fn segment(lo: i64, hi: i64) -> Self {
        Self::from_sorted_unchecked(1, (lo..=hi).map(|x| vec![x]).collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Site> {
        self.sites.iter()
    }

    pub fn index_of(&self, site: &[i64]) -> Option<usize> {
        self.sites
            .binary_search_by(|s| s.as_slice().cmp(site))
            .ok()
    }

    pub fn contains(&self, site: &[i64]) -> bool {
        self.index_of(site).is_some()
    }

    pub fn is_subset_of(&self, other: &SiteSet) -> bool {
        self.dim == other.dim && self.sites.iter().all(|s| other.contains(s))
    }

    pub fn union(&self, other: &SiteSet) -> SiteSet {
        let mut all: BTreeSet<Site> = self.sites.iter().cloned().collect();
        all.extend(other.sites.iter().cloned());
        SiteSet::from_sorted_unchecked(self.dim, all.into_iter().collect())
    }

    pub fn difference(&self, other: &SiteSet) -> SiteSet {
        SiteSet::from_sorted_unchecked(
            self.dim,
            self.sites
                .iter()
                .filter(|s| !other.contains(s))
                .cloned()
                .collect(),
        )
    }

    pub fn intersection(&self, other: &SiteSet) -> SiteSet {
        SiteSet::from_sorted_unchecked(
            self.dim,
            self.sites
                .iter()
                .filter(|s| other.contains(s))
                .cloned()
                .collect(),
        )
    }

    pub fn filter(&self, mut keep: impl FnMut(&Site) -> bool) -> SiteSet {
        SiteSet::from_sorted_unchecked(
            self.dim,
            self.sites.iter().filter(|s| keep(s)).cloned().collect(),
        )
    }

    /// Sup-norm diameter; zero for sets with fewer than two sites.
    pub fn diameter(&self) -> i64 {
        (0..self.dim)
            .map(|i| {
                let lo = self.sites.iter().map(|s| s[i]).min();
                let hi = self.sites.iter().map(|s| s[i]).max();
                match (lo, hi) {
                    (Some(l), Some(h)) => h - l,
                    _ => 0,
                }
            })
            .max()
            .unwrap_or(0)
    }

    /// Sup-norm distance from `site` to the set, `None` if empty.
    pub fn dist_to(&self, site: &[i64]) -> Option<i64> {
        self.sites.iter().map(|s| sup_dist(s, site)).min()
    }

    /// Connectivity under nearest-neighbour adjacency.
    pub fn is_connected(&self) -> bool {
        if self.sites.len() <= 1 {
            return true;
        }
        let mut seen = vec![false; self.sites.len()];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(i) = stack.pop() {
            for n in neighbors(&self.sites[i]) {
                if let Some(j) = self.index_of(&n) {
                    if !seen[j] {
                        seen[j] = true;
                        count += 1;
                        stack.push(j);
                    }
                }
            }
        }
        count == self.sites.len()
    }
}

impl<'a> IntoIterator for &'a SiteSet {
    type Item = &'a Site;
    type IntoIter = std::slice::Iter<'a, Site>;
    fn into_iter(self) -> Self::IntoIter {
        self.sites.iter()
    }
}

/// Edge boundary of `Φ` in `Θ` with its exterior and interior site sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryData {
    pub edges: Vec<(Site, Site)>,
    pub exterior: SiteSet,
    pub interior: SiteSet,
}

fn require_subset(phi: &SiteSet, theta: &SiteSet, what: &'static str) -> Result<()> {
    if phi.dim() != theta.dim() {
        return Err(Error::RegionMismatch(format!(
            "dimensions {} and {} differ",
            phi.dim(),
            theta.dim()
        )));
    }
    if !phi.is_subset_of(theta) {
        return Err(Error::NotSubset { what });
    }
    Ok(())
}

/// `∂^ΘΦ`, `∂_ex^ΘΦ` and `∂_in^ΘΦ`.
pub fn boundary(phi: &SiteSet, theta: &SiteSet) -> Result<BoundaryData> {
    require_subset(phi, theta, "phi")?;
    let mut edges = Vec::new();
    for u in phi {
        let mut ns: Vec<Site> = neighbors(u)
            .filter(|v| theta.contains(v) && !phi.contains(v))
            .collect();
        ns.sort();
        for v in ns {
            edges.push((u.clone(), v));
        }
    }
    let exterior = SiteSet::new(phi.dim(), edges.iter().map(|(_, v)| v.clone()).collect())?;
    let interior = SiteSet::new(phi.dim(), edges.iter().map(|(u, _)| u.clone()).collect())?;
    Ok(BoundaryData {
        edges,
        exterior,
        interior,
    })
}

fn interior_radius(phi: &SiteSet, theta: &SiteSet, r: i64) -> SiteSet {
    let rest = theta.difference(phi);
    phi.filter(|y| rest.sites().iter().all(|z| sup_dist(y, z) > r))
}

fn check_t(t: f64) -> Result<i64> {
    if !(t >= 1.0) || !t.is_finite() {
        return Err(Error::param("t", format!("must be at least 1, got {t}")));
    }
    Ok(t.floor() as i64)
}

/// `Φ^{Θ,t}`: sites of `Φ` at sup distance more than `⌊t⌋` from `Θ ∖ Φ`.
pub fn interior(phi: &SiteSet, theta: &SiteSet, t: f64) -> Result<SiteSet> {
    require_subset(phi, theta, "phi")?;
    Ok(interior_radius(phi, theta, check_t(t)?))
}

/// `∂_in^{Θ,t}Φ = Φ ∖ Φ^{Θ,t}`.
pub fn interior_boundary_t(phi: &SiteSet, theta: &SiteSet, t: f64) -> Result<SiteSet> {
    Ok(phi.difference(&interior(phi, theta, t)?))
}

/// `∂_ex^{Θ,t}Φ = ∂_in^{Θ,t}(Θ ∖ Φ)`.
pub fn exterior_boundary_t(phi: &SiteSet, theta: &SiteSet, t: f64) -> Result<SiteSet> {
    require_subset(phi, theta, "phi")?;
    let rest = theta.difference(phi);
    interior_boundary_t(&rest, theta, t)
}

/// `∂^{Θ,t}Φ = ∂_in^{Θ,t}Φ ∪ ∂_ex^{Θ,t}Φ`.
pub fn boundary_shell_t(phi: &SiteSet, theta: &SiteSet, t: f64) -> Result<SiteSet> {
    Ok(interior_boundary_t(phi, theta, t)?.union(&exterior_boundary_t(phi, theta, t)?))
}

/// A suitable `ℓ`-cover of a box: a grid of child centers with spacing `ρℓ^ς`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverSpec {
    pub parent: LatticeBox,
    pub child_side: f64,
    pub varsigma: f64,
    pub rho: f64,
    /// Grid steps from the parent center to the outermost centers, per axis.
    pub steps: usize,
    pub centers: Vec<Vec<f64>>,
}

impl CoverSpec {
    pub fn spacing(&self) -> f64 {
        self.rho * self.child_side.powf(self.varsigma)
    }

    pub fn dim(&self) -> usize {
        self.parent.dim()
    }

    pub fn child(&self, index: usize) -> LatticeBox {
        LatticeBox {
            center: self.centers[index].clone(),
            side: self.child_side,
        }
    }

    /// Integer grid offsets of a center relative to the parent center.
    pub fn grid_index(&self, index: usize) -> Vec<i64> {
        let h = self.spacing();
        self.centers[index]
            .iter()
            .zip(&self.parent.center)
            .map(|(a, x)| ((a - x) / h).round() as i64)
            .collect()
    }

    /// Grid distance `‖a − b‖ / (ρℓ^ς)` between two centers.
    pub fn grid_dist(&self, i: usize, j: usize) -> i64 {
        sup_dist(&self.grid_index(i), &self.grid_index(j))
    }

    /// `k_ℓ = ⌊ρ^{-1}ℓ^{1−ς}⌋ + 1`.
    pub fn k_ell(&self) -> i64 {
        k_ell(self.rho, self.child_side, self.varsigma)
    }

    /// Half-width `(ℓ − ℓ^ς)/2` used by the interior-coverage property.
    pub fn coverage_depth(&self) -> f64 {
        (self.child_side - self.child_side.powf(self.varsigma)) / 2.0
    }
}

/// `k_ℓ = ⌊ρ^{-1}ℓ^{1−ς}⌋ + 1`, robust to round-off when the quotient is an integer.
pub fn k_ell(rho: f64, ell: f64, varsigma: f64) -> i64 {
    let q = ell.powf(1.0 - varsigma) / rho;
    let r = q.round();
    let f = if (q - r).abs() <= tol_for(q) { r } else { q.floor() };
    f as i64 + 1
}

fn admissible_steps(parent_side: f64, ell: f64, varsigma: f64, rho: f64) -> Option<usize> {
    let a = (parent_side - ell) / (2.0 * ell.powf(varsigma));
    let k = a / rho;
    let kr = k.round();
    if kr >= 1.0 && (k - kr).abs() <= 1e-9 * kr.max(1.0) {
        Some(kr as usize)
    } else {
        None
    }
}

/// The suitable `ℓ`-cover of `parent`. Without `rho_choice` the largest
/// admissible `ρ` is used.
pub fn suitable_cover(
    parent: &LatticeBox,
    child_side: f64,
    varsigma: f64,
    rho_choice: Option<f64>,
) -> Result<CoverSpec> {
    let big_l = parent.side;
    let ell = child_side;
    if !(ell > 0.0) {
        return Err(Error::param("child_side", "must be positive"));
    }
    if ell > big_l / 2.0 + tol_for(big_l) {
        return Err(Error::param(
            "child_side",
            format!("need ℓ ≤ L/2, got ℓ = {ell}, L = {big_l}"),
        ));
    }
    if !(varsigma > 0.0 && varsigma < 1.0) {
        return Err(Error::param("varsigma", format!("must lie in (0,1), got {varsigma}")));
    }
    let a = (big_l - ell) / (2.0 * ell.powf(varsigma));
    let (rho, steps) = match rho_choice {
        Some(rho) => {
            if !(0.5..=1.0).contains(&rho) {
                return Err(Error::NoAdmissibleRho(format!("ρ = {rho} outside [1/2, 1]")));
            }
            let k = admissible_steps(big_l, ell, varsigma, rho).ok_or_else(|| {
                Error::NoAdmissibleRho(format!("(L−ℓ)/(2ℓ^ς ρ) = {} is not an integer", a / rho))
            })?;
            (rho, k)
        }
        None => {
            let k = a.ceil().max(1.0);
            let rho = a / k;
            if rho < 0.5 {
                return Err(Error::NoAdmissibleRho(format!(
                    "largest candidate ρ = {rho} is below 1/2"
                )));
            }
            (rho, k as usize)
        }
    };
    let h = rho * ell.powf(varsigma);
    let d = parent.dim();
    let k = steps as i64;
    let grid = IntBox {
        lo: vec![-k; d],
        hi: vec![k; d],
    };
    let centers = grid
        .sites()
        .into_iter()
        .map(|j| {
            j.iter()
                .zip(&parent.center)
                .map(|(&ji, &x)| x + h * ji as f64)
                .collect()
        })
        .collect();
    Ok(CoverSpec {
        parent: parent.clone(),
        child_side: ell,
        varsigma,
        rho,
        steps,
        centers,
    })
}

/// Index of the first center (lexicographic) whose child box contains `b`
/// in its `(ℓ − ℓ^ς)/2` interior relative to the parent.
pub fn cover_interior_assignment(cover: &CoverSpec, b: &[i64]) -> Result<usize> {
    if !cover.parent.int_box().contains(b) {
        return Err(Error::NotSubset { what: "site" });
    }
    Ok(find_deep_child(cover, b).expect("suitable cover leaves a site outside every child interior"))
}

fn find_deep_child(cover: &CoverSpec, b: &[i64]) -> Option<usize> {
    let parent = cover.parent.int_box();
    let depth = cover.coverage_depth().floor() as i64;
    (0..cover.centers.len()).find(|&i| {
        let child = cover.child(i).int_box();
        child.contains(b)
            && match child.dist_to_complement_within(b, &parent) {
                None => true,
                Some(dist) => dist > depth,
            }
    })
}

/// Structural properties of a cover, each checked exhaustively.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverCheck {
    pub rho: f64,
    pub steps: usize,
    pub k_ell: i64,
    pub centers: usize,
    /// The children's sites are exactly the parent's.
    pub union_exact: bool,
    /// Every parent site lies deep inside some child.
    pub interior_coverage: bool,
    /// `#Ξ = ((L − ℓ)/(ρℓ^ς) + 1)^d ≤ (2L/ℓ^ς)^d`.
    pub count_ok: bool,
    /// Real boxes are disjoint exactly when the centers are `k_ℓ` steps apart.
    pub disjointness_ok: bool,
}

impl CoverCheck {
    pub fn all_ok(&self) -> bool {
        self.union_exact && self.interior_coverage && self.count_ok && self.disjointness_ok
    }
}

pub fn check_cover(cover: &CoverSpec) -> CoverCheck {
    let parent = cover.parent.sites();
    let mut union = BTreeSet::new();
    for i in 0..cover.centers.len() {
        union.extend(cover.child(i).int_box().sites());
    }
    let union_exact = union.len() == parent.len() && union.iter().zip(parent.iter()).all(|(a, b)| a == b);
    let interior_coverage = parent.iter().all(|b| find_deep_child(cover, b).is_some());

    let d = cover.dim() as i32;
    let big_l = cover.parent.side;
    let ell = cover.child_side;
    let per_axis = (big_l - ell) / cover.spacing() + 1.0;
    let n = cover.centers.len() as f64;
    let count_ok = (n - per_axis.powi(d)).abs() <= 1e-9 * n
        && n <= (2.0 * big_l / ell.powf(cover.varsigma)).powi(d) * (1.0 + 1e-12);

    let k = cover.k_ell();
    let mut disjointness_ok = true;
    for i in 0..cover.centers.len() {
        for j in i + 1..cover.centers.len() {
            let disjoint = !cover.child(i).real_intersects(&cover.child(j));
            disjointness_ok &= disjoint == (cover.grid_dist(i, j) >= k);
        }
    }
    CoverCheck {
        rho: cover.rho,
        steps: cover.steps,
        k_ell: k,
        centers: cover.centers.len(),
        union_exact,
        interior_coverage,
        count_ok,
        disjointness_ok,
    }
}

/// The graphs `G_1` (overlapping real boxes) and `G_2` (disjoint but within
/// `3(k_ℓ − 1)ρℓ^ς`) on cover centers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterGraphs {
    pub k_ell: i64,
    pub spacing: f64,
    pub g1: Vec<Vec<usize>>,
    pub g2: Vec<Vec<usize>>,
}

impl ClusterGraphs {
    /// Connected components of `members` in the chosen graph, each sorted.
    pub fn components(adj: &[Vec<usize>], members: &[usize]) -> Vec<Vec<usize>> {
        let inside: BTreeSet<usize> = members.iter().copied().collect();
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for &m in &inside {
            if seen.contains(&m) {
                continue;
            }
            let mut comp = vec![m];
            let mut stack = vec![m];
            seen.insert(m);
            while let Some(i) = stack.pop() {
                for &j in &adj[i] {
                    if inside.contains(&j) && seen.insert(j) {
                        comp.push(j);
                        stack.push(j);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    pub fn is_connected(adj: &[Vec<usize>], members: &[usize]) -> bool {
        Self::components(adj, members).len() <= 1
    }
}

/// Grid sup distance between two real centers in units of `spacing`.
fn grid_steps(a: &[f64], b: &[f64], spacing: f64) -> i64 {
    (sup_dist_real(a, b) / spacing).round() as i64
}

pub fn cluster_graphs(centers: &[Vec<f64>], rho: f64, child_side: f64, varsigma: f64) -> ClusterGraphs {
    let spacing = rho * child_side.powf(varsigma);
    let k = k_ell(rho, child_side, varsigma);
    let n = centers.len();
    let mut g1 = vec![Vec::new(); n];
    let mut g2 = vec![Vec::new(); n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let s = grid_steps(&centers[i], &centers[j], spacing);
            if (1..k).contains(&s) {
                g1[i].push(j);
            } else if s >= k && s <= 3 * (k - 1) {
                g2[i].push(j);
            }
        }
    }
    ClusterGraphs {
        k_ell: k,
        spacing,
        g1,
        g2,
    }
}

/// Buffered subset `Υ` built around a `G_2`-connected set of bad centers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BufferedSubset {
    /// `Φ`: the bad centers (cover indices).
    pub component: Vec<usize>,
    /// `Φ̃`: centers within `ρℓ` of `Φ`.
    pub phi_tilde: Vec<usize>,
    /// `G_Υ = ∂_ex^{G_1}Φ̃` as cover indices.
    pub buffer_indices: Vec<usize>,
    pub buffer_centers: Vec<Vec<f64>>,
    /// `Υ`.
    pub region: SiteSet,
    /// `Υ̂ = Υ ∖ Υ̃`.
    pub core: SiteSet,
    /// `Υ̃_τ`: union of the `2ℓ_τ` interiors of buffer boxes relative to `Υ`.
    pub buffer_interior: SiteSet,
    /// `∂_in^{Λ_L}Υ`.
    pub parent_interior_boundary: SiteSet,
    /// Every site of `∂_in^{Λ_L}Υ` lies in `Υ̃_τ`.
    pub buffer_condition_ok: bool,
    /// `Φ̃` is connected in `G_1`.
    pub phi_tilde_g1_connected: bool,
    /// `Υ` is connected in `Z^d`.
    pub connected: bool,
    pub diameter: i64,
    /// Filled in once the spacing of `H_Υ` has been examined.
    pub level_spacing_ok: Option<bool>,
}

impl BufferedSubset {
    pub fn diameter_bound(&self, child_side: f64) -> f64 {
        5.0 * child_side * self.component.len() as f64
    }
}

/// Builds `Υ_Φ` from a `G_2`-connected component `Φ` of cover centers.
/// `ell_tau` is `ℓ_τ = ⌊ℓ^τ⌋`.
pub fn build_buffered_subset(
    component: &[usize],
    cover: &CoverSpec,
    graphs: &ClusterGraphs,
    ell_tau: i64,
) -> Result<BufferedSubset> {
    if component.is_empty() {
        return Err(Error::param("component", "must be nonempty"));
    }
    if !ClusterGraphs::is_connected(&graphs.g2, component) {
        return Err(Error::NotConnected);
    }
    let n = cover.centers.len();
    let ell = cover.child_side;
    let reach = cover.rho * ell;
    let phi_tilde: Vec<usize> = (0..n)
        .filter(|&b| {
            component.iter().any(|&a| {
                sup_dist_real(&cover.centers[a], &cover.centers[b]) <= reach + tol_for(reach)
            })
        })
        .collect();
    let in_tilde: BTreeSet<usize> = phi_tilde.iter().copied().collect();
    let buffer_indices: Vec<usize> = (0..n)
        .filter(|b| !in_tilde.contains(b))
        .filter(|&b| phi_tilde.iter().any(|a| graphs.g1[*a].contains(&b)))
        .collect();

    let dim = cover.dim();
    let mut all = BTreeSet::new();
    for &i in phi_tilde.iter().chain(&buffer_indices) {
        all.extend(cover.child(i).int_box().sites());
    }
    let region = SiteSet::from_sorted_unchecked(dim, all.into_iter().collect());

    let mut tilde = BTreeSet::new();
    let mut tilde_tau = BTreeSet::new();
    let r = 2 * ell_tau;
    for &i in &buffer_indices {
        let child = cover.child(i).sites();
        tilde.extend(child.iter().cloned());
        tilde_tau.extend(interior_radius(&child, &region, r).sites().iter().cloned());
    }
    let tilde = SiteSet::from_sorted_unchecked(dim, tilde.into_iter().collect());
    let buffer_interior = SiteSet::from_sorted_unchecked(dim, tilde_tau.into_iter().collect());
    let core = region.difference(&tilde);

    let parent_sites = cover.parent.sites();
    let parent_interior_boundary = boundary(&region, &parent_sites)?.interior;
    let buffer_condition_ok = parent_interior_boundary.is_subset_of(&buffer_interior);

    let diameter = region.diameter();
    let out = BufferedSubset {
        component: component.to_vec(),
        phi_tilde_g1_connected: ClusterGraphs::is_connected(&graphs.g1, &phi_tilde),
        buffer_centers: buffer_indices.iter().map(|&i| cover.centers[i].clone()).collect(),
        phi_tilde,
        buffer_indices,
        connected: region.is_connected(),
        region,
        core,
        buffer_interior,
        parent_interior_boundary,
        buffer_condition_ok,
        diameter,
        level_spacing_ok: None,
    };
    assert!(
        out.diameter as f64 <= out.diameter_bound(ell),
        "buffered subset diameter {} exceeds 5ℓ|Φ| = {}",
        out.diameter,
        out.diameter_bound(ell)
    );
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seg(lo: i64, hi: i64) -> SiteSet {
        SiteSet::segment(lo, hi)
    }

    fn ones(s: &SiteSet) -> Vec<i64> {
        s.iter().map(|x| x[0]).collect()
    }

    #[test]
    fn box_sites_examples() {
        let b = LatticeBox::new(vec![0.0], 3.0).unwrap();
        assert_eq!(ones(&b.sites()), vec![-1, 0, 1]);
        let b = LatticeBox::new(vec![0.25], 2.5).unwrap();
        assert_eq!(ones(&b.sites()), vec![-1, 0, 1]);
        let b = LatticeBox::new(vec![0.0, 0.0], 2.0).unwrap();
        assert_eq!(b.sites().len(), 9);
        assert!(LatticeBox::new(vec![0.0], 0.0).is_err());
        assert!(LatticeBox::new(vec![0.0], -1.0).is_err());
    }

    #[test]
    fn box_sites_lexicographic() {
        let b = LatticeBox::new(vec![0.5, 0.0], 3.0).unwrap();
        let s = b.sites();
        assert!(s.sites().windows(2).all(|w| w[0] < w[1]));
        assert_eq!(s.sites()[0], vec![-1, -1]);
    }

    #[test]
    fn boundary_examples() {
        let theta = seg(-2, 3);
        let phi = seg(0, 1);
        let bd = boundary(&phi, &theta).unwrap();
        assert_eq!(bd.edges, vec![(vec![0], vec![-1]), (vec![1], vec![2])]);
        assert_eq!(ones(&bd.exterior), vec![-1, 2]);
        assert_eq!(ones(&bd.interior), vec![0, 1]);

        let bd = boundary(&theta, &theta).unwrap();
        assert!(bd.edges.is_empty() && bd.exterior.is_empty() && bd.interior.is_empty());

        let big = LatticeBox::new(vec![0.0, 0.0], 6.0).unwrap().sites();
        let one = SiteSet::new(2, vec![vec![0, 0]]).unwrap();
        assert_eq!(boundary(&one, &big).unwrap().edges.len(), 4);

        assert!(boundary(&seg(0, 5), &seg(0, 3)).is_err());
    }

    #[test]
    fn interior_examples() {
        let theta = seg(-5, 5);
        let phi = seg(-2, 2);
        assert_eq!(ones(&interior(&phi, &theta, 1.0).unwrap()), vec![-1, 0, 1]);
        assert_eq!(ones(&interior(&phi, &theta, 2.9).unwrap()), vec![0]);
        assert_eq!(interior(&theta, &theta, 7.0).unwrap(), theta);
        assert!(interior(&phi, &theta, 0.5).is_err());
        let inb = interior_boundary_t(&phi, &theta, 1.0).unwrap();
        assert_eq!(ones(&inb), vec![-2, 2]);
        let exb = exterior_boundary_t(&phi, &theta, 1.0).unwrap();
        assert_eq!(ones(&exb), vec![-3, 3]);
        assert_eq!(ones(&boundary_shell_t(&phi, &theta, 1.0).unwrap()), vec![-3, -2, 2, 3]);
    }

    #[test]
    fn cover_example() {
        let parent = LatticeBox::new(vec![0.0], 10.0).unwrap();
        let c = suitable_cover(&parent, 4.0, 0.5, None).unwrap();
        assert!((c.rho - 0.75).abs() < 1e-15);
        let xs: Vec<f64> = c.centers.iter().map(|v| v[0]).collect();
        assert_eq!(xs, vec![-3.0, -1.5, 0.0, 1.5, 3.0]);
        let mut union = BTreeSet::new();
        for i in 0..c.centers.len() {
            union.extend(c.child(i).int_box().sites());
        }
        let union: Vec<i64> = union.into_iter().map(|s| s[0]).collect();
        assert_eq!(union, (-5..=5).collect::<Vec<_>>());

        let idx = cover_interior_assignment(&c, &[5]).unwrap();
        assert_eq!(c.centers[idx], vec![3.0]);
        let idx = cover_interior_assignment(&c, &[0]).unwrap();
        assert!(c.child(idx).contains(&[0]));
        assert!(cover_interior_assignment(&c, &[6]).is_err());

        let g = cluster_graphs(&c.centers, c.rho, 4.0, 0.5);
        assert_eq!(g.k_ell, 3);
        assert_eq!(c.k_ell(), 3);
        assert!(check_cover(&c).all_ok());
    }

    #[test]
    fn cover_rejects_bad_inputs() {
        let parent = LatticeBox::new(vec![0.0], 10.0).unwrap();
        assert!(suitable_cover(&parent, 6.0, 0.5, None).is_err());
        assert!(suitable_cover(&parent, 4.0, 1.0, None).is_err());
        assert!(suitable_cover(&parent, 4.0, 0.5, Some(0.8)).is_err());
        let c = suitable_cover(&parent, 4.0, 0.5, Some(0.75)).unwrap();
        assert_eq!(c.steps, 2);
    }

    #[test]
    fn cover_at_half_side() {
        for &(big_l, s) in &[(8.0, 0.5), (10.0, 0.3), (20.0, 0.7)] {
            let parent = LatticeBox::new(vec![0.0, 0.0], big_l).unwrap();
            let c = suitable_cover(&parent, big_l / 2.0, s, None).unwrap();
            assert!((0.5..=1.0).contains(&c.rho));
            let mut union = BTreeSet::new();
            for i in 0..c.centers.len() {
                union.extend(c.child(i).int_box().sites());
            }
            assert_eq!(union.len(), parent.sites().len());
        }
    }

    #[test]
    fn corner_assignment_2d() {
        let parent = LatticeBox::new(vec![0.0, 0.0], 10.0).unwrap();
        let c = suitable_cover(&parent, 4.0, 0.5, None).unwrap();
        let idx = cover_interior_assignment(&c, &[-5, 5]).unwrap();
        assert!(c.child(idx).contains(&[-5, 5]));
    }

    #[test]
    fn graph_edges_match_disjointness() {
        let parent = LatticeBox::new(vec![0.0], 10.0).unwrap();
        let c = suitable_cover(&parent, 4.0, 0.5, None).unwrap();
        let g = cluster_graphs(&c.centers, c.rho, 4.0, 0.5);
        for i in 0..c.centers.len() {
            for j in 0..c.centers.len() {
                if i == j {
                    continue;
                }
                let overlap = c.child(i).real_intersects(&c.child(j));
                assert_eq!(g.g1[i].contains(&j), overlap);
                let far = sup_dist_real(&c.centers[i], &c.centers[j]) >= g.k_ell as f64 * g.spacing - 1e-12;
                assert_eq!(!overlap, far);
            }
        }
        let single = cluster_graphs(&c.centers[..1], c.rho, 4.0, 0.5);
        assert!(single.g1[0].is_empty() && single.g2[0].is_empty());
    }

    #[test]
    fn buffered_singleton() {
        let parent = LatticeBox::new(vec![0.0], 40.0).unwrap();
        let c = suitable_cover(&parent, 8.0, 0.5, None).unwrap();
        let g = cluster_graphs(&c.centers, c.rho, 8.0, 0.5);
        let mid = c.centers.iter().position(|a| a[0] == 0.0).unwrap();
        let b = build_buffered_subset(&[mid], &c, &g, 2).unwrap();
        assert!(c.child(mid).sites().is_subset_of(&b.region));
        assert!(b.connected);
        assert!(b.diameter as f64 <= 5.0 * 8.0);
        let tilde: BTreeSet<Site> = b
            .buffer_indices
            .iter()
            .flat_map(|&i| c.child(i).int_box().sites())
            .collect();
        assert_eq!(b.core.len() + tilde.len(), b.region.len());
    }

    #[test]
    fn buffered_requires_g2_connected() {
        let parent = LatticeBox::new(vec![0.0], 80.0).unwrap();
        let c = suitable_cover(&parent, 8.0, 0.5, None).unwrap();
        let g = cluster_graphs(&c.centers, c.rho, 8.0, 0.5);
        let last = c.centers.len() - 1;
        assert!(matches!(
            build_buffered_subset(&[0, last], &c, &g, 2),
            Err(Error::NotConnected)
        ));
    }

    #[test]
    fn buffered_pair_tilde_g1_connected() {
        // ρ = 1 configuration: spacing ℓ^ς = 3, ℓ = 9, L = 45.
        let parent = LatticeBox::new(vec![0.0], 45.0).unwrap();
        let c = suitable_cover(&parent, 9.0, 0.5, None).unwrap();
        assert!((c.rho - 1.0).abs() < 1e-12);
        let g = cluster_graphs(&c.centers, c.rho, 9.0, 0.5);
        let mid = c.centers.len() / 2;
        let partner = g.g2[mid][0];
        let b = build_buffered_subset(&[mid.min(partner), mid.max(partner)], &c, &g, 1).unwrap();
        assert!(b.phi_tilde_g1_connected);
        assert!(b.connected);
    }

    #[test]
    fn set_algebra() {
        let a = seg(0, 4);
        let b = seg(3, 6);
        assert_eq!(ones(&a.union(&b)), (0..=6).collect::<Vec<_>>());
        assert_eq!(ones(&a.difference(&b)), vec![0, 1, 2]);
        assert_eq!(ones(&a.intersection(&b)), vec![3, 4]);
        assert_eq!(a.diameter(), 4);
        assert!(a.is_connected());
        assert!(!SiteSet::new(1, vec![vec![0], vec![2]]).unwrap().is_connected());
        assert_eq!(s_d(2), 8.0);
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        fn subset_of(theta: &SiteSet, mask: &[bool]) -> SiteSet {
            let sites = theta.iter().zip(mask).filter(|(_, &m)| m).map(|(s, _)| s.clone()).collect();
            SiteSet::new(theta.dim(), sites).unwrap()
        }

        proptest! {
            #[test]
            fn cover_structure(
                d in 1usize..=2,
                ell in 2.0f64..9.0,
                ratio in 2.0f64..4.0,
                varsigma in 0.3f64..0.8,
                shift in -1.0f64..1.0,
            ) {
                let big_l = ell * ratio;
                let parent = LatticeBox::new(vec![shift; d], big_l).unwrap();
                let a = (big_l - ell) / (2.0 * ell.powf(varsigma));
                prop_assume!(a / a.ceil().max(1.0) >= 0.5);
                let c = suitable_cover(&parent, ell, varsigma, None).unwrap();
                prop_assert!(check_cover(&c).all_ok(), "{:?}", check_cover(&c));
            }

            #[test]
            fn boundary_partition(
                mask in proptest::collection::vec(any::<bool>(), 49),
                t in 1.0f64..4.0,
            ) {
                let theta = LatticeBox::new(vec![0.0, 0.0], 6.0).unwrap().sites();
                let phi = subset_of(&theta, &mask);
                let b = boundary(&phi, &theta).unwrap();
                prop_assert!(b.interior.is_subset_of(&phi));
                prop_assert!(b.exterior.intersection(&phi).is_empty());
                let deep = interior(&phi, &theta, t).unwrap();
                let rim = interior_boundary_t(&phi, &theta, t).unwrap();
                prop_assert!(deep.intersection(&rim).is_empty());
                prop_assert_eq!(deep.union(&rim), phi.clone());
                // Interior boundary sites sit next to the complement.
                prop_assert!(b.interior.is_subset_of(&rim));
                let ex = exterior_boundary_t(&phi, &theta, t).unwrap();
                prop_assert!(ex.intersection(&phi).is_empty());
                prop_assert!(b.exterior.is_subset_of(&ex));
            }

            #[test]
            fn interior_shrinks_with_t(mask in proptest::collection::vec(any::<bool>(), 30)) {
                let theta = SiteSet::segment(0, 29);
                let phi = subset_of(&theta, &mask);
                let mut prev = phi.clone();
                for t in 1..6 {
                    let cur = interior(&phi, &theta, t as f64).unwrap();
                    prop_assert!(cur.is_subset_of(&prev));
                    prev = cur;
                }
            }
        }
    }
}
