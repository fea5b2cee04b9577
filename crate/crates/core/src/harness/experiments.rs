//! Trial bodies and summaries for each experiment.

use serde::{Deserialize, Serialize};

use crate::calculus::{
    check_green_decay, energy_grid, regular_report, BoundId, BoundReport, BoundSummary, GreenDecaySetup,
};
use crate::error::{Error, Result};
use crate::exponents::{bad_box_budget, ExponentSet};
use crate::geometry::{
    boundary_shell_t, build_buffered_subset, cluster_graphs, interior, suitable_cover, BufferedSubset,
    ClusterGraphs, CoverSpec, LatticeBox, SiteSet,
};
use crate::operator::{restrict, sample_hamiltonian, Distribution, DisorderSpec, FiniteHamiltonian};
use crate::spectral::{
    localizing_verdict, match_eigenvalues, scale_tau, selected_indices, spacing_threshold, Eigensystem,
    EnergyInterval, LocalizationVerdict, MatchParams, VerdictScale,
};

use super::config::{ExperimentConfig, ExperimentKind};
use super::records::{SummaryRow, TrialRecord};
use super::runner;
use super::stats::ProbabilityEstimate;

/// Configuration with the derived quantities every trial needs.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub cfg: ExperimentConfig,
    pub spec: DisorderSpec,
    pub interval: Option<EnergyInterval>,
}

impl Prepared {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        let interval = match cfg.experiment {
            ExperimentKind::Spacing | ExperimentKind::Lifshitz => None,
            _ => Some(cfg.energy_interval()?),
        };
        Ok(Self {
            cfg: cfg.clone(),
            spec: cfg.disorder_spec(),
            interval,
        })
    }

    fn e(&self) -> &ExponentSet {
        &self.cfg.exponents
    }

    fn interval(&self) -> EnergyInterval {
        self.interval.expect("interval resolved for this experiment")
    }

    fn m(&self) -> f64 {
        self.cfg.rates.as_ref().map_or(0.0, |r| r.m)
    }

    fn m_eff(&self) -> f64 {
        self.cfg.rates.as_ref().map_or(0.0, |r| r.m * r.effective_factor)
    }

    fn record(&self, trial: u64, box_id: impl Into<String>) -> TrialRecord {
        TrialRecord::new(self.cfg.experiment.name(), trial, self.cfg.master_seed, box_id)
    }

    /// Sweep entry and side for a flattened sweep index.
    fn sweep(&self, trial: u64) -> (usize, f64) {
        let k = (trial / self.cfg.trials) as usize;
        (k, self.cfg.boxes.sides.as_ref().expect("validated")[k])
    }
}

fn box_id(center: &[f64], side: f64) -> String {
    let c: Vec<String> = center.iter().map(|x| format!("{x}")).collect();
    format!("L={side}@({})", c.join(","))
}

fn sampled_box(p: &Prepared, center: &[f64], side: f64, trial: u64) -> Result<(FiniteHamiltonian, Eigensystem)> {
    let region = LatticeBox::new(center.to_vec(), side)?.sites();
    let h = sample_hamiltonian(&region, &p.spec, trial)?;
    let es = Eigensystem::of(&h)?;
    Ok((h, es))
}

/// Runs one trial of the configured experiment.
pub fn trial(p: &Prepared, i: u64) -> Result<TrialRecord> {
    match p.cfg.experiment {
        ExperimentKind::Start => start_trial(p, i),
        ExperimentKind::Induction => induction_trial(p, i),
        ExperimentKind::Bridge => bridge_trial(p, i),
        ExperimentKind::Spacing => spacing_trial(p, i),
        ExperimentKind::Lifshitz => lifshitz_trial(p, i),
        ExperimentKind::Twobox => twobox_trial(p, i),
        ExperimentKind::Matching => matching_trial(p, i),
    }
}

/// Summary rows for a finished run.
pub fn summarize(p: &Prepared, records: &[TrialRecord]) -> Result<Vec<SummaryRow>> {
    let name = p.cfg.experiment.name();
    match p.cfg.experiment {
        ExperimentKind::Start => {
            let e = localizing_estimate(p, records)?;
            Ok(vec![SummaryRow::from_estimate(name, box_id(&p.cfg.center(), p.cfg.side()?), &e)
                .with_note("bound 1 - exp(-L^zeta) reported, not asserted")])
        }
        ExperimentKind::Spacing => Ok(spacing_points(p, records)?
            .iter()
            .map(|s| SummaryRow::from_estimate(name, format!("L={}", s.side), &s.estimate))
            .collect()),
        ExperimentKind::Lifshitz => {
            let mut rows = Vec::new();
            for pt in lifshitz_points(p, records)? {
                for (c, e) in &pt.curve {
                    rows.push(SummaryRow::from_estimate(name, format!("L={} c={c}", pt.side), e));
                }
                let note = match pt.largest_c {
                    Some(c) => format!("largest c = {c}; near-bottom = {}", pt.near_bottom),
                    None => format!("no c on the grid; near-bottom = {}", pt.near_bottom),
                };
                let last = rows.pop().expect("nonempty curve");
                rows.push(last.with_note(note));
            }
            Ok(rows)
        }
        ExperimentKind::Induction => {
            let s = induction_summary(records)?;
            let mut rows = vec![
                SummaryRow::from_estimate(name, "events held", &s.events)
                    .with_note(format!("B_N {} / S_N {}", s.b_n, s.s_n)),
                SummaryRow::from_estimate(name, "direct verdict", &s.verdict),
            ];
            if let Some(imp) = &s.implication {
                rows.push(
                    SummaryRow::from_estimate(name, "implication", imp)
                        .with_note(format!("failures = {}", s.implication_failures)),
                );
            }
            if let Some(b) = &s.bridge {
                rows.push(
                    SummaryRow::from_estimate(name, "green bridge", b)
                        .with_note(format!("failures = {}", s.bridge_failures)),
                );
            }
            Ok(rows)
        }
        ExperimentKind::Bridge => {
            let s = induction_summary(records)?;
            let mut rows = vec![SummaryRow::from_estimate(name, "direct verdict", &s.verdict)];
            if let Some(b) = &s.bridge {
                rows.push(
                    SummaryRow::from_estimate(name, "green bridge", b)
                        .with_note(format!("failures = {}", s.bridge_failures)),
                );
            }
            Ok(rows)
        }
        ExperimentKind::Twobox => {
            let (e, degenerate) = twobox_estimate(records)?;
            Ok(vec![SummaryRow::from_estimate(name, "either/or regular", &e)
                .with_note(format!("grid-degenerate trials = {degenerate}"))])
        }
        ExperimentKind::Matching => {
            let s = matching_summary(records)?;
            Ok(vec![SummaryRow::from_estimate(name, "all selected pairs within bound", &s.trials)
                .with_note(format!(
                    "pairs = {}, failures = {}, failures with localizing inner box = {}",
                    s.pairs, s.failures, s.hypothesis_failures
                ))])
        }
    }
}

// ---------------------------------------------------------------- start

fn start_trial(p: &Prepared, i: u64) -> Result<TrialRecord> {
    let e = p.e();
    let side = p.cfg.side()?;
    let center = p.cfg.center();
    let (_, es) = sampled_box(p, &center, side, i)?;
    let iv = p.interval();
    let v = localizing_verdict(&es, p.m(), &iv, &iv, VerdictScale { side, beta: e.beta, tau: e.tau })?;
    let mut r = p.record(i, box_id(&center, side));
    r.achieved_rate = Some(v.witness_rate);
    r.level_spacing = Some(v.level_spacing);
    r.ground_state_energy = Some(es.eigenvalues[0]);
    r.success = Some(v.overall);
    r.put("eigenvalues_in_interval", v.per_eigenvalue.iter().filter(|row| row.in_j).count());
    r.verdict = Some(v);
    Ok(r)
}

fn localizing_estimate(p: &Prepared, records: &[TrialRecord]) -> Result<ProbabilityEstimate> {
    let wins = records.iter().filter(|r| r.success == Some(true)).count() as u64;
    let bound = 1.0 - (-p.cfg.side()?.powf(p.e().zeta)).exp();
    ProbabilityEstimate::wilson(wins, records.len() as u64, Some(bound))
}

/// Frequency of `(m, I)`-localizing boxes, compared with `1 − e^{−L^ζ}`.
pub fn estimate_localizing_probability(cfg: &ExperimentConfig) -> Result<ProbabilityEstimate> {
    let p = Prepared::new(cfg)?;
    localizing_estimate(&p, &runner::collect(cfg)?)
}

// ---------------------------------------------------------------- spacing

/// `Y_μ = 2^{2α−1} K̃² (diam supp + 2d + 1)` for the law `g·μ`, with
/// `K̃ = K` when `α = 1` and `8K` otherwise.
pub fn y_mu(spec: &DisorderSpec, d: usize) -> f64 {
    let (alpha, k) = spec.holder();
    let kt = if alpha == 1.0 { k } else { 8.0 * k };
    2f64.powf(2.0 * alpha - 1.0) * kt * kt * (spec.diam_support() + 2.0 * d as f64 + 1.0)
}

/// `1 − Y_μ e^{−(2α−1)L^β} |Θ|²`, the level-spacing probability bound.
pub fn spacing_bound(spec: &DisorderSpec, d: usize, side: f64, beta: f64, sites: usize) -> f64 {
    let (alpha, _) = spec.holder();
    let n = sites as f64;
    1.0 - y_mu(spec, d) * (-(2.0 * alpha - 1.0) * side.powf(beta)).exp() * n * n
}

fn spacing_trial(p: &Prepared, i: u64) -> Result<TrialRecord> {
    let (_, side) = p.sweep(i);
    let center = p.cfg.center();
    let (_, es) = sampled_box(p, &center, side, i)?;
    let mut r = p.record(i, box_id(&center, side));
    let ok = crate::spectral::level_spacing_check(&es, side, p.e().beta);
    r.level_spacing = Some(ok);
    r.success = Some(ok);
    r.ground_state_energy = Some(es.eigenvalues[0]);
    r.put("side", side);
    r.put("sites", es.len());
    r.put("min_gap", es.min_gap().min(f64::MAX));
    r.put("threshold", spacing_threshold(side, p.e().beta));
    Ok(r)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpacingPoint {
    pub side: f64,
    pub sites: usize,
    pub y_mu: f64,
    pub estimate: ProbabilityEstimate,
}

fn spacing_points(p: &Prepared, records: &[TrialRecord]) -> Result<Vec<SpacingPoint>> {
    let sides = p.cfg.sides()?;
    let mut out = Vec::with_capacity(sides.len());
    for (k, &side) in sides.iter().enumerate() {
        let rows: Vec<&TrialRecord> = records
            .iter()
            .filter(|r| (r.trial_index / p.cfg.trials) as usize == k)
            .collect();
        let sites = LatticeBox::new(p.cfg.center(), side)?.sites().len();
        let wins = rows.iter().filter(|r| r.success == Some(true)).count() as u64;
        let bound = spacing_bound(&p.spec, p.cfg.dim, side, p.e().beta, sites);
        out.push(SpacingPoint {
            side,
            sites,
            y_mu: y_mu(&p.spec, p.cfg.dim),
            estimate: ProbabilityEstimate::wilson(wins, rows.len() as u64, Some(bound))?,
        });
    }
    Ok(out)
}

/// Empirical level-spacing frequency per side against the analytic bound.
pub fn level_spacing_experiment(cfg: &ExperimentConfig) -> Result<Vec<SpacingPoint>> {
    if cfg.experiment != ExperimentKind::Spacing {
        return Err(Error::param("experiment", "expected a spacing configuration"));
    }
    let p = Prepared::new(cfg)?;
    spacing_points(&p, &runner::collect(cfg)?)
}

// ---------------------------------------------------------------- Lifshitz

fn lifshitz_trial(p: &Prepared, i: u64) -> Result<TrialRecord> {
    let (_, side) = p.sweep(i);
    let center = p.cfg.center();
    let (_, es) = sampled_box(p, &center, side, i)?;
    let e0 = p.cfg.spectral_bottom()?;
    let mut r = p.record(i, box_id(&center, side));
    r.ground_state_energy = Some(es.eigenvalues[0]);
    r.put("side", side);
    r.put("bottom", e0);
    r.put("excess", es.eigenvalues[0] - e0);
    Ok(r)
}

/// Tolerance below which a ground state counts as sitting on the bottom.
const NEAR_BOTTOM: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LifshitzPoint {
    pub side: f64,
    pub bottom: f64,
    /// `(c, P{E_gs > E_0 + c L^{−2ζ/d}})`, compared with `1 − e^{−L^ζ}`.
    pub curve: Vec<(f64, ProbabilityEstimate)>,
    /// Largest `c` on the grid whose estimate reaches the bound.
    pub largest_c: Option<f64>,
    /// Ground states within `1e−12` of `E_0`.
    pub near_bottom: u64,
}

fn lifshitz_points(p: &Prepared, records: &[TrialRecord]) -> Result<Vec<LifshitzPoint>> {
    let sides = p.cfg.sides()?;
    let zeta = p.e().zeta;
    let d = p.cfg.dim as f64;
    let bottom = p.cfg.spectral_bottom()?;
    let mut out = Vec::with_capacity(sides.len());
    for (k, &side) in sides.iter().enumerate() {
        let gs: Vec<f64> = records
            .iter()
            .filter(|r| (r.trial_index / p.cfg.trials) as usize == k)
            .filter_map(|r| r.ground_state_energy)
            .collect();
        let bound = 1.0 - (-side.powf(zeta)).exp();
        let scale = side.powf(-2.0 * zeta / d);
        let mut curve = Vec::new();
        let mut largest = None;
        for &c in &p.cfg.grid.c_values {
            let level = bottom + c * scale;
            let wins = gs.iter().filter(|&&g| g > level).count() as u64;
            let est = ProbabilityEstimate::wilson(wins, gs.len() as u64, Some(bound))?;
            if est.estimate >= bound {
                largest = Some(largest.map_or(c, |x: f64| x.max(c)));
            }
            curve.push((c, est));
        }
        out.push(LifshitzPoint {
            side,
            bottom,
            curve,
            largest_c: largest,
            near_bottom: gs.iter().filter(|&&g| g - bottom <= NEAR_BOTTOM).count() as u64,
        });
    }
    Ok(out)
}

/// Probability that the ground state clears `E_0 + c L^{−2ζ/d}`, per side and `c`.
pub fn lifshitz_experiment(cfg: &ExperimentConfig) -> Result<Vec<LifshitzPoint>> {
    if cfg.experiment != ExperimentKind::Lifshitz {
        return Err(Error::param("experiment", "expected a Lifshitz configuration"));
    }
    let p = Prepared::new(cfg)?;
    lifshitz_points(&p, &runner::collect(cfg)?)
}

/// Smallest `g` with `(L+1)^d K (B/g)^α ≤ e^{−L^ζ}`.
pub fn high_disorder_threshold(b: f64, zeta: f64, l: f64, law: &Distribution, d: usize) -> Result<f64> {
    law.validate()?;
    let supp = law.support();
    if supp[0].0 < 0.0 || supp[0].0 > 0.0 {
        return Err(Error::param("law", "support must lie in [0, ∞) and contain 0"));
    }
    if !(b >= 0.0 && l > 0.0) {
        return Err(Error::param("B", "need B ≥ 0 and L > 0"));
    }
    let (alpha, k) = law.holder();
    let n = (l + 1.0).powi(d as i32);
    Ok(b * (n * k * l.powf(zeta).exp()).powf(1.0 / alpha))
}

// ---------------------------------------------------------------- induction

/// Largest set of pairwise disjoint child boxes among `bad`, searched until
/// `cap` are found.
fn max_disjoint(bad: &[usize], cover: &CoverSpec, k: i64, cap: usize) -> Vec<usize> {
    fn go(
        cands: &[usize],
        chosen: &mut Vec<usize>,
        best: &mut Vec<usize>,
        cap: usize,
        apart: &dyn Fn(usize, usize) -> bool,
    ) {
        if chosen.len() > best.len() {
            *best = chosen.clone();
        }
        for (pos, &c) in cands.iter().enumerate() {
            if best.len() >= cap || chosen.len() + cands.len() - pos <= best.len() {
                return;
            }
            let rest: Vec<usize> = cands[pos + 1..].iter().copied().filter(|&x| apart(c, x)).collect();
            chosen.push(c);
            go(&rest, chosen, best, cap, apart);
            chosen.pop();
        }
    }
    let apart = |a: usize, b: usize| cover.grid_dist(a, b) >= k;
    let mut best = Vec::new();
    go(bad, &mut Vec::new(), &mut best, cap, &apart);
    best
}

/// Eigenvalues of `H_Υ` reached from selected eigenvalues of buffer boxes.
fn buffer_images(
    subset: &BufferedSubset,
    cover: &CoverSpec,
    h_upsilon: &FiniteHamiltonian,
    es_upsilon: &Eigensystem,
    relative_to: &SiteSet,
    selection: &EnergyInterval,
    ell_tau: i64,
) -> Result<Vec<usize>> {
    let mut hit = Vec::new();
    for &a in &subset.buffer_indices {
        let sub = cover.child(a).sites();
        let es_a = Eigensystem::of(&restrict(h_upsilon, &sub)?)?;
        for k in selected_indices(&es_a, relative_to, selection, ell_tau)? {
            hit.push(es_upsilon.nearest(es_a.eigenvalues[k]));
        }
    }
    hit.sort_unstable();
    hit.dedup();
    Ok(hit)
}

/// Scales and rates shared by the buffered-subset decay checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BufferedDecayParams {
    pub interval: EnergyInterval,
    pub ell: f64,
    pub big_l: f64,
    pub exponents: ExponentSet,
    /// Effective rate used for both decay statements.
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BufferedDecayReport {
    /// `σ_B(H_Υ)`: eigenvalues of `H_Υ` in `I_ℓ` not reached from buffer boxes.
    pub sigma_b: Vec<f64>,
    /// Eigenfunctions for `σ_B(H_Υ)` on the buffer interior `Υ̃_τ`.
    pub buffer: BoundReport,
    /// Parent eigenpairs in `I_ℓ` whose separation hypothesis failed.
    pub hypothesis_failures: usize,
    /// Parent eigenfunctions deep inside `Υ`, for eigenpairs meeting the hypothesis.
    pub parent: BoundReport,
}

/// Decay of buffered-subset and parent eigenfunctions inside a buffered subset.
pub fn buffered_decay_check(
    subset: &BufferedSubset,
    cover: &CoverSpec,
    h_parent: &FiniteHamiltonian,
    es_parent: &Eigensystem,
    p: &BufferedDecayParams,
) -> Result<BufferedDecayReport> {
    let e = &p.exponents;
    let lt = scale_tau(p.ell, e.tau);
    let i_ell = p.interval.shrink(p.ell, e.kappa)?;
    let i_2ell = p.interval.shrink(2.0 * p.ell, e.kappa)?;
    let h_u = restrict(h_parent, &subset.region)?;
    let es_u = Eigensystem::of(&h_u)?;

    let g_upsilon = buffer_images(subset, cover, &h_u, &es_u, &subset.region, &i_2ell, lt)?;
    let b_idx: Vec<usize> = (0..es_u.len())
        .filter(|k| i_ell.contains(es_u.eigenvalues[*k]) && g_upsilon.binary_search(k).is_err())
        .collect();

    let mut buffer = BoundReport::new(BoundId::BufferInterior);
    for &k in &b_idx {
        let nu = es_u.eigenvalues[k];
        let bound = (-p.rate * p.interval.h(nu) * lt as f64).exp();
        let psi = es_u.vector(k);
        for y in subset.buffer_interior.iter() {
            let j = es_u.region.index_of(y).expect("buffer interior lies in Υ");
            buffer.push(&es_u.centers[k], y, psi[j].abs(), bound);
        }
    }

    let g_parent = buffer_images(subset, cover, &h_u, &es_u, &es_parent.region, &i_2ell, lt)?;
    let mut guard: Vec<f64> = g_parent.iter().chain(&b_idx).map(|&k| es_u.eigenvalues[k]).collect();
    guard.sort_by(f64::total_cmp);
    let half_gap = 0.5 * spacing_threshold(p.big_l, e.beta);
    let deep = interior(&subset.region, &es_parent.region, 2.0 * lt as f64)?;
    let shell = boundary_shell_t(&subset.region, &es_parent.region, 2.0 * lt as f64)?;
    let mut parent = BoundReport::new(BoundId::BufferedParent);
    let mut hypothesis_failures = 0;
    for k in 0..es_parent.len() {
        let lambda = es_parent.eigenvalues[k];
        if !i_ell.contains(lambda) {
            continue;
        }
        if guard.iter().any(|&nu| (lambda - nu).abs() < half_gap) || shell.is_empty() {
            hypothesis_failures += 1;
            continue;
        }
        let psi = es_parent.vector(k);
        let at = |y: &[i64]| psi[es_parent.region.index_of(y).expect("site of Λ_L")].abs();
        let shell_max = shell.iter().map(|v| at(v)).fold(0.0, f64::max);
        let bound = (-p.rate * i_ell.h(lambda) * lt as f64).exp() * shell_max;
        for y in deep.iter() {
            parent.push(&es_parent.centers[k], y, at(y), bound);
        }
    }
    Ok(BufferedDecayReport {
        sigma_b: b_idx.iter().map(|&k| es_u.eigenvalues[k]).collect(),
        buffer,
        hypothesis_failures,
        parent,
    })
}

/// Regularity at `m_eff h_I(λ)` on the grid `λ ∈ I_L` avoiding `σ(H)` by `e^{−L^β}`.
struct BridgeOutcome {
    decay: BoundSummary,
    split: BoundSummary,
    grid: usize,
    dropped: usize,
    failing_energies: usize,
}

fn green_bridge(p: &Prepared, es: &Eigensystem, h: &FiniteHamiltonian, side: f64) -> Result<BridgeOutcome> {
    let e = p.e();
    let iv = p.interval();
    let shrunk = iv.shrink(side, e.kappa)?;
    let (grid, dropped) = energy_grid(&shrunk, p.cfg.grid.points, &[&es.eigenvalues], spacing_threshold(side, e.beta));
    let setup = GreenDecaySetup {
        interval: iv,
        shrunk,
        rate: p.m_eff(),
        beta: e.beta,
        side,
        verdict_ok: true,
        split_t: p.cfg.grid.split_t.unwrap_or(1.0 / (iv.half_width * iv.half_width)),
    };
    let mut decay = BoundSummary::empty(BoundId::GreenDecay);
    let mut split = BoundSummary::empty(BoundId::Splitting);
    let mut failing = 0;
    for &lambda in &grid {
        let rep = check_green_decay(es, h, lambda, &setup)?;
        if !rep.decay.all_pass() {
            failing += 1;
        }
        decay.absorb(&rep.decay.summary());
        split.absorb(&rep.split.summary());
    }
    Ok(BridgeOutcome {
        decay,
        split,
        grid: grid.len(),
        dropped,
        failing_energies: failing,
    })
}

fn direct_verdict(p: &Prepared, es: &Eigensystem, ell: f64, side: f64) -> Result<LocalizationVerdict> {
    let e = p.e();
    let iv = p.interval();
    let j = iv.shrink(ell, e.kappa)?;
    localizing_verdict(es, p.m_eff(), &j, &iv, VerdictScale { side, beta: e.beta, tau: e.tau })
}

fn attach_bridge(p: &Prepared, r: &mut TrialRecord, es: &Eigensystem, h: &FiniteHamiltonian, side: f64, ok: bool) -> Result<()> {
    if !ok {
        r.put("bridge_ran", false);
        return Ok(());
    }
    let b = green_bridge(p, es, h, side)?;
    r.put("bridge_ran", true);
    r.put("bridge_grid", b.grid);
    r.put("bridge_dropped", b.dropped);
    r.put("bridge_failing_energies", b.failing_energies);
    r.put("bridge_ok", b.failing_energies == 0);
    r.bounds.push(b.decay);
    r.bounds.push(b.split);
    Ok(())
}

fn induction_trial(p: &Prepared, i: u64) -> Result<TrialRecord> {
    let e = *p.e();
    let ell = p.cfg.child_side()?;
    let side = p.cfg.side()?;
    let center = p.cfg.center();
    let iv = p.interval();
    let parent = LatticeBox::new(center.clone(), side)?;
    let region = parent.sites();
    let h = sample_hamiltonian(&region, &p.spec, i)?;
    let mut r = p.record(i, box_id(&center, side));

    // (a) cover and graphs.
    let cover = suitable_cover(&parent, ell, e.varsigma, None)?;
    let graphs: ClusterGraphs = cluster_graphs(&cover.centers, cover.rho, ell, e.varsigma);

    // (b) classify children.
    let child_scale = VerdictScale { side: ell, beta: e.beta, tau: e.tau };
    let mut bad = Vec::new();
    for a in 0..cover.centers.len() {
        let es_a = Eigensystem::of(&restrict(&h, &cover.child(a).sites())?)?;
        if !localizing_verdict(&es_a, p.m(), &iv, &iv, child_scale)?.overall {
            bad.push(a);
        }
    }
    let budget = bad_box_budget(ell, &e);
    let a_n = max_disjoint(&bad, &cover, graphs.k_ell, budget + 1);
    let b_n = a_n.len() <= budget;
    r.put("children", cover.centers.len());
    r.put("bad_children", bad.len());
    r.put("disjoint_bad", a_n.len());
    r.put("budget", budget);
    r.put("b_n", b_n);

    // (d) direct verdict, also the level spacing of Λ_L.
    let es = Eigensystem::of(&h)?;
    let v = direct_verdict(p, &es, ell, side)?;
    let mut s_n = v.level_spacing;

    // (c) buffered subsets.
    let mut components_note = "R = 0".to_string();
    if b_n && !a_n.is_empty() {
        let comps = ClusterGraphs::components(&graphs.g2, &a_n);
        components_note = format!("R = {}", comps.len());
        let lt = scale_tau(ell, e.tau);
        let mut covered = std::collections::BTreeSet::new();
        let mut flags = Vec::new();
        let decay_params = BufferedDecayParams {
            interval: iv,
            ell,
            big_l: side,
            exponents: e,
            rate: p.m_eff(),
        };
        let mut buffer_sum = BoundSummary::empty(BoundId::BufferInterior);
        let mut parent_sum = BoundSummary::empty(BoundId::BufferedParent);
        let mut decay_hyp_fail = 0;
        for comp in &comps {
            let mut u = build_buffered_subset(comp, &cover, &graphs, lt)?;
            covered.extend(u.phi_tilde.iter().copied());
            let h_u = restrict(&h, &u.region)?;
            let ok = crate::spectral::level_spacing(&Eigensystem::of(&h_u)?.eigenvalues, side, e.beta);
            u.level_spacing_ok = Some(ok);
            s_n &= ok;
            if ok {
                let rep = buffered_decay_check(&u, &cover, &h, &es, &decay_params)?;
                buffer_sum.absorb(&rep.buffer.summary());
                parent_sum.absorb(&rep.parent.summary());
                decay_hyp_fail += rep.hypothesis_failures;
            }
            flags.push(serde_json::json!({
                "component": u.component,
                "sites": u.region.len(),
                "diameter": u.diameter,
                "buffer_condition_ok": u.buffer_condition_ok,
                "phi_tilde_g1_connected": u.phi_tilde_g1_connected,
                "connected": u.connected,
                "level_spacing_ok": ok,
            }));
        }
        let good_outside = bad.iter().all(|b| covered.contains(b));
        r.put("good_outside_clusters", good_outside);
        r.put("buffered_subsets", flags);
        r.put("buffer_decay_hypothesis_failures", decay_hyp_fail);
        r.bounds.push(buffer_sum);
        r.bounds.push(parent_sum);
    } else if !b_n {
        components_note = "B_N failed; buffered stage skipped".to_string();
    }
    r.put("components", components_note);
    r.put("s_n", s_n);

    let events = b_n && s_n;
    r.hypothesis_ok = Some(events);
    r.success = Some(v.overall);
    r.put("implication_ok", !events || v.overall);
    r.level_spacing = Some(v.level_spacing);
    r.achieved_rate = Some(v.witness_rate);
    r.ground_state_energy = Some(es.eigenvalues[0]);
    attach_bridge(p, &mut r, &es, &h, side, v.overall)?;
    r.verdict = Some(v);
    Ok(r)
}

fn bridge_trial(p: &Prepared, i: u64) -> Result<TrialRecord> {
    let ell = p.cfg.child_side()?;
    let side = p.cfg.side()?;
    let center = p.cfg.center();
    let (h, es) = sampled_box(p, &center, side, i)?;
    let v = direct_verdict(p, &es, ell, side)?;
    let mut r = p.record(i, box_id(&center, side));
    r.hypothesis_ok = Some(v.overall);
    r.success = Some(v.overall);
    r.level_spacing = Some(v.level_spacing);
    r.achieved_rate = Some(v.witness_rate);
    r.ground_state_energy = Some(es.eigenvalues[0]);
    attach_bridge(p, &mut r, &es, &h, side, v.overall)?;
    r.verdict = Some(v);
    Ok(r)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InductionSummary {
    pub trials: u64,
    pub b_n: u64,
    pub s_n: u64,
    /// Trials where both events held.
    pub events: ProbabilityEstimate,
    pub verdict: ProbabilityEstimate,
    /// Verdict true among trials where the events held; `None` when no trial qualified.
    pub implication: Option<ProbabilityEstimate>,
    pub implication_failures: u64,
    /// Boxes whose verdict passed and whose full λ grid was regular.
    pub bridge: Option<ProbabilityEstimate>,
    pub bridge_failures: u64,
}

pub fn induction_summary(records: &[TrialRecord]) -> Result<InductionSummary> {
    let n = records.len() as u64;
    let count = |f: &dyn Fn(&TrialRecord) -> bool| records.iter().filter(|r| f(r)).count() as u64;
    let events = count(&|r| r.hypothesis_ok == Some(true));
    let held_and_true = count(&|r| r.hypothesis_ok == Some(true) && r.success == Some(true));
    let ran = count(&|r| r.get_bool("bridge_ran") == Some(true));
    let bridge_ok = count(&|r| r.get_bool("bridge_ok") == Some(true));
    Ok(InductionSummary {
        trials: n,
        b_n: count(&|r| r.get_bool("b_n") == Some(true)),
        s_n: count(&|r| r.get_bool("s_n") == Some(true)),
        events: ProbabilityEstimate::wilson(events, n, None)?,
        verdict: ProbabilityEstimate::wilson(count(&|r| r.success == Some(true)), n, None)?,
        implication: if events > 0 {
            Some(ProbabilityEstimate::wilson(held_and_true, events, None)?)
        } else {
            None
        },
        implication_failures: events - held_and_true,
        bridge: if ran > 0 {
            Some(ProbabilityEstimate::wilson(bridge_ok, ran, None)?)
        } else {
            None
        },
        bridge_failures: ran - bridge_ok,
    })
}

/// One multiscale step per trial, with the event bookkeeping summarized.
pub fn induction_experiment(cfg: &ExperimentConfig) -> Result<(InductionSummary, Vec<TrialRecord>)> {
    if cfg.experiment != ExperimentKind::Induction {
        return Err(Error::param("experiment", "expected an induction configuration"));
    }
    let records = runner::collect(cfg)?;
    Ok((induction_summary(&records)?, records))
}

// ---------------------------------------------------------------- two boxes

fn twobox_trial(p: &Prepared, i: u64) -> Result<TrialRecord> {
    let e = p.e();
    let side = p.cfg.side()?;
    let x1 = p.cfg.center();
    let mut x2 = x1.clone();
    x2[0] += p.cfg.boxes.separation.expect("validated");
    let (_, es1) = sampled_box(p, &x1, side, i)?;
    let (_, es2) = sampled_box(p, &x2, side, i)?;
    if es1.region.intersection(&es2.region).len() > 0 {
        return Err(Error::param("separation", "boxes are not disjoint"));
    }
    let iv = p.interval();
    let shrunk = iv.shrink(side, e.kappa)?;
    let (grid, dropped) = energy_grid(
        &shrunk,
        p.cfg.grid.points,
        &[&es1.eigenvalues, &es2.eigenvalues],
        spacing_threshold(side, e.beta),
    );
    let mut r = p.record(i, format!("{} & {}", box_id(&x1, side), box_id(&x2, side)));
    r.put("grid", grid.len());
    r.put("dropped", dropped);
    if grid.is_empty() {
        r.hypothesis_ok = Some(false);
        r.put("grid_degenerate", true);
        return Ok(r);
    }
    let mut s1 = BoundSummary::empty(BoundId::Regular);
    let mut s2 = BoundSummary::empty(BoundId::Regular);
    let mut failing = 0;
    for &lambda in &grid {
        let rate = p.m_eff() * iv.h(lambda);
        let r1 = regular_report(&es1, lambda, rate, side)?;
        let r2 = regular_report(&es2, lambda, rate, side)?;
        if !(r1.all_pass() || r2.all_pass()) {
            failing += 1;
        }
        s1.absorb(&r1.summary());
        s2.absorb(&r2.summary());
    }
    r.hypothesis_ok = Some(true);
    r.success = Some(failing == 0);
    r.put("grid_degenerate", false);
    r.put("failing_energies", failing);
    r.bounds.push(s1);
    r.bounds.push(s2);
    Ok(r)
}

fn twobox_estimate(records: &[TrialRecord]) -> Result<(ProbabilityEstimate, u64)> {
    let live: Vec<&TrialRecord> = records.iter().filter(|r| r.hypothesis_ok == Some(true)).collect();
    let degenerate = (records.len() - live.len()) as u64;
    let wins = live.iter().filter(|r| r.success == Some(true)).count() as u64;
    if live.is_empty() {
        return Err(Error::param("trials", "every trial had an empty energy grid"));
    }
    Ok((ProbabilityEstimate::wilson(wins, live.len() as u64, None)?, degenerate))
}

/// Probability that one of two disjoint boxes is regular at every grid energy.
/// Also returns the number of trials whose grid was empty.
pub fn green_twobox_experiment(cfg: &ExperimentConfig) -> Result<(ProbabilityEstimate, u64)> {
    if cfg.experiment != ExperimentKind::Twobox {
        return Err(Error::param("experiment", "expected a two-box configuration"));
    }
    twobox_estimate(&runner::collect(cfg)?)
}

// ---------------------------------------------------------------- matching

fn matching_trial(p: &Prepared, i: u64) -> Result<TrialRecord> {
    let e = p.e();
    let side = p.cfg.side()?;
    let ell = p.cfg.child_side()?;
    let center = p.cfg.center();
    let (h, es) = sampled_box(p, &center, side, i)?;
    let iv = p.interval();
    let params = MatchParams {
        interval: iv,
        selection: iv.shrink(2.0 * ell, e.kappa)?,
        m: p.m(),
        ell,
        tau: e.tau,
    };
    let child_scale = VerdictScale { side: ell, beta: e.beta, tau: e.tau };
    let (mut boxes, mut localizing, mut pairs, mut fails, mut hyp_fails) = (0, 0, 0, 0, 0);
    let mut worst: f64 = 0.0;
    let mut injective = true;
    for a in es.region.iter() {
        let sub = LatticeBox::at_site(a, ell)?.sites();
        if !sub.is_subset_of(&es.region) {
            continue;
        }
        boxes += 1;
        let inner = Eigensystem::of(&restrict(&h, &sub)?)?;
        let loc = localizing_verdict(&inner, p.m(), &iv, &iv, child_scale)?.overall;
        localizing += loc as usize;
        let rep = match_eigenvalues(&inner, &es, &params)?;
        injective &= rep.injective;
        for q in &rep.pairs {
            pairs += 1;
            worst = worst.max(q.distance / q.bound);
            if !q.pass {
                fails += 1;
                if loc {
                    hyp_fails += 1;
                }
            }
        }
    }
    let mut r = p.record(i, box_id(&center, side));
    r.hypothesis_ok = Some(localizing == boxes);
    r.success = Some(hyp_fails == 0);
    r.put("inner_boxes", boxes);
    r.put("localizing_inner_boxes", localizing);
    r.put("pairs", pairs);
    r.put("failures", fails);
    r.put("failures_localizing", hyp_fails);
    r.put("worst_ratio", worst);
    r.put("injective", injective);
    Ok(r)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchingSummary {
    /// Trials in which every pair from a localizing inner box passed.
    pub trials: ProbabilityEstimate,
    pub pairs: u64,
    pub failures: u64,
    pub hypothesis_failures: u64,
}

pub fn matching_summary(records: &[TrialRecord]) -> Result<MatchingSummary> {
    let sum = |k: &str| records.iter().filter_map(|r| r.get_f64(k)).sum::<f64>() as u64;
    let wins = records.iter().filter(|r| r.success == Some(true)).count() as u64;
    Ok(MatchingSummary {
        trials: ProbabilityEstimate::wilson(wins, records.len() as u64, None)?,
        pairs: sum("pairs"),
        failures: sum("failures"),
        hypothesis_failures: sum("failures_localizing"),
    })
}
