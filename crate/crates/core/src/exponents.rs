//! The exponent constraint system, a deterministic feasibility solver, scale
//! schedules and rate degradations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `(ξ, ζ, β, τ, γ, κ, κ′, ς)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentSet {
    pub xi: f64,
    pub zeta: f64,
    pub beta: f64,
    pub tau: f64,
    pub gamma: f64,
    pub kappa: f64,
    #[serde(default)]
    pub kappa_prime: f64,
    pub varsigma: f64,
}

/// A violated inequality, tagged with the equation it belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Violation {
    pub eq: &'static str,
    pub constraint: &'static str,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}) {}", self.eq, self.constraint)
    }
}

/// Derived quantities reported alongside a validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentReport {
    pub exponents: ExponentSet,
    pub zeta_tilde: f64,
    pub tau_tilde: f64,
    pub varrho: f64,
    pub violations: Vec<String>,
    pub valid: bool,
}

impl ExponentSet {
    /// `ζ̃ = (ζ + β)/2`.
    pub fn zeta_tilde(&self) -> f64 {
        (self.zeta + self.beta) / 2.0
    }

    /// `τ̃ = (1 + τ)/2`.
    pub fn tau_tilde(&self) -> f64 {
        (1.0 + self.tau) / 2.0
    }

    /// `ϱ = min{κ, (1−τ)/2, γτ − (γ−1)ζ̃ − 1}`.
    pub fn varrho(&self) -> f64 {
        self.kappa
            .min((1.0 - self.tau) / 2.0)
            .min(self.gamma * self.tau - (self.gamma - 1.0) * self.zeta_tilde() - 1.0)
    }

    /// `τ − γβ − κ − κ′`, the penalty exponent of several rate schedules.
    pub fn slack(&self) -> f64 {
        self.tau - self.gamma * self.beta - self.kappa - self.kappa_prime
    }

    pub fn validate(&self) -> Vec<Violation> {
        validate(self)
    }

    pub fn is_valid(&self) -> bool {
        validate(self).is_empty()
    }

    pub fn report(&self) -> ExponentReport {
        let v = validate(self);
        ExponentReport {
            exponents: *self,
            zeta_tilde: self.zeta_tilde(),
            tau_tilde: self.tau_tilde(),
            varrho: self.varrho(),
            valid: v.is_empty(),
            violations: v.iter().map(|x| x.to_string()).collect(),
        }
    }
}

/// Every inequality of the system that fails.
pub fn validate(e: &ExponentSet) -> Vec<Violation> {
    let fields = [
        e.xi,
        e.zeta,
        e.beta,
        e.tau,
        e.gamma,
        e.kappa,
        e.kappa_prime,
        e.varsigma,
    ];
    if fields.iter().any(|v| !v.is_finite()) {
        return vec![Violation {
            eq: "input",
            constraint: "all exponents finite",
        }];
    }
    let ExponentSet {
        xi,
        zeta,
        beta,
        tau,
        gamma,
        kappa,
        kappa_prime,
        varsigma,
    } = *e;
    let zt = e.zeta_tilde();
    let tt = e.tau_tilde();
    let rho = e.varrho();
    let checks: [(bool, &str, &str); 27] = [
        (0.0 < xi, "1.1", "0 < xi"),
        (xi < zeta, "1.1", "xi < zeta"),
        (zeta < beta, "1.1", "zeta < beta"),
        (beta < 1.0 / gamma, "1.1", "beta < 1/gamma"),
        (1.0 < gamma, "1.1", "1 < gamma"),
        (gamma < (zeta / xi).sqrt(), "1.1", "gamma < sqrt(zeta/xi)"),
        (gamma * beta < tau, "1.1", "gamma*beta < tau"),
        (((gamma - 1.0) * beta + 1.0) / gamma < tau, "1.1", "((gamma-1)beta+1)/gamma < tau"),
        (tau < 1.0, "1.1", "tau < 1"),
        (xi * gamma * gamma < zeta, "1.2", "xi*gamma^2 < zeta"),
        (beta < tau / gamma, "1.2", "beta < tau/gamma"),
        (tau / gamma < 1.0 / gamma, "1.2", "tau/gamma < 1/gamma"),
        (1.0 / gamma < tau, "1.2", "1/gamma < tau"),
        (1.0 < (1.0 - beta) / (tau - beta), "1.2", "1 < (1-beta)/(tau-beta)"),
        ((1.0 - beta) / (tau - beta) < gamma, "1.2", "(1-beta)/(tau-beta) < gamma"),
        (gamma < tau / beta, "1.2", "gamma < tau/beta"),
        (zeta < zt && zt < beta, "1.3", "zeta < zeta~ < beta"),
        (tau < tt && tt < 1.0, "1.3", "tau < tau~ < 1"),
        (
            (gamma - 1.0) * zt + 1.0 < (gamma - 1.0) * beta + 1.0,
            "1.4",
            "(gamma-1)zeta~+1 < (gamma-1)beta+1",
        ),
        ((gamma - 1.0) * beta + 1.0 < gamma * tau, "1.4", "(gamma-1)beta+1 < gamma*tau"),
        (0.0 < kappa && kappa < 1.0, "1.5", "0 < kappa < 1"),
        (0.0 <= kappa_prime && kappa_prime < 1.0, "1.5", "0 <= kappa' < 1"),
        (kappa + kappa_prime < tau - gamma * beta, "1.5", "kappa + kappa' < tau - gamma*beta"),
        (0.0 < rho, "1.6", "0 < varrho"),
        (rho <= kappa, "1.6", "varrho <= kappa"),
        (0.0 < varsigma, "1.7", "0 < varsigma"),
        (varsigma <= 1.0 - rho, "1.7", "varsigma <= 1 - varrho"),
    ];
    checks
        .iter()
        .filter(|c| !c.0)
        .map(|&(_, eq, constraint)| Violation { eq, constraint })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMode {
    Generic,
    /// Bottom of the spectrum: `κ′ = 2ζ/d`, feasible only for `ζ < d/(d+2)`.
    BottomOfSpectrum,
}

/// Offsets from the lower end of an open range, in fractions of its length.
const NEAR: [f64; 12] = [
    0.5, 0.35, 0.25, 0.15, 0.1, 0.05, 0.02, 0.01, 0.005, 0.002, 0.001, 0.0005,
];

/// Completes `(ξ, ζ)` to a valid exponent set by a deterministic grid search
/// maximizing `ϱ`; ties go to larger `τ`, then smaller `γ`.
pub fn solve(xi: f64, zeta: f64, d: usize, mode: SolveMode) -> Result<ExponentSet> {
    if !(0.0 < xi && xi < zeta && zeta < 1.0) {
        return Err(Error::Infeasible {
            binding: "(1.1) 0 < xi < zeta < 1".into(),
        });
    }
    if d == 0 {
        return Err(Error::param("d", "must be positive"));
    }
    let kappa_prime = match mode {
        SolveMode::Generic => 0.0,
        SolveMode::BottomOfSpectrum => {
            let bound = d as f64 / (d as f64 + 2.0);
            if zeta >= bound {
                return Err(Error::Infeasible {
                    binding: format!("(2.3) zeta < d/(d+2) = {bound}"),
                });
            }
            2.0 * zeta / d as f64
        }
    };
    let gamma_hi = (zeta / xi).sqrt().min(1.0 / zeta);
    let mut best: Option<(f64, ExponentSet)> = None;
    for &fg in &NEAR {
        let gamma = 1.0 + fg * (gamma_hi - 1.0);
        for &fb in &NEAR {
            let beta = zeta + fb * (1.0 / gamma - zeta);
            let tau_lo = (gamma * beta).max(((gamma - 1.0) * beta + 1.0) / gamma);
            for &ft in &NEAR {
                let tau = 1.0 - ft * (1.0 - tau_lo);
                let room = tau - gamma * beta - kappa_prime;
                if room <= 0.0 {
                    continue;
                }
                let kappa = (0.9 * room).min(0.99);
                let mut e = ExponentSet {
                    xi,
                    zeta,
                    beta,
                    tau,
                    gamma,
                    kappa,
                    kappa_prime,
                    varsigma: 0.5,
                };
                e.varsigma = 0.5f64.min(1.0 - e.varrho());
                if !e.is_valid() {
                    continue;
                }
                let score = e.varrho();
                let better = match &best {
                    None => true,
                    Some((s, b)) => {
                        score > *s
                            || (score == *s && (e.tau > b.tau || (e.tau == b.tau && e.gamma < b.gamma)))
                    }
                };
                if better {
                    best = Some((score, e));
                }
            }
        }
    }
    best.map(|(_, e)| e).ok_or_else(|| Error::Infeasible {
        binding: "(1.5) kappa + kappa' < tau - gamma*beta".into(),
    })
}

/// `½ log(1 + A/(4d))`.
pub fn mass_cap(a: f64, d: usize) -> f64 {
    0.5 * (1.0 + a / (4.0 * d as f64)).ln()
}

/// Factors smaller than this in distance from one end the product.
pub const PRODUCT_CUTOFF: f64 = 1e-15;

/// `∏_{k≥0} (1 − c L0^{−p γ^k})`, truncated once the next term is below
/// [`PRODUCT_CUTOFF`]. Returns the value and a bound on the neglected tail.
pub fn limit_product(l0: f64, p: f64, gamma: f64, c: f64) -> Result<(f64, f64)> {
    let ln_l0 = l0.ln();
    let mut prod = 1.0;
    let mut k = 0;
    loop {
        let x = c * (-p * gamma.powi(k) * ln_l0).exp();
        if x < PRODUCT_CUTOFF {
            // Successive terms satisfy x_{k+1} ≤ x_k^γ c^{1−γ}, so the tail is
            // dominated by a geometric series with ratio x^{γ−1}.
            let r = (x.max(f64::MIN_POSITIVE) / c.max(1.0)).powf(gamma - 1.0).min(0.5);
            return Ok((prod, prod * x / (1.0 - r)));
        }
        if x >= 1.0 {
            return Err(Error::ScaleTooSmall(format!(
                "factor 1 − {x} is not positive at level {k}: L0 too small"
            )));
        }
        prod *= 1.0 - x;
        k += 1;
        if k > 100_000 {
            return Err(Error::ScaleTooSmall("product does not converge".into()));
        }
    }
}

/// First `terms` factors of the same product.
pub fn partial_product(l0: f64, p: f64, gamma: f64, c: f64, terms: usize) -> f64 {
    let ln_l0 = l0.ln();
    (0..terms)
        .map(|k| 1.0 - c * (-p * gamma.powi(k as i32) * ln_l0).exp())
        .product()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleLevel {
    pub k: usize,
    /// `ln L_k`; `L_k` itself overflows quickly.
    pub ln_l: f64,
    pub l: f64,
    pub a: f64,
    pub m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleSchedule {
    pub l0: f64,
    pub gamma: f64,
    pub levels: Vec<ScaleLevel>,
    pub a_inf: f64,
    pub m_inf: f64,
    pub a_tail: f64,
    pub m_tail: f64,
}

/// Inputs to [`schedule`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleSpec {
    pub l0: f64,
    pub a0: f64,
    pub m0: f64,
    pub c: f64,
    pub levels: usize,
    pub d: usize,
}

/// `L_{k+1} = L_k^γ`, `A_{k+1} = A_k(1 − L_k^{−κ})`, `m_{k+1} = m_k(1 − C L_k^{−ϱ})`.
pub fn schedule(e: &ExponentSet, s: &ScheduleSpec) -> Result<ScaleSchedule> {
    if !(s.l0 >= 2.0) {
        return Err(Error::param("L0", "must be at least 2"));
    }
    let cap = mass_cap(s.a0, s.d);
    if s.m0 > cap {
        return Err(Error::MassAboveCap { mass: s.m0, cap });
    }
    let rho = e.varrho();
    let mut levels = Vec::with_capacity(s.levels);
    let (mut ln_l, mut a, mut m) = (s.l0.ln(), s.a0, s.m0);
    for k in 0..s.levels {
        levels.push(ScaleLevel {
            k,
            ln_l,
            l: ln_l.exp(),
            a,
            m,
        });
        let fa = 1.0 - (-e.kappa * ln_l).exp();
        let fm = 1.0 - s.c * (-rho * ln_l).exp();
        if fa <= 0.0 || fm <= 0.0 {
            return Err(Error::ScaleTooSmall(format!("nonpositive factor at level {k}: L0 too small")));
        }
        a *= fa;
        m *= fm;
        ln_l *= e.gamma;
    }
    let (pa, a_tail) = limit_product(s.l0, e.kappa, e.gamma, 1.0)?;
    let (pm, m_tail) = limit_product(s.l0, rho, e.gamma, s.c)?;
    Ok(ScaleSchedule {
        l0: s.l0,
        gamma: e.gamma,
        levels,
        a_inf: s.a0 * pa,
        m_inf: s.m0 * pm,
        a_tail: s.a0 * a_tail,
        m_tail: s.m0 * m_tail,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateSchedule {
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
    pub m4: f64,
    pub m5: f64,
    pub m_doubleprime: f64,
    pub big_m: f64,
}

/// Each rate at equality in its lower bound, `m(1 − C ℓ^{−exponent})`
/// (with `log ℓ` in the numerator for `m₁`).
pub fn rate_schedule(m: f64, ell: f64, e: &ExponentSet, c: f64) -> Result<RateSchedule> {
    if !(ell > 1.0) {
        return Err(Error::param("ell", "must exceed 1"));
    }
    let s = e.slack();
    let f = |penalty: f64| -> Result<f64> {
        let v = 1.0 - c * penalty;
        if v <= 0.0 {
            return Err(Error::ScaleTooSmall(format!(
                "rate factor {v} not positive at ℓ = {ell} with C = {c}"
            )));
        }
        Ok(m * v)
    };
    Ok(RateSchedule {
        m1: f(ell.ln() / ell.powf(e.tau - e.kappa - e.kappa_prime))?,
        m2: f(ell.powf(-s))?,
        m3: f(ell.powf(-(1.0 - e.tau) / 2.0))?,
        m4: f(ell.powf(-s))?,
        m5: f(ell.powf(-e.kappa.min(s)))?,
        m_doubleprime: f(ell.powf(-(1.0 - e.tau)))?,
        big_m: f(ell.powf(-e.varrho()))?,
    })
}

/// `N_ℓ = ⌊ℓ^{(γ−1)ζ̃}⌋`.
pub fn bad_box_budget(ell: f64, e: &ExponentSet) -> usize {
    ell.powf((e.gamma - 1.0) * e.zeta_tilde()).floor() as usize
}
