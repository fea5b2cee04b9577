//! Experiment configuration, read from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponents::{mass_cap, solve, ExponentSet, SolveMode};
use crate::operator::{almost_sure_spectrum, DisorderSpec};
use crate::spectral::EnergyInterval;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Localizing probability of a single box.
    Start,
    /// One multiscale step from `ℓ` to `L = ℓ^γ`.
    Induction,
    /// Green's function regularity of boxes with a passing verdict.
    Bridge,
    /// Level-spacing frequency against its analytic lower bound.
    Spacing,
    /// Ground-state energy above the spectral bottom.
    Lifshitz,
    /// Either/or regularity for two disjoint boxes.
    Twobox,
    /// Inner eigenvalues against the outer spectrum.
    Matching,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Start => "start",
            ExperimentKind::Induction => "induction",
            ExperimentKind::Bridge => "bridge",
            ExperimentKind::Spacing => "spacing",
            ExperimentKind::Lifshitz => "lifshitz",
            ExperimentKind::Twobox => "twobox",
            ExperimentKind::Matching => "matching",
        }
    }

    fn uses_interval(self) -> bool {
        !matches!(self, ExperimentKind::Spacing | ExperimentKind::Lifshitz)
    }
}

/// Box sides and placement. Which fields are needed depends on the experiment.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxesConfig {
    /// `L`; for the induction step it defaults to `round(ℓ^γ)`.
    pub side: Option<f64>,
    /// `ℓ`.
    pub child_side: Option<f64>,
    /// Grid of sides for the spacing and Lifshitz sweeps.
    pub sides: Option<Vec<f64>>,
    pub center: Option<Vec<f64>>,
    /// Distance between the two centers in the two-box experiment.
    pub separation: Option<f64>,
}

/// `I = (E − A, E + A)` given directly, or anchored at the bottom of the
/// almost-sure spectrum with half-width `B`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntervalConfig {
    pub center: Option<f64>,
    pub half_width: Option<f64>,
    #[serde(default)]
    pub bottom: bool,
    pub width: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesConfig {
    pub m: f64,
    #[serde(default = "default_c")]
    pub c: f64,
    /// Factor turning `m` into the effective rate checked at the next scale.
    #[serde(default = "default_factor")]
    pub effective_factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default = "default_c_values")]
    pub c_values: Vec<f64>,
    /// `t` in the resolvent splitting; defaults to `1/A²`.
    pub split_t: Option<f64>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            points: default_points(),
            c_values: default_c_values(),
            split_t: None,
        }
    }
}

fn default_c() -> f64 {
    1.0
}
fn default_factor() -> f64 {
    0.5
}
fn default_points() -> usize {
    41
}
fn default_c_values() -> Vec<f64> {
    vec![0.0, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0]
}
fn default_workers() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub dim: usize,
    pub trials: u64,
    pub master_seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    pub output: Option<PathBuf>,
    pub boxes: BoxesConfig,
    pub disorder: DisorderSpec,
    #[serde(default)]
    pub interval: IntervalConfig,
    pub exponents: ExponentSet,
    pub rates: Option<RatesConfig>,
    #[serde(default)]
    pub grid: GridConfig,
}

fn cfg_err(field: &str, reason: impl Into<String>) -> Error {
    Error::Config {
        field: field.to_string(),
        reason: reason.into(),
    }
}

/// Pulls the offending field name out of a deserializer message.
fn field_from_message(msg: &str) -> String {
    for marker in ["missing field `", "unknown field `"] {
        if let Some(i) = msg.find(marker) {
            let rest = &msg[i + marker.len()..];
            if let Some(j) = rest.find('`') {
                return rest[..j].to_string();
            }
        }
    }
    "<document>".to_string()
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| {
            let msg = e.message().to_string();
            Error::Config {
                field: field_from_message(&msg),
                reason: e.to_string().trim().to_string(),
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// Disorder law with the master seed substituted.
    pub fn disorder_spec(&self) -> DisorderSpec {
        self.disorder.with_seed(self.master_seed)
    }

    pub fn rates(&self) -> Result<&RatesConfig> {
        self.rates
            .as_ref()
            .ok_or_else(|| cfg_err("rates", format!("required for `{}`", self.experiment.name())))
    }

    /// `E_0 = inf Σ`.
    pub fn spectral_bottom(&self) -> Result<f64> {
        Ok(almost_sure_spectrum(&self.disorder, self.dim)?[0].0)
    }

    pub fn energy_interval(&self) -> Result<EnergyInterval> {
        let iv = &self.interval;
        if iv.bottom {
            let b = iv.width.ok_or_else(|| cfg_err("interval.width", "required with `bottom = true`"))?;
            EnergyInterval::new(self.spectral_bottom()?, b).map_err(|e| cfg_err("interval.width", e.to_string()))
        } else {
            let c = iv.center.ok_or_else(|| cfg_err("interval.center", "missing"))?;
            let a = iv.half_width.ok_or_else(|| cfg_err("interval.half_width", "missing"))?;
            EnergyInterval::new(c, a).map_err(|e| cfg_err("interval.half_width", e.to_string()))
        }
    }

    pub fn center(&self) -> Vec<f64> {
        self.boxes.center.clone().unwrap_or_else(|| vec![0.0; self.dim])
    }

    pub fn side(&self) -> Result<f64> {
        if let Some(l) = self.boxes.side {
            return Ok(l);
        }
        if self.experiment == ExperimentKind::Induction || self.experiment == ExperimentKind::Bridge {
            let ell = self.child_side()?;
            return Ok(ell.powf(self.exponents.gamma).round());
        }
        Err(cfg_err("boxes.side", "missing"))
    }

    pub fn child_side(&self) -> Result<f64> {
        self.boxes.child_side.ok_or_else(|| cfg_err("boxes.child_side", "missing"))
    }

    pub fn sides(&self) -> Result<&[f64]> {
        match &self.boxes.sides {
            Some(s) if !s.is_empty() => Ok(s),
            Some(_) => Err(cfg_err("boxes.sides", "must be nonempty")),
            None => Err(cfg_err("boxes.sides", "missing")),
        }
    }

    /// Number of work units: sweeps run `trials` per grid entry.
    pub fn total_trials(&self) -> u64 {
        match self.experiment {
            ExperimentKind::Spacing | ExperimentKind::Lifshitz => {
                self.trials * self.boxes.sides.as_ref().map_or(0, |s| s.len() as u64)
            }
            _ => self.trials,
        }
    }

    /// Every sub-validation, before any trial runs.
    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.dim) {
            return Err(cfg_err("dim", format!("must be 1, 2 or 3, got {}", self.dim)));
        }
        if self.trials == 0 {
            return Err(cfg_err("trials", "needs at least one trial"));
        }
        if self.workers == 0 {
            return Err(cfg_err("workers", "needs at least one worker"));
        }
        self.disorder
            .validate()
            .map_err(|e| cfg_err("disorder", e.to_string()))?;
        let v = self.exponents.validate();
        if !v.is_empty() {
            let list: Vec<String> = v.iter().map(|x| x.to_string()).collect();
            return Err(cfg_err("exponents", list.join("; ")));
        }
        if let Some(c) = &self.boxes.center {
            if c.len() != self.dim || c.iter().any(|x| !x.is_finite()) {
                return Err(cfg_err("boxes.center", format!("needs {} finite coordinates", self.dim)));
            }
        }
        if self.grid.points == 0 {
            return Err(cfg_err("grid.points", "must be positive"));
        }
        let positive = |name: &str, x: f64| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(cfg_err(name, format!("must be positive, got {x}")))
            }
        };
        match self.experiment {
            ExperimentKind::Start | ExperimentKind::Twobox => positive("boxes.side", self.side()?)?,
            ExperimentKind::Induction | ExperimentKind::Bridge | ExperimentKind::Matching => {
                let ell = self.child_side()?;
                positive("boxes.child_side", ell)?;
                let l = self.side()?;
                if ell > l / 2.0 {
                    return Err(cfg_err("boxes.child_side", format!("need ℓ ≤ L/2, got ℓ = {ell}, L = {l}")));
                }
            }
            ExperimentKind::Spacing | ExperimentKind::Lifshitz => {
                for &l in self.sides()? {
                    positive("boxes.sides", l)?;
                }
            }
        }
        if self.experiment == ExperimentKind::Twobox {
            let l = self.side()?;
            let sep = self.boxes.separation.ok_or_else(|| cfg_err("boxes.separation", "missing"))?;
            if !(sep > l) {
                return Err(cfg_err("boxes.separation", format!("boxes overlap: need separation > L = {l}")));
            }
        }
        if self.experiment == ExperimentKind::Lifshitz && self.dim > 2 {
            return Err(cfg_err("dim", "the Lifshitz sweep supports d ∈ {1, 2}"));
        }
        if self.experiment.uses_interval() {
            let i = self.energy_interval()?;
            let r = self.rates()?;
            if !(r.m >= 0.0) {
                return Err(cfg_err("rates.m", "must be nonnegative"));
            }
            if !(r.effective_factor > 0.0 && r.effective_factor <= 1.0) {
                return Err(cfg_err("rates.effective_factor", "must lie in (0, 1]"));
            }
            let cap = mass_cap(i.half_width, self.dim);
            if r.m > cap {
                return Err(cfg_err("rates.m", format!("mass {} exceeds the cap {cap}", r.m)));
            }
        }
        Ok(())
    }

    /// Ready-made configurations matching the default experiment grid.
    pub fn preset(kind: ExperimentKind) -> Self {
        let high = DisorderSpec::uniform(0.0, 1.0, 15.0, 0);
        let wide = IntervalConfig {
            center: Some(7.5),
            half_width: Some(10.0),
            bottom: false,
            width: None,
        };
        let rates = |m: f64| {
            Some(RatesConfig {
                m,
                c: 1.0,
                effective_factor: 0.5,
            })
        };
        let base = ExperimentConfig {
            experiment: kind,
            dim: 1,
            trials: 100,
            master_seed: 20_240_601,
            workers: 1,
            output: None,
            boxes: BoxesConfig::default(),
            disorder: high,
            interval: wide,
            exponents: desk_exponents(),
            rates: rates(0.6),
            grid: GridConfig::default(),
        };
        match kind {
            ExperimentKind::Start => {
                let width = 2.0;
                ExperimentConfig {
                    trials: 200,
                    boxes: BoxesConfig {
                        side: Some(21.0),
                        ..Default::default()
                    },
                    interval: IntervalConfig {
                        bottom: true,
                        width: Some(width),
                        ..Default::default()
                    },
                    rates: rates(0.5 * mass_cap(width, 1)),
                    ..base
                }
            }
            ExperimentKind::Induction | ExperimentKind::Bridge => ExperimentConfig {
                boxes: BoxesConfig {
                    child_side: Some(13.0),
                    ..Default::default()
                },
                ..base
            },
            ExperimentKind::Matching => ExperimentConfig {
                trials: 50,
                boxes: BoxesConfig {
                    side: Some(34.0),
                    child_side: Some(13.0),
                    ..Default::default()
                },
                ..base
            },
            ExperimentKind::Twobox => ExperimentConfig {
                trials: 200,
                boxes: BoxesConfig {
                    side: Some(21.0),
                    separation: Some(30.0),
                    ..Default::default()
                },
                ..base
            },
            ExperimentKind::Spacing => ExperimentConfig {
                trials: 500,
                boxes: BoxesConfig {
                    sides: Some(vec![13.0, 21.0, 34.0]),
                    ..Default::default()
                },
                disorder: DisorderSpec::uniform(0.0, 1.0, 5.0, 0),
                interval: IntervalConfig::default(),
                rates: None,
                ..base
            },
            ExperimentKind::Lifshitz => ExperimentConfig {
                trials: 300,
                boxes: BoxesConfig {
                    sides: Some(vec![13.0, 21.0, 34.0]),
                    ..Default::default()
                },
                disorder: DisorderSpec::uniform(0.0, 1.0, 1.0, 0),
                interval: IntervalConfig::default(),
                exponents: solve(0.1, 0.3, 1, SolveMode::Generic).expect("feasible"),
                rates: None,
                ..base
            },
        }
    }
}

/// A valid exponent set whose scales stay small enough for exact
/// diagonalization: `ℓ = 13` gives `ℓ_τ = 9` and `L = 47`.
pub fn desk_exponents() -> ExponentSet {
    ExponentSet {
        xi: 0.2,
        zeta: 0.5,
        beta: 0.55,
        tau: 0.86,
        gamma: 1.5,
        kappa: 0.03,
        kappa_prime: 0.0,
        varsigma: 0.5,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
experiment = "start"
dim = 1
trials = 10
master_seed = 5

[boxes]
side = 21.0

[disorder]
amplitude = 15.0
[disorder.distribution]
family = "uniform"
a = 0.0
b = 1.0

[interval]
bottom = true
width = 2.0

[exponents]
xi = 0.2
zeta = 0.5
beta = 0.55
tau = 0.86
gamma = 1.5
kappa = 0.03
varsigma = 0.5

[rates]
m = 0.1
"#;

    #[test]
    fn parses_sample() {
        let c = ExperimentConfig::from_toml_str(SAMPLE).unwrap();
        assert_eq!(c.experiment, ExperimentKind::Start);
        assert_eq!(c.workers, 1);
        let i = c.energy_interval().unwrap();
        assert_eq!((i.center, i.half_width), (-2.0, 2.0));
        assert_eq!(c.grid.points, 41);
    }

    #[test]
    fn missing_field_is_named() {
        let s = SAMPLE.replace("trials = 10\n", "");
        match ExperimentConfig::from_toml_str(&s) {
            Err(Error::Config { field, .. }) => assert_eq!(field, "trials"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn mass_above_cap_rejected() {
        let s = SAMPLE.replace("m = 0.1", "m = 0.5");
        match ExperimentConfig::from_toml_str(&s) {
            Err(Error::Config { field, .. }) => assert_eq!(field, "rates.m"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn invalid_exponents_rejected() {
        let s = SAMPLE.replace("gamma = 1.5", "gamma = 1.9");
        match ExperimentConfig::from_toml_str(&s) {
            Err(Error::Config { field, .. }) => assert_eq!(field, "exponents"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn presets_validate_and_roundtrip() {
        for k in [
            ExperimentKind::Start,
            ExperimentKind::Induction,
            ExperimentKind::Bridge,
            ExperimentKind::Spacing,
            ExperimentKind::Lifshitz,
            ExperimentKind::Twobox,
            ExperimentKind::Matching,
        ] {
            let c = ExperimentConfig::preset(k);
            c.validate().unwrap_or_else(|e| panic!("{k:?}: {e}"));
            let back = ExperimentConfig::from_toml_str(&c.to_toml_string()).unwrap();
            assert_eq!(back, c);
        }
        assert_eq!(ExperimentConfig::preset(ExperimentKind::Induction).side().unwrap(), 47.0);
    }
}
