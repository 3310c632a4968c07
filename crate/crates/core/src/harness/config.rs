//! Declarative experiment configuration (TOML).

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::channel::{self, ChannelSpec, FadingModel, C64};
use crate::error::{Error, Result};
use crate::estimators::Provenance;
use crate::model::RandomModelSpec;
use crate::seeds::{self, stream};
use crate::solver::{self, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Grid over the dimension `d`.
    DimSweep,
    /// Grid over the sample size `n` on a random model.
    SampleSweep,
    /// Grid over `n` on a star model; exact recovery is the headline.
    StarRecovery,
    /// Grid over SNR. The model is held fixed and only `H` is redrawn per
    /// repeat.
    SnrSweep,
    /// One point, no grid.
    SingleRun,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::DimSweep => "dim_sweep",
            ExperimentKind::SampleSweep => "sample_sweep",
            ExperimentKind::StarRecovery => "star_recovery",
            ExperimentKind::SnrSweep => "snr_sweep",
            ExperimentKind::SingleRun => "single_run",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    Random {
        d: usize,
        edge_prob: f64,
        max_degree: usize,
        #[serde(default = "default_weight_low")]
        weight_low: f64,
        #[serde(default = "default_weight_high")]
        weight_high: f64,
        #[serde(default = "default_retry_budget")]
        retry_budget: usize,
    },
    Star {
        d: usize,
        rho: f64,
    },
}

fn default_weight_low() -> f64 {
    -1.0
}
fn default_weight_high() -> f64 {
    1.0
}
fn default_retry_budget() -> usize {
    100
}

impl ModelConfig {
    pub fn dim(&self) -> usize {
        match self {
            ModelConfig::Random { d, .. } | ModelConfig::Star { d, .. } => *d,
        }
    }

    pub(crate) fn with_dim(&self, new_d: usize) -> Self {
        let mut m = self.clone();
        match &mut m {
            ModelConfig::Random { d, .. } | ModelConfig::Star { d, .. } => *d = new_d,
        }
        m
    }

    pub(crate) fn random_spec(&self) -> Option<RandomModelSpec> {
        match *self {
            ModelConfig::Random {
                d,
                edge_prob,
                max_degree,
                weight_low,
                weight_high,
                retry_budget,
            } => {
                let mut spec =
                    RandomModelSpec::new(d, edge_prob, max_degree).weights(weight_low, weight_high);
                spec.retry_budget = retry_budget;
                Some(spec)
            }
            ModelConfig::Star { .. } => None,
        }
    }
}

/// Channel gains: `"identity"`, `"rayleigh"`, `"rayleigh(<seed>)"`, or an
/// explicit matrix whose rows hold interleaved `re, im` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GainsConfig {
    Keyword(String),
    Explicit(Vec<Vec<f64>>),
}

impl Default for GainsConfig {
    fn default() -> Self {
        GainsConfig::Keyword("identity".into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum GainsKind {
    Identity,
    Rayleigh(Option<u64>),
}

impl GainsConfig {
    pub(crate) fn keyword(&self) -> Result<Option<GainsKind>> {
        let GainsConfig::Keyword(k) = self else {
            return Ok(None);
        };
        let k = k.trim();
        if k == "identity" {
            return Ok(Some(GainsKind::Identity));
        }
        if k == "rayleigh" {
            return Ok(Some(GainsKind::Rayleigh(None)));
        }
        if let Some(inner) = k
            .strip_prefix("rayleigh(")
            .and_then(|r| r.strip_suffix(')'))
        {
            let seed = inner
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad rayleigh seed '{inner}'")))?;
            return Ok(Some(GainsKind::Rayleigh(Some(seed))));
        }
        Err(Error::Config(format!("unknown gains keyword '{k}'")))
    }

    fn explicit(rows: &[Vec<f64>]) -> Result<DMatrix<C64>> {
        let d = rows.len();
        if let Some(r) = rows.iter().find(|r| r.len() != 2 * d) {
            return Err(Error::Config(format!(
                "explicit gains row has {} values, expected {} (re, im pairs)",
                r.len(),
                2 * d
            )));
        }
        Ok(DMatrix::from_fn(d, d, |i, j| {
            C64::new(rows[i][2 * j], rows[i][2 * j + 1])
        }))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    #[serde(default)]
    pub gains: GainsConfig,
    #[serde(default)]
    pub fading: FadingModel,
    /// Shorthand for `power = snr`, `noise_var = 1`.
    pub snr: Option<f64>,
    pub power: Option<f64>,
    pub noise_var: Option<f64>,
}

impl ChannelConfig {
    /// `(power, noise_var)`; an SNR grid value overrides the configured one.
    pub(crate) fn power_noise(&self, snr_override: Option<f64>) -> Result<(f64, f64)> {
        if let Some(snr) = snr_override {
            return Ok((snr, 1.0));
        }
        match (self.snr, self.power, self.noise_var) {
            (Some(snr), None, None) => Ok((snr, 1.0)),
            (None, Some(p), Some(s2)) => Ok((p, s2)),
            (None, None, None) => Err(Error::Config(
                "channel needs snr or power and noise_var".into(),
            )),
            _ => Err(Error::Config(
                "give either snr or both power and noise_var".into(),
            )),
        }
    }

    /// Resolve gains and power for dimension `d`. `draw_seed` seeds Rayleigh
    /// draws that do not carry an explicit seed.
    pub fn build(
        &self,
        d: usize,
        snr_override: Option<f64>,
        draw_seed: u64,
    ) -> Result<ChannelSpec> {
        let (power, noise_var) = self.power_noise(snr_override)?;
        let gains = match self.gains.keyword()? {
            Some(GainsKind::Identity) => DMatrix::identity(d, d),
            Some(GainsKind::Rayleigh(seed)) => {
                channel::fading_gains(d, self.fading, seed.unwrap_or(draw_seed))
            }
            None => {
                let GainsConfig::Explicit(rows) = &self.gains else {
                    unreachable!()
                };
                let g = GainsConfig::explicit(rows)?;
                if g.nrows() != d {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        found: g.nrows(),
                    });
                }
                g
            }
        };
        ChannelSpec::new(gains, power, noise_var)
    }

    pub(crate) fn is_random(&self) -> bool {
        matches!(self.gains.keyword(), Ok(Some(GainsKind::Rayleigh(_))))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodFactors {
    pub original: f64,
    pub signs: f64,
    pub uncoded: f64,
}

impl MethodFactors {
    pub fn get(&self, m: Provenance) -> f64 {
        match m {
            Provenance::Original => self.original,
            Provenance::Signs => self.signs,
            Provenance::Uncoded => self.uncoded,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorRule {
    /// Signs ×4, Uncoded ×2/3.
    Fixed,
    /// Match each method's penalty to the null standard deviation of its
    /// off-diagonal estimate relative to original data: `π/2` for Signs, and
    /// `√((1 + v_j)(1 + v_k))` entrywise for Uncoded, where `v_j` is the
    /// de-mixed noise variance of variable `j`.
    NoiseMatched,
}

/// Per-method multipliers on a base λ: a named rule or explicit values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Factors {
    Rule(FactorRule),
    Explicit(MethodFactors),
}

impl Default for Factors {
    fn default() -> Self {
        Factors::Rule(FactorRule::Fixed)
    }
}

impl Factors {
    /// Whether Uncoded solves use the entrywise noise-matched penalty.
    pub fn whitens_uncoded(&self) -> bool {
        matches!(self, Factors::Rule(FactorRule::NoiseMatched))
    }

    pub fn resolve(&self) -> MethodFactors {
        match self {
            Factors::Explicit(f) => f.clone(),
            Factors::Rule(FactorRule::Fixed) => MethodFactors {
                original: solver::heuristic_lambda(1.0, Provenance::Original),
                signs: solver::heuristic_lambda(1.0, Provenance::Signs),
                uncoded: solver::heuristic_lambda(1.0, Provenance::Uncoded),
            },
            Factors::Rule(FactorRule::NoiseMatched) => MethodFactors {
                original: 1.0,
                signs: std::f64::consts::FRAC_PI_2,
                uncoded: 1.0,
            },
        }
    }
}

/// How the regularization weight is picked for each method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case", deny_unknown_fields)]
pub enum LambdaPolicy {
    /// The value from the recovery guarantees, using the model's `α`.
    /// Defaults to `ε = 1/(2d²)`.
    Theoretical { epsilon: Option<f64> },
    /// `base × factor(method)`, optionally scaled by `√(n_ref / n)`.
    Heuristic {
        base: f64,
        #[serde(default)]
        factors: Factors,
        n_ref: Option<usize>,
    },
    /// Pick the original-data λ from `values` by maximizing `TPR − FPR` on a
    /// held-out calibration trial per graph, then apply the method factors.
    /// With `each_method`, every method is calibrated on its own pipeline
    /// instead and the factors are ignored.
    Grid {
        values: Vec<f64>,
        #[serde(default)]
        factors: Factors,
        #[serde(default)]
        each_method: bool,
    },
}

impl LambdaPolicy {
    pub fn whitens_uncoded(&self) -> bool {
        match self {
            LambdaPolicy::Heuristic { factors, .. } | LambdaPolicy::Grid { factors, .. } => {
                factors.whitens_uncoded()
            }
            LambdaPolicy::Theoretical { .. } => false,
        }
    }
}

impl Default for LambdaPolicy {
    fn default() -> Self {
        LambdaPolicy::Heuristic {
            base: 0.1,
            factors: Factors::default(),
            n_ref: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub master_seed: u64,
    pub methods: Vec<Provenance>,
    #[serde(default = "one")]
    pub trials: usize,
    #[serde(default = "one")]
    pub graph_repeats: usize,
    /// Sample size for kinds that do not sweep `n`.
    pub n: Option<usize>,
    /// `d`, `n` or SNR values depending on `kind`.
    #[serde(default)]
    pub grid: Vec<f64>,
    pub model: ModelConfig,
    pub channel: Option<ChannelConfig>,
    #[serde(default)]
    pub lambda: LambdaPolicy,
    #[serde(default)]
    pub solver: SolverConfig,
}

fn one() -> usize {
    1
}

/// A grid point resolved to concrete values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub d: usize,
    pub n: usize,
    pub snr: Option<f64>,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// The concrete `(d, n, snr)` of every grid point, in grid order.
    pub fn points(&self) -> Result<Vec<GridPoint>> {
        let snr = self
            .channel
            .as_ref()
            .and_then(|c| c.power_noise(None).ok())
            .map(|(p, s2)| p / s2);
        let base = GridPoint {
            d: self.model.dim(),
            n: self.n.unwrap_or(0),
            snr,
        };
        let as_count = |v: f64, what: &str| -> Result<usize> {
            if v.fract() != 0.0 || v < 1.0 || !v.is_finite() {
                return Err(Error::Config(format!(
                    "grid value {v} is not a valid {what}"
                )));
            }
            Ok(v as usize)
        };
        let pts = match self.kind {
            ExperimentKind::SingleRun => vec![base],
            ExperimentKind::DimSweep => self
                .grid
                .iter()
                .map(|&v| {
                    Ok(GridPoint {
                        d: as_count(v, "dimension")?,
                        ..base
                    })
                })
                .collect::<Result<_>>()?,
            ExperimentKind::SampleSweep | ExperimentKind::StarRecovery => self
                .grid
                .iter()
                .map(|&v| {
                    Ok(GridPoint {
                        n: as_count(v, "sample size")?,
                        ..base
                    })
                })
                .collect::<Result<_>>()?,
            ExperimentKind::SnrSweep => self
                .grid
                .iter()
                .map(|&v| GridPoint {
                    snr: Some(v),
                    ..base
                })
                .collect(),
        };
        Ok(pts)
    }

    /// Channel for a grid point. `draw_seed` seeds an unseeded Rayleigh draw.
    pub(crate) fn channel_at(&self, pt: &GridPoint, draw_seed: u64) -> Result<Option<ChannelSpec>> {
        let Some(ch) = &self.channel else {
            return Ok(None);
        };
        let snr = if self.kind == ExperimentKind::SnrSweep {
            pt.snr
        } else {
            None
        };
        ch.build(pt.d, snr, draw_seed).map(Some)
    }

    /// Seed of the Rayleigh draw for graph repeat `repeat`.
    pub(crate) fn channel_seed(&self, repeat: usize) -> u64 {
        let explicit = self
            .channel
            .as_ref()
            .and_then(|c| c.gains.keyword().ok().flatten())
            .and_then(|g| match g {
                GainsKind::Rayleigh(s) => s,
                GainsKind::Identity => None,
            });
        match (explicit, self.kind) {
            // An SNR sweep redraws H per repeat even when a seed is pinned.
            (Some(s), ExperimentKind::SnrSweep) => {
                seeds::derive_indexed(s, stream::CHANNEL, repeat as u64)
            }
            (Some(s), _) => s,
            (None, _) => seeds::derive_indexed(self.master_seed, stream::CHANNEL, repeat as u64),
        }
    }
}

/// Structural checks, the signs rate-region gate and theorem-regime notes.
/// Never fails; an empty list means the config is runnable.
pub fn validate_config(cfg: &ExperimentConfig) -> Vec<String> {
    let mut v = Vec::new();
    if cfg.methods.is_empty() {
        v.push("methods: list is empty".to_string());
    }
    let mut seen = cfg.methods.clone();
    seen.sort();
    seen.dedup();
    if seen.len() != cfg.methods.len() {
        v.push("methods: duplicate entries".to_string());
    }
    if cfg.trials == 0 {
        v.push("trials: must be at least 1".to_string());
    }
    if cfg.graph_repeats == 0 {
        v.push("graph_repeats: must be at least 1".to_string());
    }
    match cfg.kind {
        ExperimentKind::SingleRun => {
            if !cfg.grid.is_empty() {
                v.push("grid: single_run takes no grid".to_string());
            }
        }
        _ if cfg.grid.is_empty() => {
            v.push(format!("grid: {} needs a nonempty grid", cfg.kind.as_str()))
        }
        _ => {}
    }
    let sweeps_n = matches!(
        cfg.kind,
        ExperimentKind::SampleSweep | ExperimentKind::StarRecovery
    );
    if !sweeps_n && cfg.n.unwrap_or(0) == 0 {
        v.push("n: required (≥ 1) when the grid does not sweep n".to_string());
    }
    if cfg.kind == ExperimentKind::StarRecovery && !matches!(cfg.model, ModelConfig::Star { .. }) {
        v.push("model: star_recovery needs a star model".to_string());
    }
    match &cfg.model {
        ModelConfig::Star { d, rho } => {
            if *d < 2 {
                v.push("model: star needs d ≥ 2".to_string());
            }
            if !(rho.abs() < 1.0 && *rho != 0.0) {
                v.push(format!(
                    "model: star rho = {rho} must satisfy 0 < |rho| < 1"
                ));
            }
        }
        ModelConfig::Random {
            d,
            edge_prob,
            max_degree,
            weight_low,
            weight_high,
            ..
        } => {
            if *d < 2 {
                v.push("model: random needs d ≥ 2".to_string());
            }
            if !(0.0..=1.0).contains(edge_prob) {
                v.push(format!("model: edge_prob = {edge_prob} outside [0, 1]"));
            }
            if *max_degree == 0 {
                v.push("model: max_degree must be at least 1".to_string());
            }
            if !(weight_low < weight_high) {
                v.push("model: weight_low must be below weight_high".to_string());
            }
        }
    }
    if let Err(e) = cfg.solver.validate() {
        v.push(format!("solver: {e}"));
    }
    v.extend(lambda_violations(cfg));
    let needs_channel = cfg.methods.iter().any(|m| *m != Provenance::Original);
    match (&cfg.channel, needs_channel) {
        (None, true) => v.push("channel: required by signs and uncoded".to_string()),
        (Some(ch), _) => v.extend(channel_violations(cfg, ch)),
        (None, false) => {}
    }
    v
}

fn lambda_violations(cfg: &ExperimentConfig) -> Vec<String> {
    let mut v = Vec::new();
    let check_factors = |f: &Factors, v: &mut Vec<String>| {
        let Factors::Explicit(f) = f else { return };
        if [f.original, f.signs, f.uncoded]
            .iter()
            .any(|x| !(*x > 0.0 && x.is_finite()))
        {
            v.push("lambda: method factors must be positive".to_string());
        }
    };
    match &cfg.lambda {
        LambdaPolicy::Theoretical { epsilon } => {
            if let Some(eps) = epsilon {
                let d = cfg
                    .points()
                    .ok()
                    .and_then(|p| p.iter().map(|p| p.d).max())
                    .unwrap_or(cfg.model.dim());
                v.extend(
                    solver::lambda_regime_warnings(1.0, *eps, d)
                        .into_iter()
                        .map(|w| format!("lambda: {w}")),
                );
            }
        }
        LambdaPolicy::Heuristic {
            base,
            factors,
            n_ref,
        } => {
            if !(*base > 0.0 && base.is_finite()) {
                v.push(format!("lambda: base = {base} must be positive"));
            }
            if *n_ref == Some(0) {
                v.push("lambda: n_ref must be at least 1".to_string());
            }
            check_factors(factors, &mut v);
        }
        LambdaPolicy::Grid {
            values, factors, ..
        } => {
            if values.is_empty() {
                v.push("lambda: grid policy needs values".to_string());
            }
            if values.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
                v.push("lambda: grid values must be positive".to_string());
            }
            check_factors(factors, &mut v);
        }
    }
    v
}

fn channel_violations(cfg: &ExperimentConfig, ch: &ChannelConfig) -> Vec<String> {
    let mut v = Vec::new();
    if let Err(e) = ch.gains.keyword() {
        v.push(format!("channel: {e}"));
        return v;
    }
    if cfg.kind != ExperimentKind::SnrSweep {
        if let Err(e) = ch.power_noise(None) {
            v.push(format!("channel: {e}"));
            return v;
        }
    }
    let Ok(points) = cfg.points() else {
        v.push("grid: values do not match the experiment kind".to_string());
        return v;
    };
    let signs = cfg.methods.contains(&Provenance::Signs);
    let draws = if ch.is_random() { cfg.graph_repeats } else { 1 };
    for pt in &points {
        for r in 0..draws {
            let spec = match cfg.channel_at(pt, cfg.channel_seed(r)) {
                Ok(Some(s)) => s,
                Ok(None) => continue,
                Err(e) => {
                    v.push(format!("channel at d = {}: {e}", pt.d));
                    return v;
                }
            };
            if !signs {
                continue;
            }
            match channel::SignsLink::admit(&spec) {
                Ok(_) => {}
                Err(Error::RateRegionViolated { subset, excess }) => {
                    v.push(format!(
                        "channel: signs needs one bit per sample per machine, but at snr = {} \
                         (d = {}, repeat {r}) machines {subset:?} exceed the rate-region \
                         capacity by {excess:.4} bits",
                        spec.snr(),
                        pt.d
                    ));
                    return v;
                }
                Err(e) => {
                    v.push(format!("channel: {e}"));
                    return v;
                }
            }
        }
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    const REPLICA: &str = r#"
kind = "dim_sweep"
master_seed = 7
methods = ["original", "signs", "uncoded"]
trials = 2
graph_repeats = 2
n = 1000
grid = [10, 20]

[model]
type = "random"
d = 10
edge_prob = 0.1
max_degree = 5

[channel]
gains = "identity"
snr = 3.0

[lambda]
policy = "heuristic"
base = 0.1
"#;

    #[test]
    fn replica_config_is_valid() {
        let cfg = ExperimentConfig::from_toml_str(REPLICA).unwrap();
        assert_eq!(validate_config(&cfg), Vec::<String>::new());
        let pts = cfg.points().unwrap();
        assert_eq!(pts.iter().map(|p| p.d).collect::<Vec<_>>(), vec![10, 20]);
        assert_eq!(pts[0].snr, Some(3.0));
    }

    #[test]
    fn empty_methods_reported() {
        let mut cfg = ExperimentConfig::from_toml_str(REPLICA).unwrap();
        cfg.methods.clear();
        assert!(validate_config(&cfg)
            .iter()
            .any(|v| v.starts_with("methods")));
    }

    #[test]
    fn low_snr_signs_rejected() {
        let mut cfg = ExperimentConfig::from_toml_str(REPLICA).unwrap();
        // A scalar link carries lg(1 + snr) bits, so one bit needs snr ≥ 1.
        cfg.channel.as_mut().unwrap().snr = Some(0.9);
        let v = validate_config(&cfg);
        assert!(v.iter().any(|m| m.contains("rate-region")), "{v:?}");
        cfg.methods = vec![Provenance::Original, Provenance::Uncoded];
        assert!(validate_config(&cfg).is_empty());
    }

    #[test]
    fn gains_keywords() {
        let k = |s: &str| GainsConfig::Keyword(s.into()).keyword();
        assert_eq!(k("identity").unwrap(), Some(GainsKind::Identity));
        assert_eq!(
            k("rayleigh(12)").unwrap(),
            Some(GainsKind::Rayleigh(Some(12)))
        );
        assert!(k("rician").is_err());
        let explicit = ChannelConfig {
            gains: GainsConfig::Explicit(vec![vec![1.0, 0.5, 0.0, 0.0], vec![0.0, 0.0, 2.0, 0.0]]),
            snr: Some(2.0),
            ..Default::default()
        };
        let spec = explicit.build(2, None, 0).unwrap();
        assert_eq!(spec.gains()[(0, 0)], C64::new(1.0, 0.5));
        assert!(explicit.build(3, None, 0).is_err());
    }

    #[test]
    fn toml_round_trip() {
        let cfg = ExperimentConfig::from_toml_str(REPLICA).unwrap();
        let back = ExperimentConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back, cfg);
    }
}
