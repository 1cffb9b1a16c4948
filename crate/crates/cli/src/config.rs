//! Run configuration, read from TOML (or JSON with the same shape).
//!
//! Barriers and spots are given in price space and converted to log price here.

use std::path::Path;

use barrier_repl_core::charfun::Branch;
use barrier_repl_core::claim::{BarrierSpec, ClaimKind, ClaimSpec};
use barrier_repl_core::pricer::{ClaimNumerics, ContourSpec, SmoothingSpec};
use barrier_repl_core::quad::QuadratureSpec;
use barrier_repl_core::simulator::{Monitoring, VolModel};
use barrier_repl_core::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Price,
    Curve,
    Verify,
    Hedge,
    Span,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KindName {
    European,
    Sbko,
    Dbko,
    Sbki,
    SbkiFrac,
    SbkiRatio,
    Rebate,
}

impl From<KindName> for ClaimKind {
    fn from(k: KindName) -> Self {
        match k {
            KindName::European => ClaimKind::EuropeanStylePowerExp,
            KindName::Sbko => ClaimKind::Sbko,
            KindName::Dbko => ClaimKind::Dbko,
            KindName::Sbki => ClaimKind::SbkiPowerExp,
            KindName::SbkiFrac => ClaimKind::SbkiFracQv,
            KindName::SbkiRatio => ClaimKind::SbkiRatio,
            KindName::Rebate => ClaimKind::Rebate,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum BranchName {
    #[default]
    Plus,
    Minus,
}

impl From<BranchName> for Branch {
    fn from(b: BranchName) -> Self {
        match b {
            BranchName::Plus => Branch::Plus,
            BranchName::Minus => Branch::Minus,
        }
    }
}

/// Complex number as `[re, im]`.
pub type Pair = [f64; 2];

fn c(p: Pair) -> Complex64 {
    Complex64::new(p[0], p[1])
}

fn zero() -> Pair {
    [0.0, 0.0]
}

fn half() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClaimConfig {
    pub kind: KindName,
    /// Spot `S_0`.
    pub spot: f64,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    #[serde(default)]
    pub j: u32,
    #[serde(default)]
    pub k: u32,
    #[serde(default = "zero")]
    pub p: Pair,
    #[serde(default = "zero")]
    pub s: Pair,
    #[serde(default = "half")]
    pub r: f64,
    #[serde(default)]
    pub eps: f64,
    #[serde(default)]
    pub branch: BranchName,
}

impl ClaimConfig {
    pub fn to_spec(&self) -> Result<ClaimSpec, CliError> {
        for (name, v) in [("spot", Some(self.spot)), ("lower", self.lower), ("upper", self.upper)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(CliError::Config(format!("claim.{name} must be a positive price, got {v}")));
                }
            }
        }
        let x0 = self.spot.ln();
        let barriers = BarrierSpec { lower: self.lower.map(f64::ln), upper: self.upper.map(f64::ln), x0 };
        let spec = ClaimSpec {
            kind: self.kind.into(),
            barriers,
            j: self.j,
            k: self.k,
            p: c(self.p),
            s: c(self.s),
            r: self.r,
            eps: self.eps,
            branch: self.branch.into(),
        };
        spec.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Constant,
    Deterministic,
    Regime,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKind,
    #[serde(default = "one")]
    pub maturity: f64,
    pub sigma: Option<f64>,
    /// `[t_start, sigma]` pieces.
    pub schedule: Option<Vec<[f64; 2]>>,
    pub states: Option<Vec<f64>>,
    pub generator: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub initial: usize,
}

impl ModelConfig {
    pub fn to_model(&self) -> Result<VolModel, CliError> {
        let missing = |f: &str| CliError::Config(format!("model.{f} is required for this model kind"));
        let m = match self.kind {
            ModelKind::Constant => VolModel::constant(self.sigma.ok_or_else(|| missing("sigma"))?),
            ModelKind::Deterministic => VolModel::Deterministic {
                schedule: self
                    .schedule
                    .as_ref()
                    .ok_or_else(|| missing("schedule"))?
                    .iter()
                    .map(|p| (p[0], p[1]))
                    .collect(),
            },
            ModelKind::Regime => VolModel::RegimeSwitching {
                states: self.states.clone().ok_or_else(|| missing("states"))?,
                generator: self.generator.clone().ok_or_else(|| missing("generator"))?,
                initial: self.initial,
            },
        };
        m.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if !(self.maturity > 0.0 && self.maturity.is_finite()) {
            return Err(CliError::Config("model.maturity must be positive".into()));
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum MonitoringName {
    Grid,
    #[default]
    Bridge,
}

impl From<MonitoringName> for Monitoring {
    fn from(m: MonitoringName) -> Self {
        match m {
            MonitoringName::Grid => Monitoring::GridOnly,
            MonitoringName::Bridge => Monitoring::BridgeCorrected,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NumericsConfig {
    pub smoothing_n: u32,
    pub q: u32,
    /// Emit prices for n in {12, 25, 50, 100}.
    pub sequence: bool,
    pub omega_i_g: Option<f64>,
    pub omega_i_h: Option<f64>,
    pub half_width: Option<f64>,
    pub nodes: Option<usize>,
    pub mc_paths: u64,
    pub steps: usize,
    /// Integrated-variance samples behind the mixture law.
    pub law_samples: u64,
    pub bins: usize,
    pub monitoring: MonitoringName,
    /// Also run the Monte Carlo oracle in `price`.
    pub oracle: bool,
}

impl Default for NumericsConfig {
    fn default() -> Self {
        Self {
            smoothing_n: 25,
            q: 5,
            sequence: false,
            omega_i_g: None,
            omega_i_h: None,
            half_width: None,
            nodes: None,
            mc_paths: 100_000,
            steps: 512,
            law_samples: 100_000,
            bins: 512,
            monitoring: MonitoringName::Bridge,
            oracle: false,
        }
    }
}

impl NumericsConfig {
    pub fn claim_numerics(&self, n: u32) -> ClaimNumerics {
        let contour = |wi: Option<f64>| {
            wi.map(|omega_i| {
                let mut cs = ContourSpec::default_for(omega_i, n);
                if let Some(h) = self.half_width {
                    cs.half_width = h;
                }
                if let Some(k) = self.nodes {
                    cs.nodes = k;
                }
                cs
            })
        };
        ClaimNumerics {
            smoothing: SmoothingSpec { n },
            q: self.q,
            contour_g: contour(self.omega_i_g),
            contour_h: contour(self.omega_i_h),
            quad: QuadratureSpec::default(),
        }
    }

    fn validate(&self) -> Result<(), CliError> {
        if self.smoothing_n == 0 {
            return Err(CliError::Config("numerics.smoothing_n must be at least 1".into()));
        }
        if self.steps == 0 || self.bins == 0 {
            return Err(CliError::Config("numerics.steps and numerics.bins must be positive".into()));
        }
        Ok(())
    }
}

fn points() -> usize {
    400
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveConfig {
    pub s_min: f64,
    pub s_max: f64,
    #[serde(default = "points")]
    pub points: usize,
    /// Several spots give one series each; defaults to `claim.spot`.
    pub spots: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HedgeCase {
    pub n: usize,
    pub m: usize,
    pub omega: Pair,
    pub s: Pair,
    #[serde(default)]
    pub branch: BranchName,
}

impl HedgeCase {
    pub fn omega(&self) -> Complex64 {
        c(self.omega)
    }

    pub fn s(&self) -> Complex64 {
        c(self.s)
    }
}

fn hedge_paths() -> u64 {
    1000
}

fn hedge_steps() -> usize {
    512
}

fn rebalances() -> Vec<usize> {
    vec![32, 128, 512]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HedgeConfig {
    pub cases: Vec<HedgeCase>,
    #[serde(default = "rebalances")]
    pub rebalances: Vec<usize>,
    #[serde(default = "hedge_paths")]
    pub paths: u64,
    #[serde(default = "hedge_steps")]
    pub steps: usize,
    /// Log spot; defaults to 0.
    #[serde(default)]
    pub x0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpanPayoff {
    /// `-2 log(S / kappa)`
    Log,
    /// `(S - strike)^+`
    Call,
    /// The European image payoff of `[claim]` at fixed variance `v`.
    Claim,
}

fn strikes() -> usize {
    200
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpanConfig {
    pub payoff: SpanPayoff,
    pub kappa: f64,
    pub k_min: f64,
    pub k_max: f64,
    #[serde(default = "strikes")]
    pub strikes: usize,
    pub strike: Option<f64>,
    #[serde(default)]
    pub v: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub path: Option<String>,
    pub format: Option<Format>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    #[serde(default)]
    pub seed: u64,
    /// Free-form note kept with the config (e.g. how an input was interpreted).
    pub note: Option<String>,
    pub claim: Option<ClaimConfig>,
    pub model: Option<ModelConfig>,
    #[serde(default)]
    pub numerics: NumericsConfig,
    pub curve: Option<CurveConfig>,
    pub hedge: Option<HedgeConfig>,
    pub span: Option<SpanConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn from_str_any(text: &str, json: bool) -> Result<Self, CliError> {
        let cfg: RunConfig = if json {
            serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?
        } else {
            toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let json = path.extension().is_some_and(|e| e == "json");
        Self::from_str_any(&text, json)
    }

    pub fn claim(&self) -> Result<ClaimSpec, CliError> {
        self.claim.as_ref().ok_or_else(|| CliError::Config("[claim] section is required".into()))?.to_spec()
    }

    pub fn model(&self) -> Result<VolModel, CliError> {
        self.model.as_ref().ok_or_else(|| CliError::Config("[model] section is required".into()))?.to_model()
    }

    pub fn maturity(&self) -> f64 {
        self.model.as_ref().map_or(1.0, |m| m.maturity)
    }

    /// Check every section the command will read.
    pub fn validate(&self) -> Result<(), CliError> {
        self.numerics.validate()?;
        let need = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(CliError::Config(format!("{what} section is required")))
            }
        };
        match self.command {
            Command::Price => {
                self.claim()?;
                self.model()?;
            }
            Command::Curve => {
                self.claim()?;
                let cv = self.curve.as_ref().ok_or_else(|| CliError::Config("[curve] section is required".into()))?;
                if !(cv.s_min > 0.0 && cv.s_max > cv.s_min) || cv.points < 2 {
                    return Err(CliError::Config("curve needs 0 < s_min < s_max and points >= 2".into()));
                }
                if let Some(sp) = &cv.spots {
                    if sp.is_empty() || sp.iter().any(|&s| !(s > 0.0)) {
                        return Err(CliError::Config("curve.spots must be positive prices".into()));
                    }
                }
            }
            Command::Verify => {
                self.claim()?;
                self.model()?;
            }
            Command::Hedge => {
                self.model()?;
                let h = self.hedge.as_ref().ok_or_else(|| CliError::Config("[hedge] section is required".into()))?;
                need(!h.cases.is_empty(), "hedge.cases")?;
                if h.rebalances.iter().any(|&r| r == 0 || h.steps % r != 0) {
                    return Err(CliError::Config("hedge.rebalances must divide hedge.steps".into()));
                }
                if h.cases.iter().any(|cs| cs.n + cs.m > 2) {
                    return Err(CliError::Config("hedge cases need n + m <= 2".into()));
                }
            }
            Command::Span => {
                let sp = self.span.as_ref().ok_or_else(|| CliError::Config("[span] section is required".into()))?;
                if !(sp.k_min > 0.0 && sp.k_min < sp.kappa && sp.kappa < sp.k_max) || sp.strikes < 2 {
                    return Err(CliError::Config("span needs 0 < k_min < kappa < k_max and strikes >= 2".into()));
                }
                match sp.payoff {
                    SpanPayoff::Call if sp.strike.is_none() => {
                        return Err(CliError::Config("span.strike is required for a call".into()))
                    }
                    SpanPayoff::Claim => {
                        self.claim()?;
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }
}
