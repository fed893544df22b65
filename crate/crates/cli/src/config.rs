//! Run configuration read from TOML. Every table rejects unknown keys.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

/// Complex matrix as rows of [re, im] pairs.
pub type MatrixSpec = Vec<Vec<[f64; 2]>>;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub scheme: SchemeConfig,
    #[serde(default)]
    pub state: StateConfig,
    #[serde(default)]
    pub activity: ActivityConfig,
    #[serde(default)]
    pub qsl: QslConfig,
    #[serde(default)]
    pub tur: TurConfig,
    #[serde(default)]
    pub qec: QecConfig,
    #[serde(default)]
    pub trajectory: TrajectorySection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    TwoLevel {
        #[serde(default = "one")]
        delta: f64,
        #[serde(default = "one")]
        omega: f64,
        #[serde(default = "half")]
        kappa: f64,
    },
    Qec {
        #[serde(default = "half")]
        kappa1: f64,
        #[serde(default = "one")]
        kappa2: f64,
    },
    Custom {
        hamiltonian: MatrixSpec,
        #[serde(default)]
        jumps: Vec<MatrixSpec>,
        /// Feedback operator F; required by every scheme except `none`.
        feedback: Option<MatrixSpec>,
    },
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig::TwoLevel {
            delta: 1.0,
            omega: 1.0,
            kappa: 0.5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    None,
    Jump,
    Homodyne,
    Gaussian,
}

impl std::str::FromStr for SchemeKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(Self::None),
            "jump" => Ok(Self::Jump),
            "homodyne" => Ok(Self::Homodyne),
            "gaussian" => Ok(Self::Gaussian),
            other => Err(format!("unknown scheme '{other}' (none, jump, homodyne, gaussian)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeConfig {
    pub kind: SchemeKind,
    /// Feedback strength, applied to every channel.
    #[serde(default = "one")]
    pub nu: f64,
    /// Homodyne phase, shared by every channel.
    #[serde(default = "half_pi")]
    pub phi: f64,
    /// Gaussian measurement strength.
    #[serde(default = "half")]
    pub lambda: f64,
    /// Gaussian measured observable; Pauli Z on two-level models when absent.
    pub observable: Option<MatrixSpec>,
}

impl Default for SchemeConfig {
    fn default() -> Self {
        Self {
            kind: SchemeKind::Jump,
            nu: 1.0,
            phi: PI / 2.0,
            lambda: 0.5,
            observable: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialState {
    /// Stationary state of the dynamics being studied.
    Steady,
    Ground,
    Excited,
    Mixed,
    LogicalZero,
    LogicalOne,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateConfig {
    /// Named initial state; each command has its own default.
    pub initial: Option<InitialState>,
    /// Explicit pure state as [re, im] amplitudes; overrides `initial`.
    pub vector: Option<Vec<[f64; 2]>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    Linear,
    Log,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangeSpec {
    pub start: f64,
    pub stop: f64,
    pub n: usize,
    #[serde(default = "linear")]
    pub spacing: Spacing,
}

impl RangeSpec {
    pub fn values(&self) -> Result<Vec<f64>, CliError> {
        if self.n < 2 || !self.start.is_finite() || !self.stop.is_finite() || self.stop <= self.start {
            return Err(CliError::Config(format!(
                "range needs n >= 2 and start < stop, got {self:?}"
            )));
        }
        let m = (self.n - 1) as f64;
        Ok(match self.spacing {
            Spacing::Linear => (0..self.n)
                .map(|k| self.start + (self.stop - self.start) * k as f64 / m)
                .collect(),
            Spacing::Log => {
                if self.start <= 0.0 {
                    return Err(CliError::Config("log range must start above zero".into()));
                }
                let (a, b) = (self.start.ln(), self.stop.ln());
                (0..self.n).map(|k| (a + (b - a) * k as f64 / m).exp()).collect()
            }
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodKind {
    Nh,
    Nu,
    Fd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    Exact,
    Simpson,
    Trapezoid,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActivityConfig {
    /// Explicit list of final times.
    pub taus: Option<Vec<f64>>,
    pub tau_range: Option<RangeSpec>,
    /// Sweep of the feedback strength; falls back to `scheme.nu`.
    pub nu_values: Option<Vec<f64>>,
    pub nu_range: Option<RangeSpec>,
    #[serde(default = "nh")]
    pub method: MethodKind,
    #[serde(default = "exact")]
    pub rule: RuleKind,
    #[serde(default = "nodes")]
    pub nodes: usize,
    /// Append the local log-log slope of B against tau.
    #[serde(default)]
    pub alpha: bool,
}

impl Default for ActivityConfig {
    fn default() -> Self {
        Self {
            taus: None,
            tau_range: None,
            nu_values: None,
            nu_range: None,
            method: MethodKind::Nh,
            rule: RuleKind::Exact,
            nodes: 401,
            alpha: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QslConfig {
    #[serde(default = "three")]
    pub t_end: f64,
    /// Panels of the sqrt-graded time grid.
    #[serde(default = "panels")]
    pub panels: usize,
}

impl Default for QslConfig {
    fn default() -> Self {
        Self {
            t_end: 3.0,
            panels: 120,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TurConfig {
    #[serde(default = "tur_samples")]
    pub samples: usize,
    #[serde(default = "rate_bounds")]
    pub delta: [f64; 2],
    #[serde(default = "rate_bounds")]
    pub omega: [f64; 2],
    #[serde(default = "rate_bounds")]
    pub kappa: [f64; 2],
    /// Feedback strengths drawn uniformly from this list.
    #[serde(default = "nu_choices")]
    pub nu: Vec<f64>,
    #[serde(default = "phase_bounds")]
    pub phi: [f64; 2],
    #[serde(default = "tur_tau")]
    pub tau: [f64; 2],
}

impl Default for TurConfig {
    fn default() -> Self {
        Self {
            samples: tur_samples(),
            delta: rate_bounds(),
            omega: rate_bounds(),
            kappa: rate_bounds(),
            nu: nu_choices(),
            phi: phase_bounds(),
            tau: tur_tau(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QecConfig {
    #[serde(default = "qec_samples")]
    pub samples: usize,
    #[serde(default = "qec_rates")]
    pub kappa1: [f64; 2],
    #[serde(default = "qec_rates")]
    pub kappa2: [f64; 2],
    #[serde(default = "qec_tau")]
    pub tau: [f64; 2],
}

impl Default for QecConfig {
    fn default() -> Self {
        Self {
            samples: qec_samples(),
            kappa1: qec_rates(),
            kappa2: qec_rates(),
            tau: qec_tau(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectorySection {
    #[serde(default = "dt")]
    pub dt: f64,
    #[serde(default = "one")]
    pub t_end: f64,
    #[serde(default = "n_traj")]
    pub n_traj: usize,
    #[serde(default)]
    pub seed: u64,
    /// Write every detected jump to a separate CSV (`traj` only).
    #[serde(default)]
    pub record_jumps: bool,
}

impl Default for TrajectorySection {
    fn default() -> Self {
        Self {
            dt: dt(),
            t_end: 1.0,
            n_traj: n_traj(),
            seed: 0,
            record_jumps: false,
        }
    }
}

fn one() -> f64 {
    1.0
}
fn half() -> f64 {
    0.5
}
fn three() -> f64 {
    3.0
}
fn half_pi() -> f64 {
    PI / 2.0
}
fn linear() -> Spacing {
    Spacing::Linear
}
fn nh() -> MethodKind {
    MethodKind::Nh
}
fn exact() -> RuleKind {
    RuleKind::Exact
}
fn nodes() -> usize {
    401
}
fn panels() -> usize {
    120
}
fn tur_samples() -> usize {
    200
}
fn rate_bounds() -> [f64; 2] {
    [0.1, 3.0]
}
fn nu_choices() -> Vec<f64> {
    vec![0.2, 0.4, 1.0]
}
fn phase_bounds() -> [f64; 2] {
    [0.0, 2.0 * PI]
}
fn tur_tau() -> [f64; 2] {
    [0.1, 3.0]
}
fn qec_samples() -> usize {
    100
}
fn qec_rates() -> [f64; 2] {
    [0.1, 2.0]
}
fn qec_tau() -> [f64; 2] {
    [0.1, 1.0]
}
fn dt() -> f64 {
    1e-3
}
fn n_traj() -> usize {
    10_000
}

fn check_bounds(name: &str, b: [f64; 2]) -> Result<(), CliError> {
    if !(b[0].is_finite() && b[1].is_finite() && b[0] <= b[1]) {
        return Err(CliError::Config(format!("{name}: need finite [low, high], got {b:?}")));
    }
    Ok(())
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Checks that do not need any numerics.
    pub fn validate(&self) -> Result<(), CliError> {
        let a = &self.activity;
        if a.taus.is_some() && a.tau_range.is_some() {
            return Err(CliError::Config("activity: give either taus or tau_range".into()));
        }
        if a.nu_values.is_some() && a.nu_range.is_some() {
            return Err(CliError::Config("activity: give either nu_values or nu_range".into()));
        }
        if let Some(ts) = &a.taus {
            if ts.is_empty() || ts.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
                return Err(CliError::Config("activity.taus must be positive".into()));
            }
        }
        let t = &self.tur;
        for (name, b) in [("tur.delta", t.delta), ("tur.omega", t.omega), ("tur.kappa", t.kappa), ("tur.phi", t.phi), ("tur.tau", t.tau)] {
            check_bounds(name, b)?;
        }
        if t.nu.is_empty() {
            return Err(CliError::Config("tur.nu needs at least one value".into()));
        }
        if t.kappa[0] <= 0.0 || t.tau[0] <= 0.0 {
            return Err(CliError::Config("tur: kappa and tau ranges must be positive".into()));
        }
        let q = &self.qec;
        for (name, b) in [("qec.kappa1", q.kappa1), ("qec.kappa2", q.kappa2), ("qec.tau", q.tau)] {
            check_bounds(name, b)?;
        }
        if q.tau[0] <= 0.0 {
            return Err(CliError::Config("qec.tau must be positive".into()));
        }
        let tr = &self.trajectory;
        if tr.n_traj < 2 {
            return Err(CliError::Config("trajectory.n_traj must be at least 2 for a variance".into()));
        }
        if !(tr.dt > 0.0 && tr.t_end > 0.0) {
            return Err(CliError::Config("trajectory.dt and t_end must be positive".into()));
        }
        if !(self.qsl.t_end > 0.0) || self.qsl.panels < 4 {
            return Err(CliError::Config("qsl: t_end > 0 and panels >= 4 required".into()));
        }
        Ok(())
    }

    /// Canonical TOML rendering of the effective configuration.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_toml("[model]\nkind = \"two_level\"\ngamma = 1.0\n").is_err());
        assert!(RunConfig::from_toml("[scheme]\nkind = \"jump\"\nstrength = 1.0\n").is_err());
        assert!(RunConfig::from_toml("[extra]\nx = 1\n").is_err());
    }

    #[test]
    fn defaults_and_tagged_models() {
        let cfg = RunConfig::from_toml("[model]\nkind = \"qec\"\nkappa1 = 0.3\n").unwrap();
        assert_eq!(cfg.model, ModelConfig::Qec { kappa1: 0.3, kappa2: 1.0 });
        assert_eq!(cfg.scheme.kind, SchemeKind::Jump);
        cfg.validate().unwrap();
        let custom = "[model]\nkind = \"custom\"\nhamiltonian = [[[0.0, 0.0], [1.0, 0.0]], [[1.0, 0.0], [0.0, 0.0]]]\n";
        let cfg = RunConfig::from_toml(custom).unwrap();
        assert!(matches!(cfg.model, ModelConfig::Custom { ref jumps, .. } if jumps.is_empty()));
    }

    #[test]
    fn digest_tracks_content() {
        let a = RunConfig::default();
        let mut b = a.clone();
        assert_eq!(a.digest(), b.digest());
        b.trajectory.seed = 7;
        assert_ne!(a.digest(), b.digest());
        let back = RunConfig::from_toml(&a.canonical()).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn ranges() {
        let r = RangeSpec { start: 1e-2, stop: 1e2, n: 5, spacing: Spacing::Log };
        let v = r.values().unwrap();
        assert!((v[2] - 1.0).abs() < 1e-12);
        let bad = RangeSpec { start: 0.0, stop: 1.0, n: 1, spacing: Spacing::Linear };
        assert!(bad.values().is_err());
        let mut cfg = RunConfig::default();
        cfg.trajectory.n_traj = 1;
        assert!(cfg.validate().is_err());
    }
}
