//! Speed limits and uncertainty relations with the activity as cost.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::activity::{activity_at_times, prefix_weights, Method, Rule};
use crate::error::{Error, Result};
use crate::evolve::evolve_to;
use crate::generators::{generator, FeedbackScheme, OpenSystem, Readout};
use crate::linops::{bures_distance, DensityMatrix};
use crate::trajectories::TrajectoryStats;

/// Margins above this (negated) count as satisfied; absorbs roundoff.
pub const MARGIN_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    Qsl,
    TurSteady,
    TurNonsteady,
    TurConcentration,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Satisfied,
    Violated,
    /// Inputs outside the range where the bound is proven; no verdict.
    OutOfDomain,
}

/// One bound evaluation. `margin` is positive when the bound holds, whatever
/// the direction of the inequality.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundReport {
    pub kind: BoundKind,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    /// Monte Carlo standard error of the margin, when the lhs is sampled.
    pub stderr: Option<f64>,
    pub verdict: Verdict,
    pub inputs: BTreeMap<String, f64>,
}

impl BoundReport {
    fn new(kind: BoundKind, lhs: f64, rhs: f64, margin: f64, stderr: Option<f64>) -> Self {
        let verdict = if margin >= -MARGIN_TOL {
            Verdict::Satisfied
        } else {
            Verdict::Violated
        };
        Self {
            kind,
            lhs,
            rhs,
            margin,
            stderr,
            verdict,
            inputs: BTreeMap::new(),
        }
    }

    pub fn with_input(mut self, key: &str, value: f64) -> Self {
        self.inputs.insert(key.to_string(), value);
        self
    }

    pub fn satisfied(&self) -> bool {
        self.verdict == Verdict::Satisfied
    }

    /// Satisfied once the margin is widened by `k` standard errors.
    /// Out-of-domain reports are never satisfied.
    pub fn satisfied_within(&self, k: f64) -> bool {
        match self.verdict {
            Verdict::OutOfDomain => false,
            _ => self.margin + k * self.stderr.unwrap_or(0.0) >= -MARGIN_TOL,
        }
    }
}

/// Bures angle and speed-limit integral on a time grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QslCurve {
    pub t: Vec<f64>,
    /// Bures angle between rho(0) and rho(t).
    pub lhs: Vec<f64>,
    /// 1/2 int_0^t sqrt(B(s))/s ds.
    pub rhs: Vec<f64>,
}

/// Speed-limit integral 1/2 int_0^t sqrt(B)/s ds at t_k = t_end (k/m)^2, k = 0..m.
/// With s = u^2 the integrand sqrt(B(u^2))/u is smooth in u; its value at u = 0
/// comes from fitting B(t) = a t + b t^2 on the first three nodes.
pub fn speed_limit_curve(
    sys: &OpenSystem,
    scheme: &FeedbackScheme,
    rho0: &DensityMatrix,
    t_end: f64,
    m: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if m < 4 {
        return Err(Error::InvalidParameter("speed-limit grid needs at least 4 panels".into()));
    }
    let u_end = t_end.sqrt();
    let du = u_end / m as f64;
    let us: Vec<f64> = (0..=m).map(|k| k as f64 * du).collect();
    let ts: Vec<f64> = us.iter().map(|u| u * u).collect();
    let b: Vec<f64> = activity_at_times(sys, scheme, rho0, &ts, Method::Nh)?
        .iter()
        .map(|x| x.total)
        .collect();
    // Least squares for (a, b) in B = a t + b t^2 over nodes 1..=3.
    let (mut s11, mut s12, mut s22, mut r1, mut r2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for k in 1..=3 {
        let t = ts[k];
        s11 += t * t;
        s12 += t * t * t;
        s22 += t.powi(4);
        r1 += t * b[k];
        r2 += t * t * b[k];
    }
    let slope = (r1 * s22 - r2 * s12) / (s11 * s22 - s12 * s12);
    let mut g = Vec::with_capacity(m + 1);
    g.push(slope.max(0.0).sqrt());
    for k in 1..=m {
        g.push(b[k].max(0.0).sqrt() / us[k]);
    }
    let rhs = (0..=m)
        .map(|k| {
            prefix_weights(k, Rule::Simpson)
                .iter()
                .zip(&g)
                .map(|(w, gi)| w * gi * du)
                .sum::<f64>()
        })
        .collect();
    Ok((ts, rhs))
}

/// Bures angle and speed-limit integral on the graded grid t_k = t_end (k/m)^2.
pub fn qsl_curve(
    sys: &OpenSystem,
    scheme: &FeedbackScheme,
    rho0: &DensityMatrix,
    t_end: f64,
    m: usize,
) -> Result<QslCurve> {
    let (t, rhs) = speed_limit_curve(sys, scheme, rho0, t_end, m)?;
    let gen = generator(sys, scheme)?;
    let lhs = t
        .iter()
        .map(|&ti| {
            if ti == 0.0 {
                Ok(0.0)
            } else {
                bures_distance(rho0, &evolve_to(&gen, rho0, ti)?)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(QslCurve { t, lhs, rhs })
}

/// Speed-limit integral up to `tau`.
pub fn speed_limit_integral(
    sys: &OpenSystem,
    scheme: &FeedbackScheme,
    rho0: &DensityMatrix,
    tau: f64,
    m: usize,
) -> Result<f64> {
    Ok(*speed_limit_curve(sys, scheme, rho0, tau, m)?.1.last().expect("non-empty"))
}

/// Bures angle <= 1/2 int sqrt(B)/t dt at time `tau`.
pub fn qsl_check(
    sys: &OpenSystem,
    scheme: &FeedbackScheme,
    rho0: &DensityMatrix,
    tau: f64,
    m: usize,
) -> Result<BoundReport> {
    let rhs = speed_limit_integral(sys, scheme, rho0, tau, m)?;
    let lhs = bures_distance(rho0, &evolve_to(&generator(sys, scheme)?, rho0, tau)?)?;
    Ok(BoundReport::new(BoundKind::Qsl, lhs, rhs, rhs - lhs, None).with_input("tau", tau))
}

fn positive_activity(b: f64) -> Result<()> {
    if !(b.is_finite() && b > 0.0) {
        return Err(Error::InvalidParameter(format!("activity must be positive, got {b}")));
    }
    Ok(())
}

/// Var/mean^2 >= 1/B for counting, >= 1/(4B) for diffusive readout.
pub fn tur_check_steady(stats: &TrajectoryStats, b: f64, readout: Readout) -> Result<BoundReport> {
    positive_activity(b)?;
    let rhs = match readout {
        Readout::Counting => 1.0 / b,
        Readout::Diffusive => 1.0 / (4.0 * b),
    };
    let lhs = stats.precision();
    let report = BoundReport::new(BoundKind::TurSteady, lhs, rhs, lhs - rhs, Some(stats.precision_stderr()));
    Ok(report.with_input("activity", b).with_input("mean", stats.mean).with_input("variance", stats.variance))
}

/// Var / (tau d<N>/dtau)^2 >= 1/B for counting records started away from stationarity.
pub fn tur_check_nonsteady(stats: &TrajectoryStats, dn_dtau: f64, tau: f64, b: f64) -> Result<BoundReport> {
    positive_activity(b)?;
    let scale = (tau * dn_dtau).powi(2);
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::InvalidParameter("tau * dN/dtau must be non-zero".into()));
    }
    let lhs = stats.variance / scale;
    let rhs = 1.0 / b;
    let report = BoundReport::new(BoundKind::TurNonsteady, lhs, rhs, lhs - rhs, Some(stats.variance_stderr() / scale));
    Ok(report.with_input("activity", b).with_input("dn_dtau", dn_dtau).with_input("tau", tau))
}

/// ||N||_p / ||N||_1 >= sin(theta)^(-2(p-1)/p), with theta the speed-limit integral.
/// Valid for p > 1 and 0 <= theta <= pi/2; outside that range no verdict is given.
pub fn tur_concentration(stats: &TrajectoryStats, theta: f64, p: f64) -> Result<BoundReport> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::InvalidParameter(format!("p must exceed 1, got {p}")));
    }
    if !theta.is_finite() || theta < 0.0 {
        return Err(Error::InvalidParameter(format!("invalid speed-limit integral {theta}")));
    }
    let (lhs, se) = stats.norm_ratio(p);
    let rhs = theta.sin().powf(-2.0 * (p - 1.0) / p);
    let mut report = BoundReport::new(BoundKind::TurConcentration, lhs, rhs, lhs - rhs, Some(se));
    if theta > std::f64::consts::FRAC_PI_2 {
        report.verdict = Verdict::OutOfDomain;
    }
    Ok(report.with_input("p", p).with_input("theta", theta))
}
