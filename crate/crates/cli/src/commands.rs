//! The five subcommands. Each builds one table, writes it with its sidecar
//! and returns the written paths.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use qfeedback::activity::{dominant_period, log_slopes, qda, qda_sweep, Method, QuadratureSpec, Rule};
use qfeedback::bounds::{qsl_curve, speed_limit_curve, tur_check_nonsteady, tur_check_steady, BoundReport};
use qfeedback::evolve::{evolve_to, steady_state};
use qfeedback::generators::{generator, FeedbackScheme, OpenSystem};
use qfeedback::linops::{trace_distance, DensityMatrix};
use qfeedback::models::{logical_zero, QecCode};
use qfeedback::trajectories::{dn_dtau, run_ensemble, run_jump_ensemble, TrajectoryConfig};

use crate::config::{InitialState, MethodKind, ModelConfig, RangeSpec, RuleKind, RunConfig, SchemeKind, Spacing};
use crate::output::{emit, emit_csv, Cell, Table};
use crate::setup::{initial_state, model, scheme};
use crate::CliError;

/// Standard errors allowed before a Monte Carlo bound check counts as violated.
pub const SIGMA: f64 = 3.0;

fn quadrature(cfg: &RunConfig) -> QuadratureSpec {
    let a = &cfg.activity;
    match a.rule {
        RuleKind::Exact => QuadratureSpec::exact(),
        RuleKind::Simpson => QuadratureSpec::simpson(a.nodes),
        RuleKind::Trapezoid => QuadratureSpec {
            n: a.nodes,
            rule: Rule::Trapezoid,
            refine_check: false,
        },
    }
}

fn method(kind: MethodKind) -> Method {
    match kind {
        MethodKind::Nh => Method::Nh,
        MethodKind::Nu => Method::Nu,
        MethodKind::Fd => Method::FiniteDifference,
    }
}

/// Per-sample trajectory seed, decorrelated from neighbouring indices.
fn sample_seed(seed: u64, k: usize) -> u64 {
    seed ^ (k as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn uniform(rng: &mut ChaCha8Rng, b: [f64; 2]) -> f64 {
    b[0] + (b[1] - b[0]) * rng.random::<f64>()
}

fn trajectory_config(cfg: &RunConfig, t_end: f64, seed: u64) -> TrajectoryConfig {
    let t = &cfg.trajectory;
    TrajectoryConfig {
        dt: t.dt,
        t_end,
        n_traj: t.n_traj,
        seed,
        record_jumps: t.record_jumps,
    }
}

pub fn activity(cfg: &RunConfig, prefix: &Path) -> Result<Vec<PathBuf>, CliError> {
    let a = &cfg.activity;
    let m = model(&cfg.model)?;
    let taus = match (&a.taus, &a.tau_range) {
        (Some(t), _) => t.clone(),
        (None, Some(r)) => r.values()?,
        (None, None) => RangeSpec {
            start: 1e-2,
            stop: 1e2,
            n: 21,
            spacing: Spacing::Log,
        }
        .values()?,
    };
    if a.alpha && taus.len() < 3 {
        return Err(CliError::Config("activity.alpha needs at least three taus".into()));
    }
    let (nus, uniform_nu) = match (&a.nu_values, &a.nu_range) {
        (Some(v), _) => (v.clone(), false),
        (None, Some(r)) => (r.values()?, r.spacing == Spacing::Linear),
        (None, None) => (vec![cfg.scheme.nu], false),
    };
    let quad = quadrature(cfg);
    let meth = method(a.method);
    let per_nu = nus
        .par_iter()
        .map(|&nu| -> Result<_, CliError> {
            let (sys, sc) = scheme(cfg, &m, nu)?;
            let rho0 = initial_state(cfg, &m, &sys, &sc, InitialState::Steady)?;
            let b = qda_sweep(&sys, &sc, &rho0, &taus, meth, &quad)?;
            let alpha = if a.alpha {
                Some(log_slopes(&taus, &b.iter().map(|x| x.total).collect::<Vec<_>>())?)
            } else {
                None
            };
            Ok((b, alpha))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut cols = vec!["nu", "tau", "B_total", "A_term", "cross_term", "mean_sq_term", "method"];
    if a.alpha {
        cols.push("alpha");
    }
    let mut table = Table::new(&cols);
    for (&nu, (b, alpha)) in nus.iter().zip(&per_nu) {
        for (k, (&tau, x)) in taus.iter().zip(b).enumerate() {
            let mut row: Vec<Cell> = vec![
                nu.into(),
                tau.into(),
                x.total.into(),
                x.a_term.into(),
                x.cross_term.into(),
                x.mean_sq_term.into(),
                meth.name().into(),
            ];
            if let Some(al) = alpha {
                row.push(al[k].into());
            }
            table.push(row);
        }
    }
    // Oscillation period in nu for each tau, when the sweep is evenly spaced.
    let mut periods = Vec::new();
    if uniform_nu && nus.len() >= 8 {
        let spacing = nus[1] - nus[0];
        for (k, &tau) in taus.iter().enumerate() {
            let series: Vec<f64> = per_nu.iter().map(|(b, _)| b[k].total).collect();
            if let Ok(p) = dominant_period(&series, spacing) {
                periods.push(json!({ "tau": tau, "period": p }));
            }
        }
    }
    emit(prefix, "activity", cfg, &table, json!({ "rows": table.rows.len(), "nu_periods": periods }))
}

pub fn qsl(cfg: &RunConfig, prefix: &Path) -> Result<Vec<PathBuf>, CliError> {
    if cfg.scheme.kind == SchemeKind::None {
        return Err(CliError::Config("qsl compares with and without feedback; choose a feedback scheme".into()));
    }
    let m = model(&cfg.model)?;
    let fallback = match cfg.model {
        ModelConfig::TwoLevel { .. } => InitialState::Ground,
        ModelConfig::Qec { .. } => InitialState::LogicalZero,
        ModelConfig::Custom { .. } => InitialState::Mixed,
    };
    let (sys, sc) = scheme(cfg, &m, cfg.scheme.nu)?;
    let (sys0, sc0) = scheme(cfg, &m, 0.0)?;
    let rho0 = initial_state(cfg, &m, &sys, &sc, fallback)?;
    let q = &cfg.qsl;
    let (curve, nofb) = rayon::join(
        || qsl_curve(&sys, &sc, &rho0, q.t_end, q.panels),
        || speed_limit_curve(&sys0, &sc0, &rho0, q.t_end, q.panels),
    );
    let curve = curve?;
    let rhs0 = nofb?.1;
    let mut table = Table::new(&["t", "lhs_bures", "rhs_fb", "rhs_nofb"]);
    let mut satisfied = true;
    let mut crossing = None;
    for k in 0..curve.t.len() {
        let (t, l, r, r0) = (curve.t[k], curve.lhs[k], curve.rhs[k], rhs0[k]);
        table.push(vec![t.into(), l.into(), r.into(), r0.into()]);
        satisfied &= l <= r + 1e-9;
        if crossing.is_none() && t > 0.0 && r0 < l {
            crossing = Some(t);
        }
    }
    emit(
        prefix,
        "qsl",
        cfg,
        &table,
        json!({ "satisfied": satisfied, "first_nofb_crossing": crossing }),
    )
}

struct TurSample {
    params: Vec<f64>,
    b_fb: f64,
    b_nofb: f64,
    report: BoundReport,
    report_nofb: BoundReport,
}

fn tur_row(s: &TurSample) -> Vec<Cell> {
    let mut row: Vec<Cell> = s.params.iter().map(|&p| p.into()).collect();
    row.extend([
        s.b_fb.into(),
        s.b_nofb.into(),
        s.report.lhs.into(),
        s.report.rhs.into(),
        s.report_nofb.rhs.into(),
        s.report.satisfied().into(),
        s.report.satisfied_within(SIGMA).into(),
        s.report_nofb.satisfied_within(SIGMA).into(),
        s.report.stderr.unwrap_or(0.0).into(),
    ]);
    row
}

const TUR_TAIL: [&str; 9] = [
    "B_fb",
    "B_nofb",
    "precision_lhs",
    "bound_rhs",
    "bound_rhs_nofb",
    "satisfied",
    "satisfied_3sigma",
    "nofb_satisfied_3sigma",
    "stderr",
];

fn tur_summary(samples: &[TurSample]) -> Value {
    let fb = samples.iter().filter(|s| !s.report.satisfied_within(SIGMA)).count();
    let nofb = samples.iter().filter(|s| !s.report_nofb.satisfied_within(SIGMA)).count();
    json!({
        "samples": samples.len(),
        "violations_beyond_3sigma": fb,
        "nofb_violations_beyond_3sigma": nofb,
        "reports": samples.iter().map(|s| &s.report).collect::<Vec<_>>(),
    })
}

fn ensure_model_kind(cfg: &RunConfig, want: &str) -> Result<(), CliError> {
    let ok = matches!(
        (&cfg.model, want),
        (ModelConfig::TwoLevel { .. }, "two_level") | (ModelConfig::Qec { .. }, "qec")
    );
    if ok {
        Ok(())
    } else {
        Err(CliError::Config(format!("this command samples the {want} model; set model.kind = \"{want}\"")))
    }
}

/// Steady-state TUR over random two-level atoms.
pub fn tur(cfg: &RunConfig, prefix: &Path) -> Result<Vec<PathBuf>, CliError> {
    ensure_model_kind(cfg, "two_level")?;
    let kind = cfg.scheme.kind;
    if !matches!(kind, SchemeKind::Jump | SchemeKind::Homodyne) {
        return Err(CliError::Config("tur samples jump or homodyne feedback".into()));
    }
    let t = &cfg.tur;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.trajectory.seed);
    let draws: Vec<[f64; 6]> = (0..t.samples)
        .map(|_| {
            let delta = uniform(&mut rng, t.delta);
            let omega = uniform(&mut rng, t.omega);
            let kappa = uniform(&mut rng, t.kappa);
            let nu = t.nu[rng.random_range(0..t.nu.len())];
            let phi = uniform(&mut rng, t.phi);
            let tau = uniform(&mut rng, t.tau);
            [delta, omega, kappa, nu, phi, tau]
        })
        .collect();
    let samples = draws
        .par_iter()
        .enumerate()
        .map(|(k, &[delta, omega, kappa, nu, phi, tau])| -> Result<TurSample, CliError> {
            let mut local = cfg.clone();
            local.model = ModelConfig::TwoLevel { delta, omega, kappa };
            local.scheme.phi = phi;
            let m = model(&local.model)?;
            let (sys, sc) = scheme(&local, &m, nu)?;
            let (sys0, sc0) = (sys.clone(), FeedbackScheme::None);
            let rho = steady_state(&generator(&sys, &sc)?)?;
            let rho_nofb = steady_state(&generator(&sys0, &sc0)?)?;
            let quad = QuadratureSpec::exact();
            let b_fb = qda(&sys, &sc, &rho, tau, Method::Nh, &quad)?.total;
            let b_nofb = qda(&sys0, &sc0, &rho_nofb, tau, Method::Nh, &quad)?.total;
            let ens = run_ensemble(&sys, &sc, &rho, &trajectory_config(&local, tau, sample_seed(cfg.trajectory.seed, k)))?;
            let readout = sc.readout();
            Ok(TurSample {
                params: vec![delta, omega, kappa, nu, phi, tau],
                b_fb,
                b_nofb,
                report: tur_check_steady(&ens.stats, b_fb, readout)?.with_input("sample", k as f64),
                report_nofb: tur_check_steady(&ens.stats, b_nofb, readout)?,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut cols = vec!["delta", "omega", "kappa", "nu", "phi", "tau"];
    cols.extend(TUR_TAIL);
    let mut table = Table::new(&cols);
    samples.iter().for_each(|s| table.push(tur_row(s)));
    emit(prefix, "tur", cfg, &table, tur_summary(&samples))
}

/// Transient TUR for the two-qubit code, started in the logical zero state.
pub fn qec(cfg: &RunConfig, prefix: &Path) -> Result<Vec<PathBuf>, CliError> {
    ensure_model_kind(cfg, "qec")?;
    let q = &cfg.qec;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.trajectory.seed);
    let draws: Vec<[f64; 3]> = (0..q.samples)
        .map(|_| [uniform(&mut rng, q.kappa1), uniform(&mut rng, q.kappa2), uniform(&mut rng, q.tau)])
        .collect();
    let rho0 = DensityMatrix::pure(&logical_zero())?;
    let samples = draws
        .par_iter()
        .enumerate()
        .map(|(k, &[k1, k2, tau])| -> Result<TurSample, CliError> {
            let code = QecCode::new(k1, k2).map_err(|e| CliError::Config(e.to_string()))?;
            let sys = code.system()?;
            let fb = code.feedback()?;
            let sc = FeedbackScheme::Jump(fb.clone());
            let quad = QuadratureSpec::exact();
            let b_fb = qda(&sys, &sc, &rho0, tau, Method::Nh, &quad)?.total;
            let b_nofb = qda(&sys, &FeedbackScheme::None, &rho0, tau, Method::Nh, &quad)?.total;
            let ens = run_jump_ensemble(&sys, &fb, &rho0, &trajectory_config(cfg, tau, sample_seed(cfg.trajectory.seed, k)))?;
            let rate = dn_dtau(&sys, &fb, &rho0, tau)?;
            Ok(TurSample {
                params: vec![k1, k2, tau],
                b_fb,
                b_nofb,
                report: tur_check_nonsteady(&ens.stats, rate, tau, b_fb)?.with_input("sample", k as f64),
                report_nofb: tur_check_nonsteady(&ens.stats, rate, tau, b_nofb)?,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut cols = vec!["kappa1", "kappa2", "tau"];
    cols.extend(TUR_TAIL);
    cols.push("slack");
    let mut table = Table::new(&cols);
    for s in &samples {
        let mut row = tur_row(s);
        row.push((s.report.lhs * s.b_fb - 1.0).into());
        table.push(row);
    }
    emit(prefix, "qec", cfg, &table, tur_summary(&samples))
}

/// One ensemble run with a comparison against the master equation.
pub fn traj(cfg: &RunConfig, prefix: &Path) -> Result<Vec<PathBuf>, CliError> {
    let m = model(&cfg.model)?;
    let (sys, sc): (OpenSystem, FeedbackScheme) = scheme(cfg, &m, cfg.scheme.nu)?;
    let rho0 = initial_state(cfg, &m, &sys, &sc, InitialState::Steady)?;
    let tc = trajectory_config(cfg, cfg.trajectory.t_end, cfg.trajectory.seed);
    let ens = run_ensemble(&sys, &sc, &rho0, &tc)?;
    let exact = evolve_to(&generator(&sys, &sc)?, &rho0, tc.t_end)?;
    let td = trace_distance(&exact, &ens.mean_state);
    let s = &ens.stats;
    let mut table = Table::new(&[
        "scheme",
        "t_end",
        "dt",
        "n_traj",
        "mean",
        "variance",
        "mean_stderr",
        "precision",
        "precision_stderr",
        "trace_distance",
    ]);
    table.push(vec![
        sc.name().into(),
        tc.t_end.into(),
        (tc.t_end / ens.steps as f64).into(),
        tc.n_traj.into(),
        s.mean.into(),
        s.variance.into(),
        s.mean_stderr().into(),
        s.precision().into(),
        s.precision_stderr().into(),
        td.into(),
    ]);
    let mut paths = emit(prefix, "traj", cfg, &table, json!({ "stats": s, "steps": ens.steps }))?;
    if tc.record_jumps {
        let weights: Vec<f64> = match &sc {
            FeedbackScheme::Jump(fb) => fb.nu().to_vec(),
            _ => vec![1.0; sys.n_channels()],
        };
        let mut rec = Table::new(&["trajectory", "t", "channel", "n_running"]);
        let mut running = (usize::MAX, 0.0);
        for r in &ens.records {
            if running.0 != r.trajectory {
                running = (r.trajectory, 0.0);
            }
            running.1 += weights.get(r.channel).copied().unwrap_or(1.0);
            rec.push(vec![r.trajectory.into(), r.time.into(), r.channel.into(), running.1.into()]);
        }
        paths.push(emit_csv(prefix, "jumps", cfg, &rec)?);
    }
    Ok(paths)
}
