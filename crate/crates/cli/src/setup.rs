//! Turns a validated configuration into core objects.

use qfeedback::evolve::steady_state;
use qfeedback::generators::{generator, FeedbackScheme, GaussianFeedback, HomodyneFeedback, JumpFeedback, OpenSystem};
use qfeedback::linops::{c, pauli_z, CMatrix, CVector, DensityMatrix, C64};
use qfeedback::models::{excited_state, ground_state, logical_one, logical_zero, QecCode, TwoLevelAtom};

use crate::config::{InitialState, MatrixSpec, ModelConfig, RunConfig, SchemeKind};
use crate::CliError;

pub fn matrix(spec: &MatrixSpec, what: &str) -> Result<CMatrix, CliError> {
    let d = spec.len();
    if d == 0 || spec.iter().any(|row| row.len() != d) {
        return Err(CliError::Config(format!("{what}: expected a non-empty square matrix")));
    }
    Ok(CMatrix::from_fn(d, d, |i, j| C64::new(spec[i][j][0], spec[i][j][1])))
}

/// A system together with the default feedback operator it is studied with.
pub struct Model {
    pub system: OpenSystem,
    pub feedback_op: Option<CMatrix>,
    pub qec: Option<QecCode>,
    is_two_level: bool,
}

pub fn model(cfg: &ModelConfig) -> Result<Model, CliError> {
    Ok(match cfg {
        ModelConfig::TwoLevel { delta, omega, kappa } => {
            let atom = TwoLevelAtom::new(*delta, *omega, *kappa).map_err(config_err)?;
            Model {
                system: atom.system().map_err(config_err)?,
                feedback_op: Some(TwoLevelAtom::feedback_operator()),
                qec: None,
                is_two_level: true,
            }
        }
        ModelConfig::Qec { kappa1, kappa2 } => {
            let code = QecCode::new(*kappa1, *kappa2).map_err(config_err)?;
            Model {
                system: code.system().map_err(config_err)?,
                feedback_op: None,
                qec: Some(code),
                is_two_level: false,
            }
        }
        ModelConfig::Custom { hamiltonian, jumps, feedback } => {
            let h = matrix(hamiltonian, "model.hamiltonian")?;
            let ls = jumps
                .iter()
                .map(|l| matrix(l, "model.jumps"))
                .collect::<Result<Vec<_>, _>>()?;
            let f = feedback.as_ref().map(|f| matrix(f, "model.feedback")).transpose()?;
            Model {
                system: OpenSystem::new(h, ls).map_err(config_err)?,
                feedback_op: f,
                qec: None,
                is_two_level: false,
            }
        }
    })
}

/// Scheme at feedback strength `nu`. For the Gaussian scheme the returned
/// system keeps only the Hamiltonian, since the measurement replaces the jumps.
pub fn scheme(cfg: &RunConfig, m: &Model, nu: f64) -> Result<(OpenSystem, FeedbackScheme), CliError> {
    let s = &cfg.scheme;
    if let Some(code) = &m.qec {
        return match s.kind {
            SchemeKind::None => Ok((m.system.clone(), FeedbackScheme::None)),
            SchemeKind::Jump => Ok((m.system.clone(), FeedbackScheme::Jump(code.feedback().map_err(config_err)?))),
            other => Err(CliError::Config(format!("the qec model supports schemes none and jump, not {other:?}"))),
        };
    }
    let f = || {
        m.feedback_op
            .clone()
            .ok_or_else(|| CliError::Config("model.feedback is required for this scheme".into()))
    };
    let sys = &m.system;
    let out = match s.kind {
        SchemeKind::None => (sys.clone(), FeedbackScheme::None),
        SchemeKind::Jump => {
            let fb = JumpFeedback::uniform(nu, f()?, sys.n_channels()).map_err(config_err)?;
            (sys.clone(), FeedbackScheme::Jump(fb))
        }
        SchemeKind::Homodyne => {
            let fb = HomodyneFeedback::new(vec![s.phi; sys.n_channels()], f()? * c(nu)).map_err(config_err)?;
            (sys.clone(), FeedbackScheme::Homodyne(fb))
        }
        SchemeKind::Gaussian => {
            let y = match &s.observable {
                Some(y) => matrix(y, "scheme.observable")?,
                None if m.is_two_level => pauli_z(),
                None => return Err(CliError::Config("scheme.observable is required for a custom gaussian model".into())),
            };
            let fb = GaussianFeedback::new(y, s.lambda, f()? * c(nu)).map_err(config_err)?;
            let bare = OpenSystem::new(sys.hamiltonian().matrix().clone(), vec![]).map_err(config_err)?;
            (bare, FeedbackScheme::Gaussian(fb))
        }
    };
    out.1.validate(&out.0).map_err(config_err)?;
    Ok(out)
}

/// Initial state; `fallback` is the command's default choice.
pub fn initial_state(
    cfg: &RunConfig,
    m: &Model,
    sys: &OpenSystem,
    scheme: &FeedbackScheme,
    fallback: InitialState,
) -> Result<DensityMatrix, CliError> {
    let d = sys.dim();
    if let Some(v) = &cfg.state.vector {
        if v.len() != d {
            return Err(CliError::Config(format!("state.vector has {} entries, system dimension is {d}", v.len())));
        }
        let psi = CVector::from_iterator(d, v.iter().map(|z| C64::new(z[0], z[1])));
        if psi.norm() == 0.0 {
            return Err(CliError::Config("state.vector must be non-zero".into()));
        }
        return DensityMatrix::pure(&(psi.clone() / c(psi.norm()))).map_err(config_err);
    }
    let choice = cfg.state.initial.unwrap_or(fallback);
    let need = |ok: bool, what: &str| {
        if ok {
            Ok(())
        } else {
            Err(CliError::Config(format!("initial state {what} needs a matching model")))
        }
    };
    match choice {
        InitialState::Steady => Ok(steady_state(&generator(sys, scheme)?)?),
        InitialState::Mixed => Ok(DensityMatrix::maximally_mixed(d)),
        InitialState::Ground => {
            need(m.is_two_level, "ground")?;
            Ok(ground_state())
        }
        InitialState::Excited => {
            need(m.is_two_level, "excited")?;
            Ok(excited_state())
        }
        InitialState::LogicalZero => {
            need(m.qec.is_some(), "logical_zero")?;
            DensityMatrix::pure(&logical_zero()).map_err(config_err)
        }
        InitialState::LogicalOne => {
            need(m.qec.is_some(), "logical_one")?;
            DensityMatrix::pure(&logical_one()).map_err(config_err)
        }
    }
}

fn config_err(e: qfeedback::Error) -> CliError {
    CliError::Config(e.to_string())
}
