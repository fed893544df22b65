//! Concrete systems: a driven, decaying two-level atom and a two-qubit code with
//! jump-triggered correction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generators::{JumpFeedback, OpenSystem};
use crate::linops::{c, hermitian_unitary_log, kron, pauli_x, pauli_y, pauli_z, CMatrix, CVector, DensityMatrix, I};

fn check_rate(name: &str, v: f64) -> Result<()> {
    if !(v.is_finite() && v >= 0.0) {
        return Err(Error::InvalidParameter(format!("{name} must be finite and non-negative, got {v}")));
    }
    Ok(())
}

/// Laser-driven two-level atom. Basis order is (|e>, |g>).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoLevelAtom {
    /// Detuning.
    pub delta: f64,
    /// Rabi frequency.
    pub omega: f64,
    /// Spontaneous emission rate.
    pub kappa: f64,
}

impl TwoLevelAtom {
    pub fn new(delta: f64, omega: f64, kappa: f64) -> Result<Self> {
        if !delta.is_finite() || !omega.is_finite() {
            return Err(Error::InvalidParameter("detuning and drive must be finite".into()));
        }
        check_rate("kappa", kappa)?;
        Ok(Self { delta, omega, kappa })
    }

    /// H = delta |e><e| + (omega / 2) X, single channel L = sqrt(kappa) |g><e|.
    pub fn system(&self) -> Result<OpenSystem> {
        let h = CMatrix::from_row_slice(2, 2, &[c(self.delta), c(0.0), c(0.0), c(0.0)]) + pauli_x() * c(self.omega / 2.0);
        OpenSystem::new(h, vec![lowering() * c(self.kappa.sqrt())])
    }

    /// Feedback operator used throughout: the Pauli X.
    pub fn feedback_operator() -> CMatrix {
        pauli_x()
    }

    /// Stationary excited population without feedback.
    pub fn steady_excited_population(&self) -> f64 {
        let w2 = self.omega * self.omega;
        (w2 / 4.0) / (self.delta * self.delta + self.kappa * self.kappa / 4.0 + w2 / 2.0)
    }
}

/// |g><e| in the (|e>, |g>) basis.
pub fn lowering() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(0.0), c(0.0), c(1.0), c(0.0)])
}

pub fn excited_state() -> DensityMatrix {
    DensityMatrix::pure(&CVector::from_vec(vec![c(1.0), c(0.0)])).expect("valid state")
}

pub fn ground_state() -> DensityMatrix {
    DensityMatrix::pure(&CVector::from_vec(vec![c(0.0), c(1.0)])).expect("valid state")
}

pub fn two_level_atom(delta: f64, omega: f64, kappa: f64) -> Result<OpenSystem> {
    TwoLevelAtom::new(delta, omega, kappa)?.system()
}

/// Two qubits with independent decay; the qubit-1 operator acts on the left tensor factor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QecCode {
    pub kappa1: f64,
    pub kappa2: f64,
}

impl QecCode {
    pub fn new(kappa1: f64, kappa2: f64) -> Result<Self> {
        check_rate("kappa1", kappa1)?;
        check_rate("kappa2", kappa2)?;
        Ok(Self { kappa1, kappa2 })
    }

    /// Jump operators sqrt(kappa_i) (X + iY) on qubit i, Hamiltonian
    /// kappa1 Y(x)X + kappa2 X(x)Y.
    pub fn system(&self) -> Result<OpenSystem> {
        let id = CMatrix::identity(2, 2);
        let raise = pauli_x() + pauli_y() * I;
        let h = kron(&pauli_y(), &pauli_x()) * c(self.kappa1) + kron(&pauli_x(), &pauli_y()) * c(self.kappa2);
        OpenSystem::new(
            h,
            vec![
                kron(&raise, &id) * c(self.kappa1.sqrt()),
                kron(&id, &raise) * c(self.kappa2.sqrt()),
            ],
        )
    }

    /// Correction unitaries (X(x)I + Z(x)X)/sqrt2 and (I(x)X + X(x)Z)/sqrt2.
    pub fn correction_unitaries() -> [CMatrix; 2] {
        let id = CMatrix::identity(2, 2);
        let s = c(std::f64::consts::FRAC_1_SQRT_2);
        [
            (kron(&pauli_x(), &id) + kron(&pauli_z(), &pauli_x())) * s,
            (kron(&id, &pauli_x()) + kron(&pauli_x(), &pauli_z())) * s,
        ]
    }

    /// Unit-strength jump feedback with F_z = i log U_z.
    pub fn feedback(&self) -> Result<JumpFeedback> {
        let fs = Self::correction_unitaries()
            .iter()
            .map(|u| hermitian_unitary_log(u).map(|f| f.into_matrix()))
            .collect::<Result<Vec<_>>>()?;
        JumpFeedback::new(vec![1.0; 2], fs)
    }
}

pub fn qec_two_qubit(kappa1: f64, kappa2: f64) -> Result<(OpenSystem, JumpFeedback)> {
    let code = QecCode::new(kappa1, kappa2)?;
    Ok((code.system()?, code.feedback()?))
}

/// (|00> + |11>) / sqrt2
pub fn logical_zero() -> CVector {
    let s = c(std::f64::consts::FRAC_1_SQRT_2);
    CVector::from_vec(vec![s, c(0.0), c(0.0), s])
}

/// (|01> + |10>) / sqrt2
pub fn logical_one() -> CVector {
    let s = c(std::f64::consts::FRAC_1_SQRT_2);
    CVector::from_vec(vec![c(0.0), s, s, c(0.0)])
}
