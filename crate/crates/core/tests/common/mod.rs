//! Random open systems and schemes shared by the integration tests.
#![allow(dead_code)]

use qfeedback::generators::{FeedbackScheme, GaussianFeedback, HomodyneFeedback, JumpFeedback, OpenSystem};
use qfeedback::linops::{CMatrix, DensityMatrix, C64};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> CMatrix {
    CMatrix::from_fn(d, d, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re, im) * scale
    })
}

pub fn hermitian(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> CMatrix {
    let a = gaussian_matrix(rng, d, scale);
    (&a + a.adjoint()) * C64::new(0.5, 0.0)
}

/// Full-rank mixed state from a Wishart draw.
pub fn mixed_state(rng: &mut ChaCha8Rng, d: usize) -> DensityMatrix {
    let a = gaussian_matrix(rng, d, 1.0);
    let m = &a * a.adjoint();
    let tr = m.trace();
    DensityMatrix::new(m / tr).expect("valid state")
}

pub struct RandomCase {
    pub system: OpenSystem,
    /// Hamiltonian-only system used with the Gaussian scheme.
    pub bare: OpenSystem,
    pub rho0: DensityMatrix,
    pub jump: FeedbackScheme,
    pub homodyne: FeedbackScheme,
    pub gaussian: FeedbackScheme,
}

impl RandomCase {
    /// (system, scheme) pairs covering the four scheme variants.
    pub fn variants(&self) -> Vec<(&OpenSystem, &FeedbackScheme)> {
        vec![
            (&self.system, &FeedbackScheme::None),
            (&self.system, &self.jump),
            (&self.system, &self.homodyne),
            (&self.bare, &self.gaussian),
        ]
    }
}

/// Dimension 2 or 3, one or two jump channels, random feedback of each kind.
pub fn random_case(rng: &mut ChaCha8Rng) -> RandomCase {
    let d = rng.random_range(2..=3);
    let nc = rng.random_range(1..=2);
    let h = hermitian(rng, d, 0.7);
    let jumps: Vec<CMatrix> = (0..nc).map(|_| gaussian_matrix(rng, d, 0.45)).collect();
    let system = OpenSystem::new(h.clone(), jumps).expect("valid system");
    let bare = OpenSystem::new(h, vec![]).expect("valid system");
    let nu: Vec<f64> = (0..nc).map(|_| rng.random_range(0.2..1.5)).collect();
    let fs: Vec<CMatrix> = (0..nc).map(|_| hermitian(rng, d, 0.6)).collect();
    let phi: Vec<f64> = (0..nc).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
    let jump = FeedbackScheme::Jump(JumpFeedback::new(nu, fs).expect("valid feedback"));
    let homodyne = FeedbackScheme::Homodyne(HomodyneFeedback::new(phi, hermitian(rng, d, 0.6)).expect("valid feedback"));
    let lambda = rng.random_range(0.2..1.0);
    let gaussian =
        FeedbackScheme::Gaussian(GaussianFeedback::new(hermitian(rng, d, 0.6), lambda, hermitian(rng, d, 0.6)).expect("valid feedback"));
    let rho0 = mixed_state(rng, d);
    RandomCase {
        system,
        bare,
        rho0,
        jump,
        homodyne,
        gaussian,
    }
}
