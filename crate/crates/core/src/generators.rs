//! Liouvillians of a monitored open system with and without Markovian feedback,
//! their Heisenberg-picture adjoints, the split maps entering the activity and
//! the two-sided tilted generators used for finite differences.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linops::{
    c, commutator_map, dissipator, expm, left_mul, right_mul, sandwich, CMatrix, QOperator,
    SuperOperator, C64, I,
};

const HERMITIAN_TOL: f64 = 1e-10;

/// Hamiltonian plus monitored jump channels.
#[derive(Clone, Debug, PartialEq)]
pub struct OpenSystem {
    h: QOperator,
    jumps: Vec<QOperator>,
}

impl OpenSystem {
    pub fn new(h: CMatrix, jumps: Vec<CMatrix>) -> Result<Self> {
        let h = QOperator::new(h)?;
        h.ensure_hermitian("Hamiltonian", HERMITIAN_TOL)?;
        let d = h.dim();
        let jumps = jumps
            .into_iter()
            .map(|l| {
                let l = QOperator::new(l)?;
                if l.dim() != d {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        found: l.dim(),
                    });
                }
                Ok(l)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { h, jumps })
    }

    pub fn dim(&self) -> usize {
        self.h.dim()
    }

    pub fn hamiltonian(&self) -> &QOperator {
        &self.h
    }

    pub fn jumps(&self) -> &[QOperator] {
        &self.jumps
    }

    pub fn n_channels(&self) -> usize {
        self.jumps.len()
    }

    /// Sum of L^dag L over all channels.
    pub fn total_decay(&self) -> CMatrix {
        let d = self.dim();
        self.jumps
            .iter()
            .fold(CMatrix::zeros(d, d), |acc, l| acc + l.adjoint() * l.matrix())
    }
}

fn hermitian(m: CMatrix, what: &'static str, dim: usize) -> Result<QOperator> {
    let op = QOperator::new(m)?;
    if op.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: op.dim(),
        });
    }
    op.ensure_hermitian(what, HERMITIAN_TOL)?;
    Ok(op)
}

/// Unitary kick exp(-i nu_z F_z) after each jump in channel z.
#[derive(Clone, Debug, PartialEq)]
pub struct JumpFeedback {
    nu: Vec<f64>,
    f: Vec<QOperator>,
}

impl JumpFeedback {
    pub fn new(nu: Vec<f64>, f: Vec<CMatrix>) -> Result<Self> {
        if nu.len() != f.len() {
            return Err(Error::DimensionMismatch {
                expected: nu.len(),
                found: f.len(),
            });
        }
        if nu.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("feedback strength must be finite".into()));
        }
        let dim = f.first().map(|m| m.nrows()).unwrap_or(0);
        let f = f
            .into_iter()
            .map(|m| hermitian(m, "feedback operator", dim))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { nu, f })
    }

    /// Same strength and operator on every one of `n_channels` channels.
    pub fn uniform(nu: f64, f: CMatrix, n_channels: usize) -> Result<Self> {
        Self::new(vec![nu; n_channels], vec![f; n_channels])
    }

    pub fn nu(&self) -> &[f64] {
        &self.nu
    }

    pub fn operators(&self) -> &[QOperator] {
        &self.f
    }

    /// exp(-i nu_z F_z) per channel.
    pub fn unitaries(&self) -> Result<Vec<CMatrix>> {
        self.nu
            .iter()
            .zip(&self.f)
            .map(|(&nu, f)| expm(&(f.matrix() * (-I)), nu))
            .collect()
    }
}

/// Hamiltonian feedback F I(t) driven by the homodyne currents, with a per-channel
/// local-oscillator phase. Strength is folded into F.
#[derive(Clone, Debug, PartialEq)]
pub struct HomodyneFeedback {
    phi: Vec<f64>,
    f: QOperator,
}

impl HomodyneFeedback {
    pub fn new(phi: Vec<f64>, f: CMatrix) -> Result<Self> {
        if phi.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("homodyne phase must be finite".into()));
        }
        let d = f.nrows();
        Ok(Self {
            phi,
            f: hermitian(f, "feedback operator", d)?,
        })
    }

    pub fn phases(&self) -> &[f64] {
        &self.phi
    }

    pub fn operator(&self) -> &QOperator {
        &self.f
    }
}

/// Continuous weak measurement of a Hermitian Y at rate lambda with feedback F.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianFeedback {
    y: QOperator,
    lambda: f64,
    f: QOperator,
}

impl GaussianFeedback {
    pub fn new(y: CMatrix, lambda: f64, f: CMatrix) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "measurement strength must be positive, got {lambda}"
            )));
        }
        let d = y.nrows();
        Ok(Self {
            y: hermitian(y, "measured observable", d)?,
            lambda,
            f: hermitian(f, "feedback operator", d)?,
        })
    }

    pub fn observable(&self) -> &QOperator {
        &self.y
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn operator(&self) -> &QOperator {
        &self.f
    }

    /// Equivalent homodyne problem: L = sqrt(lambda) Y, phase 0, F / (2 sqrt(lambda)).
    /// The homodyne integrated current equals 2 sqrt(lambda) times the Gaussian one.
    pub fn as_homodyne(&self, h: &QOperator) -> Result<(OpenSystem, HomodyneFeedback)> {
        let s = self.lambda.sqrt();
        let sys = OpenSystem::new(h.matrix().clone(), vec![self.y.matrix() * c(s)])?;
        let fb = HomodyneFeedback::new(vec![0.0], self.f.matrix() * c(0.5 / s))?;
        Ok((sys, fb))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum FeedbackScheme {
    None,
    Jump(JumpFeedback),
    Homodyne(HomodyneFeedback),
    Gaussian(GaussianFeedback),
}

/// How the monitored record is read out.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Readout {
    Counting,
    Diffusive,
}

impl FeedbackScheme {
    pub fn name(&self) -> &'static str {
        match self {
            FeedbackScheme::None => "none",
            FeedbackScheme::Jump(_) => "jump",
            FeedbackScheme::Homodyne(_) => "homodyne",
            FeedbackScheme::Gaussian(_) => "gaussian",
        }
    }

    pub fn readout(&self) -> Readout {
        match self {
            FeedbackScheme::None | FeedbackScheme::Jump(_) => Readout::Counting,
            FeedbackScheme::Homodyne(_) | FeedbackScheme::Gaussian(_) => Readout::Diffusive,
        }
    }

    /// Checks channel counts and dimensions against `sys`.
    pub fn validate(&self, sys: &OpenSystem) -> Result<()> {
        let d = sys.dim();
        let check_dim = |op: &QOperator| {
            if op.dim() != d {
                Err(Error::DimensionMismatch {
                    expected: d,
                    found: op.dim(),
                })
            } else {
                Ok(())
            }
        };
        match self {
            FeedbackScheme::None => Ok(()),
            FeedbackScheme::Jump(fb) => {
                if fb.nu.len() != sys.n_channels() {
                    return Err(Error::DimensionMismatch {
                        expected: sys.n_channels(),
                        found: fb.nu.len(),
                    });
                }
                fb.f.iter().try_for_each(check_dim)
            }
            FeedbackScheme::Homodyne(fb) => {
                if fb.phi.len() != sys.n_channels() {
                    return Err(Error::DimensionMismatch {
                        expected: sys.n_channels(),
                        found: fb.phi.len(),
                    });
                }
                check_dim(&fb.f)
            }
            FeedbackScheme::Gaussian(fb) => {
                if sys.n_channels() != 0 {
                    return Err(Error::SchemeMismatch(
                        "Gaussian feedback takes the measured observable in place of jump channels"
                            .into(),
                    ));
                }
                check_dim(&fb.y)?;
                check_dim(&fb.f)
            }
        }
    }
}

/// Plain Lindblad generator without feedback.
pub fn lindblad(sys: &OpenSystem) -> SuperOperator {
    let mut gen = commutator_map(sys.hamiltonian());
    for l in sys.jumps() {
        gen = gen.add(&dissipator(l));
    }
    gen
}

/// Jump channels whose post-jump state is rotated by exp(-i nu_z F_z).
pub fn jump_fb(sys: &OpenSystem, fb: &JumpFeedback) -> Result<SuperOperator> {
    FeedbackScheme::Jump(fb.clone()).validate(sys)?;
    let mut gen = commutator_map(sys.hamiltonian());
    for (l, u) in sys.jumps().iter().zip(fb.unitaries()?) {
        let ld = l.adjoint();
        let ldl = &ld * l.matrix();
        gen = gen.add(&sandwich(&(&u * l.matrix()), &(&ld * u.adjoint()))?);
        gen.add_scaled(&left_mul(&ldl), c(-0.5));
        gen.add_scaled(&right_mul(&ldl), c(-0.5));
    }
    Ok(gen)
}

pub fn homodyne_fb(sys: &OpenSystem, fb: &HomodyneFeedback) -> Result<SuperOperator> {
    FeedbackScheme::Homodyne(fb.clone()).validate(sys)?;
    let fmap = commutator_map(fb.operator());
    let f2 = SuperOperator::new(sys.dim(), fmap.matrix() * fmap.matrix())?;
    let mut gen = commutator_map(sys.hamiltonian());
    for (l, &phi) in sys.jumps().iter().zip(fb.phases()) {
        gen = gen.add(&dissipator(l));
        let drive = left_mul(l)
            .scaled(C64::from_polar(1.0, -phi))
            .add(&right_mul(&l.adjoint()).scaled(C64::from_polar(1.0, phi)));
        gen = gen.add(&SuperOperator::new(sys.dim(), fmap.matrix() * drive.matrix())?);
        gen.add_scaled(&f2, c(0.5));
    }
    Ok(gen)
}

pub fn gaussian_fb(h: &QOperator, fb: &GaussianFeedback) -> Result<SuperOperator> {
    let d = h.dim();
    let sys = OpenSystem::new(h.matrix().clone(), vec![])?;
    FeedbackScheme::Gaussian(fb.clone()).validate(&sys)?;
    let y = fb.observable().matrix();
    let fmap = commutator_map(fb.operator());
    let anti = left_mul(y).add(&right_mul(y));
    let mut gen = commutator_map(h);
    gen.add_scaled(&dissipator(y), c(fb.lambda()));
    gen.add_scaled(&SuperOperator::new(d, fmap.matrix() * anti.matrix())?, c(0.5));
    gen.add_scaled(
        &SuperOperator::new(d, fmap.matrix() * fmap.matrix())?,
        c(1.0 / (8.0 * fb.lambda())),
    );
    Ok(gen)
}

/// Schrodinger-picture generator of `scheme` acting on `sys`.
pub fn generator(sys: &OpenSystem, scheme: &FeedbackScheme) -> Result<SuperOperator> {
    scheme.validate(sys)?;
    match scheme {
        FeedbackScheme::None => Ok(lindblad(sys)),
        FeedbackScheme::Jump(fb) => jump_fb(sys, fb),
        FeedbackScheme::Homodyne(fb) => homodyne_fb(sys, fb),
        FeedbackScheme::Gaussian(fb) => gaussian_fb(sys.hamiltonian(), fb),
    }
}

/// Heisenberg-picture generator, assembled from the operator form of the adjoint
/// rather than by transposing the forward generator.
pub fn adjoint_generator(sys: &OpenSystem, scheme: &FeedbackScheme) -> Result<SuperOperator> {
    scheme.validate(sys)?;
    let d = sys.dim();
    // O -> i[A, O]
    let heis = |a: &CMatrix| commutator_map(a).scaled(c(-1.0));
    let decay_part = |ld_l: &CMatrix, gen: &mut SuperOperator| {
        gen.add_scaled(&left_mul(ld_l), c(-0.5));
        gen.add_scaled(&right_mul(ld_l), c(-0.5));
    };
    let mut gen = heis(sys.hamiltonian());
    match scheme {
        FeedbackScheme::None => {
            for l in sys.jumps() {
                let ld = l.adjoint();
                gen = gen.add(&sandwich(&ld, l)?);
                decay_part(&(&ld * l.matrix()), &mut gen);
            }
        }
        FeedbackScheme::Jump(fb) => {
            for (l, u) in sys.jumps().iter().zip(fb.unitaries()?) {
                let ld = l.adjoint();
                gen = gen.add(&sandwich(&(&ld * u.adjoint()), &(&u * l.matrix()))?);
                decay_part(&(&ld * l.matrix()), &mut gen);
            }
        }
        FeedbackScheme::Homodyne(fb) => {
            let fa = heis(fb.operator());
            let fa2 = fa.matrix() * fa.matrix();
            for (l, &phi) in sys.jumps().iter().zip(fb.phases()) {
                let ld = l.adjoint();
                gen = gen.add(&sandwich(&ld, l)?);
                decay_part(&(&ld * l.matrix()), &mut gen);
                let m = right_mul(l).matrix() * fa.matrix() * C64::from_polar(1.0, -phi)
                    + left_mul(&ld).matrix() * fa.matrix() * C64::from_polar(1.0, phi)
                    + &fa2 * c(0.5);
                gen = gen.add(&SuperOperator::new(d, m)?);
            }
        }
        FeedbackScheme::Gaussian(fb) => {
            let y = fb.observable().matrix();
            let lam = fb.lambda();
            let fa = heis(fb.operator());
            gen.add_scaled(&sandwich(y, y)?, c(lam));
            decay_part(&(y * y * c(lam)), &mut gen);
            let m = (right_mul(y).matrix() + left_mul(y).matrix()) * fa.matrix() * c(0.5)
                + fa.matrix() * fa.matrix() * c(1.0 / (8.0 * lam));
            gen = gen.add(&SuperOperator::new(d, m)?);
        }
    }
    Ok(gen)
}

/// Operators that enter the activity of a scheme.
#[derive(Clone, Debug)]
pub struct ActivityOperators {
    /// Non-Hermitian effective Hamiltonian of the split generator.
    pub h_eff: CMatrix,
    /// Hermitian G with Tr[K1 X] = -i Tr[G X] and Tr[K2 X] = i Tr[G X].
    pub g: CMatrix,
    /// Hermitian W whose expectation integrates to the classical (diagonal) activity.
    pub w: CMatrix,
}

pub fn activity_operators(sys: &OpenSystem, scheme: &FeedbackScheme) -> Result<ActivityOperators> {
    scheme.validate(sys)?;
    let h = sys.hamiltonian().matrix().clone();
    let d = sys.dim();
    let zero = CMatrix::zeros(d, d);
    Ok(match scheme {
        FeedbackScheme::None | FeedbackScheme::Jump(_) => {
            let decay = sys.total_decay();
            ActivityOperators {
                h_eff: &h - &decay * (I * 0.5),
                g: h,
                w: decay,
            }
        }
        FeedbackScheme::Homodyne(fb) => {
            let f = fb.operator().matrix();
            let f2 = f * f;
            let mut h_eff = h.clone();
            let mut g = h.clone();
            let mut w = zero;
            for (l, &phi) in sys.jumps().iter().zip(fb.phases()) {
                let l = l.matrix();
                let ld = l.adjoint();
                let em = C64::from_polar(1.0, -phi);
                let ep = C64::from_polar(1.0, phi);
                h_eff += &ld * l * (-I * 0.5) + f * l * em + &f2 * (-I * 0.5);
                g += (&ld * f * ep + f * l * em) * c(0.5);
                w += &ld * l + f * l * (I * em) - &ld * f * (I * ep) + &f2;
            }
            ActivityOperators { h_eff, g, w }
        }
        FeedbackScheme::Gaussian(fb) => {
            let y = fb.observable().matrix();
            let f = fb.operator().matrix();
            let lam = fb.lambda();
            let h_eff = &h + y * y * (-I * (lam / 2.0)) + f * y * c(0.5) + f * f * (-I / (8.0 * lam));
            let g = &h + (f * y + y * f) * c(0.25);
            let w = y * y * c(lam) + (f * y - y * f) * (I * 0.5) + f * f * c(1.0 / (4.0 * lam));
            ActivityOperators { h_eff, g, w }
        }
    })
}

/// Split of the generator into K1 + K2 such that the activity follows from
/// K1 and K2 alone: K1 = -i H_eff . + S, K2 = i . H_eff^dag + S.
pub fn kmaps(sys: &OpenSystem, scheme: &FeedbackScheme) -> Result<(SuperOperator, SuperOperator)> {
    let ops = activity_operators(sys, scheme)?;
    let d = sys.dim();
    let mut shared = SuperOperator::zeros(d);
    match scheme {
        FeedbackScheme::None => {
            for l in sys.jumps() {
                shared.add_scaled(&sandwich(l, &l.adjoint())?, c(0.5));
            }
        }
        FeedbackScheme::Jump(fb) => {
            for (l, u) in sys.jumps().iter().zip(fb.unitaries()?) {
                let ul = &u * l.matrix();
                shared.add_scaled(&sandwich(&ul, &ul.adjoint())?, c(0.5));
            }
        }
        FeedbackScheme::Homodyne(fb) => {
            let f = fb.operator().matrix();
            for (l, &phi) in sys.jumps().iter().zip(fb.phases()) {
                let l = l.matrix();
                let ld = l.adjoint();
                shared.add_scaled(&sandwich(l, &ld)?, c(0.5));
                shared.add_scaled(&sandwich(f, &ld)?, -I * 0.5 * C64::from_polar(1.0, phi));
                shared.add_scaled(&sandwich(l, f)?, I * 0.5 * C64::from_polar(1.0, -phi));
                shared.add_scaled(&sandwich(f, f)?, c(0.5));
            }
        }
        FeedbackScheme::Gaussian(fb) => {
            let y = fb.observable().matrix();
            let f = fb.operator().matrix();
            let lam = fb.lambda();
            shared.add_scaled(&sandwich(y, y)?, c(lam / 2.0));
            shared.add_scaled(&sandwich(f, y)?, -I * 0.25);
            shared.add_scaled(&sandwich(y, f)?, I * 0.25);
            shared.add_scaled(&sandwich(f, f)?, c(1.0 / (8.0 * lam)));
        }
    }
    let k1 = left_mul(&ops.h_eff).scaled(-I).add(&shared);
    let k2 = right_mul(&ops.h_eff.adjoint()).scaled(I).add(&shared);
    Ok((k1, k2))
}

/// Two-sided tilted generator: the ket side is evolved with parameter `theta`
/// and the bra side with `phi`. Reduces to the generator at (0, 0).
pub fn two_sided(
    sys: &OpenSystem,
    scheme: &FeedbackScheme,
    theta: f64,
    phi: f64,
) -> Result<SuperOperator> {
    scheme.validate(sys)?;
    if theta <= -1.0 || phi <= -1.0 {
        return Err(Error::InvalidParameter("tilt parameters must exceed -1".into()));
    }
    let d = sys.dim();
    let a = (1.0 + theta).sqrt();
    let b = (1.0 + phi).sqrt();
    let h = sys.hamiltonian().matrix();
    let ham = |gen: &mut SuperOperator| {
        gen.add_scaled(&left_mul(h), -I * (1.0 + theta));
        gen.add_scaled(&right_mul(h), I * (1.0 + phi));
    };
    // X -> L_t X L_p^dag - (L_t^dag L_t X + X L_p^dag L_p) / 2 with L_t = a L, L_p = b L
    let tilted_dissipator = |l: &CMatrix, jump_l: &CMatrix, jump_r: &CMatrix, gen: &mut SuperOperator| {
        let ldl = l.adjoint() * l;
        gen.add_scaled(&sandwich(jump_l, jump_r).expect("square"), c(a * b));
        gen.add_scaled(&left_mul(&ldl), c(-0.5 * a * a));
        gen.add_scaled(&right_mul(&ldl), c(-0.5 * b * b));
    };
    // X -> -i (F_t X - X F_p)
    let tilted_fmap = |f: &CMatrix| {
        left_mul(f)
            .scaled(-I * a)
            .add(&right_mul(f).scaled(I * b))
    };
    let mut gen = SuperOperator::zeros(d);
    ham(&mut gen);
    match scheme {
        FeedbackScheme::None => {
            for l in sys.jumps() {
                tilted_dissipator(l, l, &l.adjoint(), &mut gen);
            }
        }
        FeedbackScheme::Jump(fb) => {
            for (l, u) in sys.jumps().iter().zip(fb.unitaries()?) {
                let ul = &u * l.matrix();
                tilted_dissipator(l, &ul, &ul.adjoint(), &mut gen);
            }
        }
        FeedbackScheme::Homodyne(fb) => {
            let fm = tilted_fmap(fb.operator());
            let fm2 = fm.matrix() * fm.matrix();
            for (l, &ph) in sys.jumps().iter().zip(fb.phases()) {
                tilted_dissipator(l, l, &l.adjoint(), &mut gen);
                let drive = left_mul(l)
                    .scaled(C64::from_polar(a, -ph))
                    .add(&right_mul(&l.adjoint()).scaled(C64::from_polar(b, ph)));
                gen = gen.add(&SuperOperator::new(d, fm.matrix() * drive.matrix())?);
                gen = gen.add(&SuperOperator::new(d, &fm2 * c(0.5))?);
            }
        }
        FeedbackScheme::Gaussian(fb) => {
            let y = fb.observable().matrix();
            let lam = fb.lambda();
            let y2 = y * y;
            gen.add_scaled(&sandwich(y, y)?, c(lam * a * b));
            gen.add_scaled(&left_mul(&y2), c(-0.5 * lam * a * a));
            gen.add_scaled(&right_mul(&y2), c(-0.5 * lam * b * b));
            let fm = tilted_fmap(fb.operator());
            let anti = left_mul(y).scaled(c(a)).add(&right_mul(y).scaled(c(b)));
            let m = fm.matrix() * anti.matrix() * c(0.5)
                + fm.matrix() * fm.matrix() * c(1.0 / (8.0 * lam));
            gen = gen.add(&SuperOperator::new(d, m)?);
        }
    }
    Ok(gen)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linops::{max_abs, pauli_x, pauli_z};

    fn qubit() -> OpenSystem {
        let h = CMatrix::from_row_slice(2, 2, &[c(1.0), c(0.5), c(0.5), c(0.0)]);
        let l = CMatrix::from_row_slice(2, 2, &[c(0.0), c(0.0), c(0.7), c(0.0)]);
        OpenSystem::new(h, vec![l]).unwrap()
    }

    fn schemes() -> Vec<(OpenSystem, FeedbackScheme)> {
        let sys = qubit();
        let h_only = OpenSystem::new(sys.hamiltonian().matrix().clone(), vec![]).unwrap();
        vec![
            (sys.clone(), FeedbackScheme::None),
            (sys.clone(), FeedbackScheme::Jump(JumpFeedback::uniform(0.8, pauli_x(), 1).unwrap())),
            (sys.clone(), FeedbackScheme::Homodyne(HomodyneFeedback::new(vec![0.4], pauli_x() * c(0.6)).unwrap())),
            (h_only, FeedbackScheme::Gaussian(GaussianFeedback::new(pauli_z(), 0.9, pauli_x() * c(0.3)).unwrap())),
        ]
    }

    #[test]
    fn generators_preserve_trace() {
        for (sys, scheme) in schemes() {
            assert!(generator(&sys, &scheme).unwrap().trace_residual() < 1e-13, "{}", scheme.name());
        }
    }

    #[test]
    fn adjoint_matches_transpose() {
        for (sys, scheme) in schemes() {
            let fwd = generator(&sys, &scheme).unwrap();
            let adj = adjoint_generator(&sys, &scheme).unwrap();
            assert!(max_abs(&(adj.matrix() - fwd.dagger().matrix())) < 1e-12, "{}", scheme.name());
        }
    }

    #[test]
    fn kmaps_sum_to_generator() {
        for (sys, scheme) in schemes() {
            let (k1, k2) = kmaps(&sys, &scheme).unwrap();
            let gen = generator(&sys, &scheme).unwrap();
            assert!(max_abs(&(k1.add(&k2).matrix() - gen.matrix())) < 1e-12, "{}", scheme.name());
        }
    }

    #[test]
    fn two_sided_reduces_at_origin_and_splits_derivatives() {
        let h = 1e-5;
        for (sys, scheme) in schemes() {
            let gen = generator(&sys, &scheme).unwrap();
            let t0 = two_sided(&sys, &scheme, 0.0, 0.0).unwrap();
            assert!(max_abs(&(t0.matrix() - gen.matrix())) < 1e-13);
            let (k1, k2) = kmaps(&sys, &scheme).unwrap();
            let d1 = (two_sided(&sys, &scheme, h, 0.0).unwrap().matrix()
                - two_sided(&sys, &scheme, -h, 0.0).unwrap().matrix())
                / c(2.0 * h);
            let d2 = (two_sided(&sys, &scheme, 0.0, h).unwrap().matrix()
                - two_sided(&sys, &scheme, 0.0, -h).unwrap().matrix())
                / c(2.0 * h);
            assert!(max_abs(&(d1 - k1.matrix())) < 1e-8, "{}", scheme.name());
            assert!(max_abs(&(d2 - k2.matrix())) < 1e-8, "{}", scheme.name());
        }
    }

    #[test]
    fn g_operator_reproduces_kmap_traces() {
        for (sys, scheme) in schemes() {
            let ops = activity_operators(&sys, &scheme).unwrap();
            let (k1, k2) = kmaps(&sys, &scheme).unwrap();
            let x = CMatrix::from_row_slice(2, 2, &[c(0.3), C64::new(0.1, 0.2), C64::new(-0.4, 0.05), c(0.7)]);
            let t1 = k1.apply_op(&x).trace();
            let t2 = k2.apply_op(&x).trace();
            let tg = (&ops.g * &x).trace();
            assert!((t1 + I * tg).norm() < 1e-13);
            assert!((t2 - I * tg).norm() < 1e-13);
            assert!(max_abs(&(&ops.g - ops.g.adjoint())) < 1e-14);
            assert!(max_abs(&(&ops.w - ops.w.adjoint())) < 1e-14);
        }
    }

    #[test]
    fn gaussian_equals_mapped_homodyne() {
        let (_, FeedbackScheme::Gaussian(fb)) = schemes().pop().unwrap() else { unreachable!() };
        let h = qubit().hamiltonian().clone();
        let (hsys, hfb) = fb.as_homodyne(&h).unwrap();
        let g1 = gaussian_fb(&h, &fb).unwrap();
        let g2 = homodyne_fb(&hsys, &hfb).unwrap();
        assert!(max_abs(&(g1.matrix() - g2.matrix())) < 1e-13);
    }

    #[test]
    fn rejects_mismatched_channels() {
        let sys = qubit();
        let fb = JumpFeedback::uniform(1.0, pauli_x(), 2).unwrap();
        assert!(generator(&sys, &FeedbackScheme::Jump(fb)).is_err());
        let non_herm = CMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(0.0), c(0.0)]);
        assert!(JumpFeedback::uniform(1.0, non_herm, 1).is_err());
    }
}
