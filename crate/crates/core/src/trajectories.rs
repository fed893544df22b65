//! Stochastic unravelings of the feedback master equations.
//!
//! Trajectories evolve state vectors. A mixed initial state is handled by
//! drawing one of its eigenvectors per trajectory with the eigenvalue as
//! probability, which leaves the record statistics and the ensemble average
//! unchanged. Each trajectory owns a ChaCha stream keyed by (seed, index), and
//! results are merged in index order, so output does not depend on the thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolve::evolve_to;
use crate::generators::{
    generator, FeedbackScheme, GaussianFeedback, HomodyneFeedback, JumpFeedback, OpenSystem,
};
use crate::linops::{c, expm, hermitian_eigen, max_abs, CMatrix, DensityMatrix, QOperator, C64, I};

/// dt * rate above this logs a warning.
pub const RATE_WARN: f64 = 0.05;
/// dt * rate above this is rejected.
pub const RATE_MAX: f64 = 0.2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryConfig {
    pub dt: f64,
    pub t_end: f64,
    pub n_traj: usize,
    pub seed: u64,
    #[serde(default)]
    pub record_jumps: bool,
}

impl TrajectoryConfig {
    fn validate(&self) -> Result<usize> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return Err(Error::InvalidParameter(format!("t_end must be positive, got {}", self.t_end)));
        }
        if self.n_traj < 2 {
            return Err(Error::InvalidParameter("need at least two trajectories for a variance".into()));
        }
        Ok(((self.t_end / self.dt) - 1e-9).ceil().max(1.0) as usize)
    }
}

/// One detected jump.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct JumpRecord {
    pub trajectory: usize,
    pub time: f64,
    pub channel: usize,
}

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

fn compensated_mean(xs: impl Iterator<Item = f64>, n: usize) -> f64 {
    let mut s = CompensatedSum::default();
    xs.for_each(|x| s.add(x));
    s.value() / n as f64
}

/// Sample statistics of a time-integrated observable.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrajectoryStats {
    pub n: usize,
    pub mean: f64,
    /// Unbiased sample variance.
    pub variance: f64,
    /// Mean raw jump count per channel (empty for diffusive readout).
    pub channel_counts: Vec<f64>,
    #[serde(skip)]
    pub samples: Vec<f64>,
}

impl TrajectoryStats {
    pub fn from_samples(samples: Vec<f64>, channel_counts: Vec<f64>) -> Result<Self> {
        let n = samples.len();
        if n < 2 {
            return Err(Error::InvalidParameter("need at least two samples".into()));
        }
        let mean = compensated_mean(samples.iter().copied(), n);
        let ss = compensated_mean(samples.iter().map(|x| (x - mean).powi(2)), n);
        Ok(Self {
            n,
            mean,
            variance: ss * n as f64 / (n - 1) as f64,
            channel_counts,
            samples,
        })
    }

    /// k-th central sample moment.
    pub fn central_moment(&self, k: i32) -> f64 {
        compensated_mean(self.samples.iter().map(|x| (x - self.mean).powi(k)), self.n)
    }

    pub fn mean_stderr(&self) -> f64 {
        (self.variance / self.n as f64).sqrt()
    }

    /// Standard error of the sample variance.
    pub fn variance_stderr(&self) -> f64 {
        let m4 = self.central_moment(4);
        let s2 = self.central_moment(2);
        ((m4 - s2 * s2).max(0.0) / self.n as f64).sqrt()
    }

    /// Var / mean^2.
    pub fn precision(&self) -> f64 {
        self.variance / (self.mean * self.mean)
    }

    /// Delta-method standard error of Var / mean^2.
    pub fn precision_stderr(&self) -> f64 {
        let m = self.mean;
        let s2 = self.central_moment(2);
        let m3 = self.central_moment(3);
        let m4 = self.central_moment(4);
        let v = (m4 - s2 * s2) / m.powi(4) + 4.0 * s2.powi(3) / m.powi(6) - 4.0 * s2 * m3 / m.powi(5);
        (v.max(0.0) / self.n as f64).sqrt()
    }

    /// (E|X|^p)^(1/p).
    pub fn p_norm(&self, p: f64) -> f64 {
        compensated_mean(self.samples.iter().map(|x| x.abs().powf(p)), self.n).powf(1.0 / p)
    }

    /// ||X||_p / ||X||_1 and its delta-method standard error.
    pub fn norm_ratio(&self, p: f64) -> (f64, f64) {
        let n = self.n as f64;
        let a = compensated_mean(self.samples.iter().map(|x| x.abs().powf(p)), self.n);
        let b = compensated_mean(self.samples.iter().map(|x| x.abs()), self.n);
        let ratio = a.powf(1.0 / p) / b;
        let var_a = compensated_mean(self.samples.iter().map(|x| (x.abs().powf(p) - a).powi(2)), self.n);
        let var_b = compensated_mean(self.samples.iter().map(|x| (x.abs() - b).powi(2)), self.n);
        let cov = compensated_mean(
            self.samples.iter().map(|x| (x.abs().powf(p) - a) * (x.abs() - b)),
            self.n,
        );
        let ga = a.powf(1.0 / p - 1.0) / (p * b);
        let gb = -ratio / b;
        let var = ga * ga * var_a + gb * gb * var_b + 2.0 * ga * gb * cov;
        (ratio, (var.max(0.0) / n).sqrt())
    }

    fn scaled(mut self, s: f64) -> Self {
        self.mean *= s;
        self.variance *= s * s;
        for x in self.samples.iter_mut() {
            *x *= s;
        }
        self
    }
}

/// Outcome of an ensemble run.
#[derive(Clone, Debug)]
pub struct Ensemble {
    /// Weighted counts for jump readout, integrated current for diffusive readout.
    pub stats: TrajectoryStats,
    /// Ensemble average of the final states.
    pub mean_state: DensityMatrix,
    pub records: Vec<JumpRecord>,
    pub steps: usize,
}

/// Row-major dense matrix with allocation-free products, for the inner loops.
#[derive(Clone, Debug)]
struct Small {
    d: usize,
    a: Vec<C64>,
}

impl Small {
    fn from(m: &CMatrix) -> Self {
        let d = m.nrows();
        Self {
            d,
            a: (0..d * d).map(|k| m[(k / d, k % d)]).collect(),
        }
    }

    fn apply(&self, x: &[C64], out: &mut [C64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.a[i * self.d..(i + 1) * self.d];
            *o = row.iter().zip(x).fold(C64::new(0.0, 0.0), |acc, (r, v)| acc + r * v);
        }
    }
}

fn norm_sqr(x: &[C64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum()
}

fn normalize(x: &mut [C64]) -> Result<()> {
    let n = norm_sqr(x);
    if !(n.is_finite() && n > 0.0) {
        return Err(Error::NormDrift(n));
    }
    let s = 1.0 / n.sqrt();
    x.iter_mut().for_each(|z| *z *= s);
    Ok(())
}

/// Eigen-decomposition of rho0 used to draw initial pure states.
struct InitialSampler {
    cumulative: Vec<f64>,
    vectors: Vec<Vec<C64>>,
}

impl InitialSampler {
    fn new(rho0: &DensityMatrix) -> Self {
        let (vals, vecs) = hermitian_eigen(rho0.matrix());
        let total: f64 = vals.iter().map(|v| v.max(0.0)).sum();
        let mut acc = 0.0;
        let mut cumulative = Vec::new();
        let mut vectors = Vec::new();
        for (k, v) in vals.iter().enumerate() {
            if *v > 1e-14 {
                acc += v / total;
                cumulative.push(acc);
                vectors.push(vecs.column(k).iter().copied().collect());
            }
        }
        Self { cumulative, vectors }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> Vec<C64> {
        if self.vectors.len() == 1 {
            return self.vectors[0].clone();
        }
        let u: f64 = rng.random();
        let k = self.cumulative.iter().position(|&c| u < c).unwrap_or(self.vectors.len() - 1);
        self.vectors[k].clone()
    }
}

fn rng_for(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn check_rate(rate: f64, dt: f64) -> Result<()> {
    let x = rate * dt;
    if x > RATE_MAX {
        return Err(Error::TimeStepTooLarge(x));
    }
    if x > RATE_WARN {
        log::warn!("dt * rate = {x:.3e}; trajectory statistics may carry visible time-step bias");
    }
    Ok(())
}

fn largest_eigenvalue(m: &CMatrix) -> f64 {
    hermitian_eigen(m).0.last().copied().unwrap_or(0.0)
}

struct TrajOutcome {
    value: f64,
    counts: Vec<u32>,
    psi: Vec<C64>,
    records: Vec<JumpRecord>,
}

fn merge(outcomes: Vec<TrajOutcome>, d: usize, n_channels: usize, steps: usize) -> Result<Ensemble> {
    let n = outcomes.len();
    let mut state = vec![CompensatedSum::default(); 2 * d * d];
    let mut counts = vec![CompensatedSum::default(); n_channels];
    let mut samples = Vec::with_capacity(n);
    let mut records = Vec::new();
    for o in outcomes {
        for i in 0..d {
            for j in 0..d {
                let z = o.psi[i] * o.psi[j].conj();
                state[2 * (i * d + j)].add(z.re);
                state[2 * (i * d + j) + 1].add(z.im);
            }
        }
        for (acc, &k) in counts.iter_mut().zip(&o.counts) {
            acc.add(k as f64);
        }
        samples.push(o.value);
        records.extend(o.records);
    }
    let rho = CMatrix::from_fn(d, d, |i, j| {
        C64::new(state[2 * (i * d + j)].value(), state[2 * (i * d + j) + 1].value()) / n as f64
    });
    Ok(Ensemble {
        stats: TrajectoryStats::from_samples(samples, counts.iter().map(|s| s.value() / n as f64).collect())?,
        mean_state: DensityMatrix::from_numerical(rho)?,
        records,
        steps,
    })
}

/// Jump unraveling. Between jumps the state follows exp(-i H_eff dt); a jump in
/// channel z applies L_z, then the feedback kick, then the Hamiltonian step.
/// The observable is sum_z weight_z N_z.
fn jump_engine(
    sys: &OpenSystem,
    kicks: Option<&JumpFeedback>,
    weights: &[f64],
    rho0: &DensityMatrix,
    cfg: &TrajectoryConfig,
) -> Result<Ensemble> {
    let steps = cfg.validate()?;
    let dt = cfg.t_end / steps as f64;
    let d = sys.dim();
    check_dim(sys, rho0)?;
    let decay = sys.total_decay();
    check_rate(largest_eigenvalue(&decay), dt)?;
    let h = sys.hamiltonian().matrix();
    let h_eff = h - &decay * (I * 0.5);
    let no_jump = Small::from(&expm(&(h_eff * (-I)), dt)?);
    let u_h = expm(&(h * (-I)), dt)?;
    let unitaries = match kicks {
        Some(fb) => fb.unitaries()?,
        None => vec![CMatrix::identity(d, d); sys.n_channels()],
    };
    let ls: Vec<Small> = sys.jumps().iter().map(|l| Small::from(l.matrix())).collect();
    let jumps: Vec<Small> = sys
        .jumps()
        .iter()
        .zip(&unitaries)
        .map(|(l, u)| Small::from(&(&u_h * u * l.matrix())))
        .collect();
    let sampler = InitialSampler::new(rho0);
    let nc = sys.n_channels();

    let run = |index: usize| -> Result<TrajOutcome> {
        let mut rng = rng_for(cfg.seed, index);
        let mut psi = sampler.draw(&mut rng);
        let mut tmp = vec![C64::new(0.0, 0.0); d];
        let mut probs = vec![0.0; nc];
        let mut counts = vec![0u32; nc];
        let mut value = CompensatedSum::default();
        let mut records = Vec::new();
        for step in 0..steps {
            let mut total = 0.0;
            for (z, l) in ls.iter().enumerate() {
                l.apply(&psi, &mut tmp);
                probs[z] = dt * norm_sqr(&tmp);
                total += probs[z];
            }
            if 1.0 - total < 0.0 {
                return Err(Error::NegativeNoJumpProbability(1.0 - total));
            }
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut fired = None;
            for (z, p) in probs.iter().enumerate() {
                acc += p;
                if u < acc {
                    fired = Some(z);
                    break;
                }
            }
            match fired {
                Some(z) => {
                    jumps[z].apply(&psi, &mut tmp);
                    counts[z] += 1;
                    value.add(weights[z]);
                    if cfg.record_jumps {
                        records.push(JumpRecord {
                            trajectory: index,
                            time: (step + 1) as f64 * dt,
                            channel: z,
                        });
                    }
                }
                None => no_jump.apply(&psi, &mut tmp),
            }
            std::mem::swap(&mut psi, &mut tmp);
            normalize(&mut psi)?;
        }
        Ok(TrajOutcome {
            value: value.value(),
            counts,
            psi,
            records,
        })
    };
    let outcomes = (0..cfg.n_traj).into_par_iter().map(run).collect::<Result<Vec<_>>>()?;
    merge(outcomes, d, nc, steps)
}

/// Jump-detection ensemble with feedback kicks; observable sum_z nu_z N_z.
pub fn run_jump_ensemble(
    sys: &OpenSystem,
    fb: &JumpFeedback,
    rho0: &DensityMatrix,
    cfg: &TrajectoryConfig,
) -> Result<Ensemble> {
    FeedbackScheme::Jump(fb.clone()).validate(sys)?;
    jump_engine(sys, Some(fb), fb.nu(), rho0, cfg)
}

/// Jump-detection ensemble without feedback; observable is the total count.
pub fn run_counting_ensemble(sys: &OpenSystem, rho0: &DensityMatrix, cfg: &TrajectoryConfig) -> Result<Ensemble> {
    jump_engine(sys, None, &vec![1.0; sys.n_channels()], rho0, cfg)
}

/// Homodyne unraveling with current feedback. Each step draws
/// dY_z = <c_z + c_z^dag> dt + dW_z with c_z = e^{-i phi_z} L_z, applies the
/// measurement operator 1 - sum L^dag L dt / 2 + sum c_z dY_z, then the exact
/// feedback unitary exp(-i F sum_z dY_z), then the Hamiltonian step.
/// The observable is the integrated current sum_z int dY_z.
pub fn run_homodyne_ensemble(
    sys: &OpenSystem,
    fb: &HomodyneFeedback,
    rho0: &DensityMatrix,
    cfg: &TrajectoryConfig,
) -> Result<Ensemble> {
    FeedbackScheme::Homodyne(fb.clone()).validate(sys)?;
    check_dim(sys, rho0)?;
    let steps = cfg.validate()?;
    let dt = cfg.t_end / steps as f64;
    let d = sys.dim();
    let nc = sys.n_channels();
    let decay = sys.total_decay();
    let f = fb.operator().matrix();
    let f_rate = nc as f64 * largest_eigenvalue(&(f * f));
    check_rate(largest_eigenvalue(&decay) + f_rate, dt)?;

    let drift = Small::from(&(CMatrix::identity(d, d) - &decay * c(0.5 * dt)));
    let cs: Vec<Small> = sys
        .jumps()
        .iter()
        .zip(fb.phases())
        .map(|(l, &phi)| Small::from(&(l.matrix() * C64::from_polar(1.0, -phi))))
        .collect();
    let u_h = Small::from(&expm(&(sys.hamiltonian().matrix() * (-I)), dt)?);
    let (f_vals, f_vecs) = hermitian_eigen(f);
    let to_eig = Small::from(&f_vecs.adjoint());
    let from_eig = Small::from(&f_vecs);
    let has_feedback = max_abs(f) > 0.0;
    let sampler = InitialSampler::new(rho0);
    let sqrt_dt = dt.sqrt();

    let run = |index: usize| -> Result<TrajOutcome> {
        let mut rng = rng_for(cfg.seed, index);
        let mut psi = sampler.draw(&mut rng);
        let mut next = vec![C64::new(0.0, 0.0); d];
        let mut tmp = vec![C64::new(0.0, 0.0); d];
        let mut cpsi = vec![vec![C64::new(0.0, 0.0); d]; nc];
        let mut value = CompensatedSum::default();
        for _ in 0..steps {
            drift.apply(&psi, &mut next);
            let mut current = 0.0;
            for (z, cz) in cs.iter().enumerate() {
                cz.apply(&psi, &mut cpsi[z]);
                let expect: f64 = 2.0 * psi.iter().zip(&cpsi[z]).map(|(a, b)| (a.conj() * b).re).sum::<f64>();
                let xi: f64 = rng.sample(StandardNormal);
                let dy = expect * dt + sqrt_dt * xi;
                current += dy;
                for (n, v) in next.iter_mut().zip(&cpsi[z]) {
                    *n += v * dy;
                }
            }
            normalize(&mut next)?;
            if has_feedback {
                to_eig.apply(&next, &mut tmp);
                for (z, &fk) in tmp.iter_mut().zip(&f_vals) {
                    *z *= C64::from_polar(1.0, -fk * current);
                }
                from_eig.apply(&tmp, &mut next);
            }
            u_h.apply(&next, &mut psi);
            let drift_norm = (norm_sqr(&psi) - 1.0).abs();
            if drift_norm > 1e-6 {
                return Err(Error::NormDrift(drift_norm));
            }
            value.add(current);
        }
        Ok(TrajOutcome {
            value: value.value(),
            counts: Vec::new(),
            psi,
            records: Vec::new(),
        })
    };
    let outcomes = (0..cfg.n_traj).into_par_iter().map(run).collect::<Result<Vec<_>>>()?;
    merge(outcomes, d, 0, steps)
}

/// Gaussian-measurement ensemble, run through the equivalent homodyne problem.
/// The reported observable is the integrated measurement record of Y, i.e. the
/// homodyne current divided by 2 sqrt(lambda).
pub fn run_gaussian_ensemble(
    h: &QOperator,
    fb: &GaussianFeedback,
    rho0: &DensityMatrix,
    cfg: &TrajectoryConfig,
) -> Result<Ensemble> {
    let (sys, hfb) = fb.as_homodyne(h)?;
    let mut ens = run_homodyne_ensemble(&sys, &hfb, rho0, cfg)?;
    ens.stats = ens.stats.scaled(0.5 / fb.lambda().sqrt());
    Ok(ens)
}

/// Dispatches on the scheme; `FeedbackScheme::None` counts jumps without feedback.
pub fn run_ensemble(
    sys: &OpenSystem,
    scheme: &FeedbackScheme,
    rho0: &DensityMatrix,
    cfg: &TrajectoryConfig,
) -> Result<Ensemble> {
    match scheme {
        FeedbackScheme::None => run_counting_ensemble(sys, rho0, cfg),
        FeedbackScheme::Jump(fb) => run_jump_ensemble(sys, fb, rho0, cfg),
        FeedbackScheme::Homodyne(fb) => run_homodyne_ensemble(sys, fb, rho0, cfg),
        FeedbackScheme::Gaussian(fb) => {
            scheme.validate(sys)?;
            run_gaussian_ensemble(sys.hamiltonian(), fb, rho0, cfg)
        }
    }
}

/// d<N>/dtau = sum_z nu_z Tr[L_z rho(tau) L_z^dag] under the jump-feedback dynamics.
pub fn dn_dtau(sys: &OpenSystem, fb: &JumpFeedback, rho0: &DensityMatrix, tau: f64) -> Result<f64> {
    let scheme = FeedbackScheme::Jump(fb.clone());
    let rho = evolve_to(&generator(sys, &scheme)?, rho0, tau)?;
    Ok(sys
        .jumps()
        .iter()
        .zip(fb.nu())
        .map(|(l, nu)| nu * rho.expectation(&(l.adjoint() * l.matrix())).re)
        .sum())
}

fn check_dim(sys: &OpenSystem, rho0: &DensityMatrix) -> Result<()> {
    if sys.dim() != rho0.dim() {
        return Err(Error::DimensionMismatch {
            expected: sys.dim(),
            found: rho0.dim(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linops::{pauli_x, pauli_z};
    use crate::models::{excited_state, lowering};

    fn cfg(n: usize) -> TrajectoryConfig {
        TrajectoryConfig {
            dt: 1e-3,
            t_end: 1.0,
            n_traj: n,
            seed: 7,
            record_jumps: false,
        }
    }

    #[test]
    fn pure_decay_counts_at_most_one() {
        let sys = OpenSystem::new(CMatrix::zeros(2, 2), vec![lowering()]).unwrap();
        let ens = run_counting_ensemble(&sys, &excited_state(), &cfg(4000)).unwrap();
        let p = 1.0 - (-1.0f64).exp();
        assert!(ens.stats.samples.iter().all(|&x| x == 0.0 || x == 1.0));
        assert!((ens.stats.mean - p).abs() < 4.0 * (p * (1.0 - p) / 4000.0).sqrt());
    }

    #[test]
    fn results_are_seed_deterministic() {
        let sys = OpenSystem::new(pauli_x() * c(0.5), vec![lowering()]).unwrap();
        let fb = JumpFeedback::uniform(1.0, pauli_x(), 1).unwrap();
        let a = run_jump_ensemble(&sys, &fb, &excited_state(), &cfg(50)).unwrap();
        let b = run_jump_ensemble(&sys, &fb, &excited_state(), &cfg(50)).unwrap();
        assert_eq!(a.stats, b.stats);
    }

    #[test]
    fn zero_rate_records_nothing() {
        let sys = OpenSystem::new(pauli_x(), vec![lowering() * c(0.0)]).unwrap();
        let ens = run_counting_ensemble(&sys, &excited_state(), &TrajectoryConfig { record_jumps: true, ..cfg(10) }).unwrap();
        assert!(ens.records.is_empty());
        assert_eq!(ens.stats.mean, 0.0);
    }

    #[test]
    fn coarse_step_is_rejected() {
        let sys = OpenSystem::new(CMatrix::zeros(2, 2), vec![lowering() * c(20.0)]).unwrap();
        let err = run_counting_ensemble(&sys, &excited_state(), &cfg(10)).unwrap_err();
        assert!(matches!(err, Error::TimeStepTooLarge(_)));
        assert!(run_counting_ensemble(&sys, &excited_state(), &cfg(1)).is_err());
    }

    #[test]
    fn gaussian_matches_scaled_homodyne() {
        let h = QOperator::new(pauli_x() * c(0.3)).unwrap();
        let fb = GaussianFeedback::new(pauli_z(), 2.0, CMatrix::zeros(2, 2)).unwrap();
        let (sys, hfb) = fb.as_homodyne(&h).unwrap();
        let g = run_gaussian_ensemble(&h, &fb, &excited_state(), &cfg(40)).unwrap();
        let hom = run_homodyne_ensemble(&sys, &hfb, &excited_state(), &cfg(40)).unwrap();
        let s = 0.5 / 2.0_f64.sqrt();
        for (a, b) in g.stats.samples.iter().zip(&hom.stats.samples) {
            assert!((a - b * s).abs() < 1e-12);
        }
    }

    #[test]
    fn precision_stderr_of_bernoulli_counts() {
        let samples: Vec<f64> = (0..1000).map(|k| if k % 4 == 0 { 1.0 } else { 0.0 }).collect();
        let st = TrajectoryStats::from_samples(samples, vec![]).unwrap();
        assert!((st.mean - 0.25).abs() < 1e-15);
        assert!(st.precision_stderr() > 0.0);
        let (ratio, _) = st.norm_ratio(2.0);
        assert!((ratio * ratio - 1.0 - st.variance * 999.0 / 1000.0 / 0.0625).abs() < 1e-12);
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut s = CompensatedSum::default();
        s.add(1e16);
        for _ in 0..1000 {
            s.add(1.0);
        }
        s.add(-1e16);
        assert_eq!(s.value(), 1000.0);
    }
}
