//! Quantum dynamical activity: the Fisher-information cost that bounds both the
//! speed and the precision of monitored dynamics.
//!
//! Two equivalent closed forms are provided. The split-map form (`Method::Nu`)
//! integrates Tr[K2 e^{L(s1-s2)} K1 rho(s2)] and its mirror; the Heisenberg form
//! (`Method::Nh`) integrates Re Tr[H_eff^dag G(s1-s2) rho(s2)] with G evolved by
//! the adjoint generator. A finite-difference evaluation of the tilted
//! generating function serves as an independent oracle.

use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generators::{
    activity_operators, adjoint_generator, generator, kmaps, lindblad, two_sided, ActivityOperators,
    FeedbackScheme, JumpFeedback, OpenSystem,
};
use crate::linops::{c, expm, right_mul, unvec, vec_of, CMatrix, CVector, DensityMatrix, C64, I};

/// Activity split as total = a_term + cross_term - mean_sq_term.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ActivityBreakdown {
    pub total: f64,
    pub a_term: f64,
    pub cross_term: f64,
    pub mean_sq_term: f64,
}

/// Totals in (-NEGATIVE_SLACK, 0) are clamped to zero; anything lower is an error.
pub const NEGATIVE_SLACK: f64 = 1e-6;

impl ActivityBreakdown {
    pub fn zero() -> Self {
        Self {
            total: 0.0,
            a_term: 0.0,
            cross_term: 0.0,
            mean_sq_term: 0.0,
        }
    }

    fn from_terms(a_term: f64, cross_term: f64, mean_sq_term: f64) -> Result<Self> {
        let mut total = a_term + cross_term - mean_sq_term;
        if !total.is_finite() {
            return Err(Error::InvalidParameter("activity is not finite".into()));
        }
        if total < 0.0 {
            if total < -NEGATIVE_SLACK {
                return Err(Error::NegativeActivity(total));
            }
            log::warn!("clamping slightly negative activity {total:.3e} to zero");
            total = 0.0;
        }
        Ok(Self {
            total,
            a_term,
            cross_term,
            mean_sq_term,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Nu,
    Nh,
    FiniteDifference,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Nu => "nu",
            Method::Nh => "nh",
            Method::FiniteDifference => "fd",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    Trapezoid,
    /// Composite Simpson, with a 3/8 panel on odd interval counts.
    Simpson,
    /// Exact evaluation through the exponential of a block-triangular generator.
    /// Independent of `n`; suited to very long times.
    BlockExponential,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    /// Number of lattice nodes on [0, tau], odd for Simpson.
    pub n: usize,
    pub rule: Rule,
    /// Re-run with 2n-1 nodes and fail if the total moves by more than `REFINE_TOL`.
    pub refine_check: bool,
}

pub const REFINE_TOL: f64 = 1e-6;

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            n: 401,
            rule: Rule::Simpson,
            refine_check: false,
        }
    }
}

impl QuadratureSpec {
    pub fn simpson(n: usize) -> Self {
        Self {
            n,
            rule: Rule::Simpson,
            refine_check: false,
        }
    }

    pub fn exact() -> Self {
        Self {
            n: 2,
            rule: Rule::BlockExponential,
            refine_check: false,
        }
    }

    fn validate(&self) -> Result<()> {
        match self.rule {
            Rule::BlockExponential => Ok(()),
            Rule::Simpson if self.n < 3 || self.n.is_multiple_of(2) => Err(Error::InvalidParameter(format!(
                "Simpson lattice needs an odd node count >= 3, got {}",
                self.n
            ))),
            Rule::Trapezoid if self.n < 2 => {
                Err(Error::InvalidParameter("trapezoid lattice needs at least 2 nodes".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Unit-spacing weights integrating samples 0..=k over [0, k].
pub(crate) fn prefix_weights(k: usize, rule: Rule) -> Vec<f64> {
    let mut w = vec![0.0; k + 1];
    if k == 0 {
        return w;
    }
    if rule == Rule::Trapezoid || k == 1 {
        for x in w.iter_mut() {
            *x = 1.0;
        }
        w[0] = 0.5;
        w[k] = 0.5;
        return w;
    }
    let simpson_end = if k.is_multiple_of(2) { k } else { k - 3 };
    for i in (0..simpson_end).step_by(2) {
        w[i] += 1.0 / 3.0;
        w[i + 1] += 4.0 / 3.0;
        w[i + 2] += 1.0 / 3.0;
    }
    if simpson_end < k {
        for (off, f) in [1.0, 3.0, 3.0, 1.0].iter().enumerate() {
            w[simpson_end + off] += 3.0 / 8.0 * f;
        }
    }
    w
}

fn check_inputs(sys: &OpenSystem, scheme: &FeedbackScheme, rho0: &DensityMatrix, tau: f64) -> Result<()> {
    scheme.validate(sys)?;
    if rho0.dim() != sys.dim() {
        return Err(Error::DimensionMismatch {
            expected: sys.dim(),
            found: rho0.dim(),
        });
    }
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::InvalidParameter(format!("tau must be positive, got {tau}")));
    }
    Ok(())
}

fn dotu(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).fold(C64::new(0.0, 0.0), |acc, (x, y)| acc + x * y)
}

/// Row vector r with r . vec(X) = Tr[A X].
fn trace_row(a: &CMatrix) -> CVector {
    vec_of(&a.transpose())
}

struct Lattice {
    dt: f64,
    weights: Vec<Vec<f64>>,
}

impl Lattice {
    fn new(tau: f64, n: usize, rule: Rule) -> Self {
        Self {
            dt: tau / (n - 1) as f64,
            weights: (0..n).map(|k| prefix_weights(k, rule)).collect(),
        }
    }

    fn n(&self) -> usize {
        self.weights.len()
    }

    /// Integral over [0, t_k] of samples `f` for every k.
    fn prefix<T>(&self, f: &[T]) -> Vec<T>
    where
        T: Copy + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T> + Default,
    {
        self.weights
            .iter()
            .map(|w| w.iter().zip(f).fold(T::default(), |acc, (&wi, &fi)| acc + fi * (wi * self.dt)))
            .collect()
    }

    /// Inner integrals over s2 in [0, t_k] of pair(k - m, m).
    fn inner<T>(&self, pair: impl Fn(usize, usize) -> T) -> Vec<T>
    where
        T: Copy + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T> + Default,
    {
        self.weights
            .iter()
            .enumerate()
            .map(|(k, w)| {
                w.iter()
                    .enumerate()
                    .fold(T::default(), |acc, (m, &wm)| acc + pair(k - m, m) * (wm * self.dt))
            })
            .collect()
    }
}

fn lattice_states(gen: &CMatrix, rho0: &DensityMatrix, lat: &Lattice) -> Result<Vec<CVector>> {
    let step = expm(gen, lat.dt)?;
    let mut out = Vec::with_capacity(lat.n());
    let mut v = vec_of(rho0.matrix());
    out.push(v.clone());
    for _ in 1..lat.n() {
        v = &step * v;
        out.push(v.clone());
    }
    Ok(out)
}

fn lattice_nh(
    sys: &OpenSystem,
    scheme: &FeedbackScheme,
    rho0: &DensityMatrix,
    tau: f64,
    quad: &QuadratureSpec,
) -> Result<Vec<ActivityBreakdown>> {
    let lat = Lattice::new(tau, quad.n, quad.rule);
    let ops = activity_operators(sys, scheme)?;
    let gen = generator(sys, scheme)?;
    let adj = adjoint_generator(sys, scheme)?;
    let d = sys.dim();
    let states = lattice_states(gen.matrix(), rho0, &lat)?;

    // Heisenberg-evolved G on the difference grid, stored transposed for trace products.
    let adj_step = expm(adj.matrix(), lat.dt)?;
    let mut g = vec_of(&ops.g);
    let mut g_rows = Vec::with_capacity(lat.n());
    for _ in 0..lat.n() {
        g_rows.push(vec_of(&unvec(g.as_slice(), d).transpose()));
        g = &adj_step * g;
    }
    let h_eff_dag = ops.h_eff.adjoint();
    let x: Vec<CVector> = states
        .iter()
        .map(|s| vec_of(&(unvec(s.as_slice(), d) * &h_eff_dag)))
        .collect();
    let inner = lat.inner(|j, m| dotu(g_rows[j].as_slice(), x[m].as_slice()).re);
    let cross = lat.prefix(&inner);

    let w_row = trace_row(&ops.w);
    let g_row = trace_row(&ops.g);
    let a_samples: Vec<f64> = states.iter().map(|s| dotu(w_row.as_slice(), s.as_slice()).re).collect();
    let g_samples: Vec<f64> = states.iter().map(|s| dotu(g_row.as_slice(), s.as_slice()).re).collect();
    let a = lat.prefix(&a_samples);
    let mean = lat.prefix(&g_samples);
    (0..lat.n())
        .map(|k| ActivityBreakdown::from_terms(a[k], 8.0 * cross[k], 4.0 * mean[k] * mean[k]))
        .collect()
}

#[derive(Clone, Copy, Default)]
struct Cplx(C64);

impl std::ops::Add for Cplx {
    type Output = Cplx;
    fn add(self, o: Cplx) -> Cplx {
        Cplx(self.0 + o.0)
    }
}

impl std::ops::Mul<f64> for Cplx {
    type Output = Cplx;
    fn mul(self, s: f64) -> Cplx {
        Cplx(self.0 * s)
    }
}

fn lattice_nu(
    sys: &OpenSystem,
    scheme: &FeedbackScheme,
    rho0: &DensityMatrix,
    tau: f64,
    quad: &QuadratureSpec,
) -> Result<Vec<ActivityBreakdown>> {
    let lat = Lattice::new(tau, quad.n, quad.rule);
    let ops = activity_operators(sys, scheme)?;
    let gen = generator(sys, scheme)?;
    let (k1, k2) = kmaps(sys, scheme)?;
    let d = sys.dim();
    let states = lattice_states(gen.matrix(), rho0, &lat)?;

    // Rows <<1| K P^j, advanced through the transposed step propagator.
    let step_t = expm(gen.matrix(), lat.dt)?.transpose();
    let one = vec_of(&CMatrix::identity(d, d));
    let mut r1 = k1.matrix().transpose() * &one;
    let mut r2 = k2.matrix().transpose() * &one;
    let mut rows1 = Vec::with_capacity(lat.n());
    let mut rows2 = Vec::with_capacity(lat.n());
    for _ in 0..lat.n() {
        rows1.push(r1.clone());
        rows2.push(r2.clone());
        r1 = &step_t * r1;
        r2 = &step_t * r2;
    }
    let y1: Vec<CVector> = states.iter().map(|s| k1.matrix() * s).collect();
    let y2: Vec<CVector> = states.iter().map(|s| k2.matrix() * s).collect();
    let inner = lat.inner(|j, m| {
        Cplx(dotu(rows2[j].as_slice(), y1[m].as_slice()) + dotu(rows1[j].as_slice(), y2[m].as_slice()))
    });
    let cross = lat.prefix(&inner);

    let w_row = trace_row(&ops.w);
    let a_samples: Vec<f64> = states.iter().map(|s| dotu(w_row.as_slice(), s.as_slice()).re).collect();
    let m1: Vec<Cplx> = y1.iter().map(|y| Cplx(dotu(one.as_slice(), y.as_slice()))).collect();
    let m2: Vec<Cplx> = y2.iter().map(|y| Cplx(dotu(one.as_slice(), y.as_slice()))).collect();
    let a = lat.prefix(&a_samples);
    let mu1 = lat.prefix(&m1);
    let mu2 = lat.prefix(&m2);
    (0..lat.n())
        .map(|k| ActivityBreakdown::from_terms(a[k], 4.0 * cross[k].0.re, 4.0 * (mu1[k].0 * mu2[k].0).re))
        .collect()
}

/// Block upper-triangular matrix from (row, col, block) triples, each block n x n.
fn block_matrix(nb: usize, n: usize, blocks: &[(usize, usize, &CMatrix)]) -> CMatrix {
    let mut m = CMatrix::zeros(nb * n, nb * n);
    for &(r, col, b) in blocks {
        m.view_mut((r * n, col * n), (n, n)).copy_from(b);
    }
    m
}

fn top_block(v: &CVector, n: usize) -> CVector {
    v.rows(0, n).into_owned()
}

fn stacked(nb: usize, n: usize, slot: usize, v: &CVector) -> CVector {
    let mut out = CVector::zeros(nb * n);
    out.rows_mut(slot * n, n).copy_from(v);
    out
}

/// Exact engines advance block-augmented vectors through consecutive times.
trait BlockEngine {
    fn advance(&mut self, dt: f64) -> Result<()>;
    fn breakdown(&self) -> Result<ActivityBreakdown>;
}

struct BlockNh {
    n: usize,
    m: CMatrix,
    x: CVector,
    y: CVector,
    ops: ActivityOperators,
    d: usize,
}

impl BlockNh {
    fn new(sys: &OpenSystem, scheme: &FeedbackScheme, rho0: &DensityMatrix) -> Result<Self> {
        let ops = activity_operators(sys, scheme)?;
        let gen = generator(sys, scheme)?;
        let d = sys.dim();
        let n = d * d;
        let id = CMatrix::identity(n, n);
        let r = right_mul(&ops.h_eff.adjoint());
        let m = block_matrix(
            3,
            n,
            &[(0, 1, &id), (1, 1, gen.matrix()), (1, 2, r.matrix()), (2, 2, gen.matrix())],
        );
        let v0 = vec_of(rho0.matrix());
        Ok(Self {
            n,
            x: stacked(3, n, 2, &v0),
            y: stacked(3, n, 1, &v0),
            m,
            ops,
            d,
        })
    }
}

impl BlockEngine for BlockNh {
    fn advance(&mut self, dt: f64) -> Result<()> {
        let e = expm(&self.m, dt)?;
        self.x = &e * &self.x;
        self.y = &e * &self.y;
        Ok(())
    }

    fn breakdown(&self) -> Result<ActivityBreakdown> {
        let j = unvec(top_block(&self.x, self.n).as_slice(), self.d);
        let s = unvec(top_block(&self.y, self.n).as_slice(), self.d);
        let a = (&self.ops.w * &s).trace().re;
        let cross = 8.0 * (&self.ops.g * &j).trace().re;
        let mean = (&self.ops.g * &s).trace().re;
        ActivityBreakdown::from_terms(a, cross, 4.0 * mean * mean)
    }
}

struct BlockNu {
    n: usize,
    d: usize,
    ma: CMatrix,
    mb: CMatrix,
    ms: CMatrix,
    xa: CVector,
    xb: CVector,
    s: CVector,
    k1: CMatrix,
    k2: CMatrix,
    w: CMatrix,
}

impl BlockNu {
    fn new(sys: &OpenSystem, scheme: &FeedbackScheme, rho0: &DensityMatrix) -> Result<Self> {
        let ops = activity_operators(sys, scheme)?;
        let gen = generator(sys, scheme)?;
        let (k1, k2) = kmaps(sys, scheme)?;
        let d = sys.dim();
        let n = d * d;
        let id = CMatrix::identity(n, n);
        let g = gen.matrix();
        let ma = block_matrix(3, n, &[(0, 0, g), (0, 1, k2.matrix()), (1, 1, g), (1, 2, k1.matrix()), (2, 2, g)]);
        let mb = block_matrix(3, n, &[(0, 0, g), (0, 1, k1.matrix()), (1, 1, g), (1, 2, k2.matrix()), (2, 2, g)]);
        let ms = block_matrix(2, n, &[(0, 1, &id), (1, 1, g)]);
        let v0 = vec_of(rho0.matrix());
        Ok(Self {
            n,
            d,
            xa: stacked(3, n, 2, &v0),
            xb: stacked(3, n, 2, &v0),
            s: stacked(2, n, 1, &v0),
            ma,
            mb,
            ms,
            k1: k1.into_matrix(),
            k2: k2.into_matrix(),
            w: ops.w,
        })
    }
}

impl BlockEngine for BlockNu {
    fn advance(&mut self, dt: f64) -> Result<()> {
        self.xa = expm(&self.ma, dt)? * &self.xa;
        self.xb = expm(&self.mb, dt)? * &self.xb;
        self.s = expm(&self.ms, dt)? * &self.s;
        Ok(())
    }

    fn breakdown(&self) -> Result<ActivityBreakdown> {
        let tr = |v: &CVector| unvec(top_block(v, self.n).as_slice(), self.d).trace();
        let s = top_block(&self.s, self.n);
        let s_op = unvec(s.as_slice(), self.d);
        let a = (&self.w * &s_op).trace().re;
        let cross = 4.0 * (tr(&self.xa) + tr(&self.xb)).re;
        let mu1 = unvec((&self.k1 * &s).as_slice(), self.d).trace();
        let mu2 = unvec((&self.k2 * &s).as_slice(), self.d).trace();
        ActivityBreakdown::from_terms(a, cross, 4.0 * (mu1 * mu2).re)
    }
}

fn block_engine(
    sys: &OpenSystem,
    scheme: &FeedbackScheme,
    rho0: &DensityMatrix,
    method: Method,
) -> Result<Box<dyn BlockEngine>> {
    Ok(match method {
        Method::Nu => Box::new(BlockNu::new(sys, scheme, rho0)?),
        _ => Box::new(BlockNh::new(sys, scheme, rho0)?),
    })
}

/// Activity at each time of an increasing list starting after zero, propagated
/// exactly between consecutive times.
pub fn activity_at_times(
    sys: &OpenSystem,
    scheme: &FeedbackScheme,
    rho0: &DensityMatrix,
    times: &[f64],
    method: Method,
) -> Result<Vec<ActivityBreakdown>> {
    if let Some(&t) = times.last() {
        check_inputs(sys, scheme, rho0, t)?;
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) || times.first().is_some_and(|&t| t < 0.0) {
        return Err(Error::InvalidParameter("times must be non-negative and increasing".into()));
    }
    if method == Method::FiniteDifference {
        return times
            .iter()
            .map(|&t| if t == 0.0 { Ok(ActivityBreakdown::zero()) } else { fd_breakdown(sys, scheme, rho0, t, FD_STEP) })
            .collect();
    }
    let mut engine = block_engine(sys, scheme, rho0, method)?;
    let mut now = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        if t > now {
            engine.advance(t - now)?;
            now = t;
        }
        out.push(if t == 0.0 { ActivityBreakdown::zero() } else { engine.breakdown()? });
    }
    Ok(out)
}

/// Activity on the uniform lattice t_k = k tau / (n - 1), k = 0..n-1.
pub fn activity_curve(
    sys: &OpenSystem,
    scheme: &FeedbackScheme,
    rho0: &DensityMatrix,
    tau: f64,
    method: Method,
    quad: &QuadratureSpec,
) -> Result<Vec<(f64, ActivityBreakdown)>> {
    check_inputs(sys, scheme, rho0, tau)?;
    quad.validate()?;
    let n = quad.n.max(2);
    let times: Vec<f64> = (0..n).map(|k| tau * k as f64 / (n - 1) as f64).collect();
    let values = match (method, quad.rule) {
        (Method::FiniteDifference, _) | (_, Rule::BlockExponential) => {
            activity_at_times(sys, scheme, rho0, &times, method)?
        }
        (Method::Nh, _) => lattice_nh(sys, scheme, rho0, tau, quad)?,
        (Method::Nu, _) => lattice_nu(sys, scheme, rho0, tau, quad)?,
    };
    Ok(times.into_iter().zip(values).collect())
}

/// Activity over [0, tau] by the chosen method.
pub fn qda(
    sys: &OpenSystem,
    scheme: &FeedbackScheme,
    rho0: &DensityMatrix,
    tau: f64,
    method: Method,
    quad: &QuadratureSpec,
) -> Result<ActivityBreakdown> {
    check_inputs(sys, scheme, rho0, tau)?;
    quad.validate()?;
    let single = |q: &QuadratureSpec| -> Result<ActivityBreakdown> {
        match (method, q.rule) {
            (Method::FiniteDifference, _) => fd_breakdown(sys, scheme, rho0, tau, FD_STEP),
            (_, Rule::BlockExponential) => {
                let mut engine = block_engine(sys, scheme, rho0, method)?;
                engine.advance(tau)?;
                engine.breakdown()
            }
            (Method::Nh, _) => Ok(*lattice_nh(sys, scheme, rho0, tau, q)?.last().expect("n >= 2")),
            (Method::Nu, _) => Ok(*lattice_nu(sys, scheme, rho0, tau, q)?.last().expect("n >= 2")),
        }
    };
    let b = single(quad)?;
    if quad.refine_check && quad.rule != Rule::BlockExponential && method != Method::FiniteDifference {
        let fine = single(&QuadratureSpec {
            n: 2 * quad.n - 1,
            ..*quad
        })?;
        let change = (fine.total - b.total).abs() / fine.total.abs().max(1e-300);
        if change > REFINE_TOL {
            return Err(Error::QuadratureNotConverged { change });
        }
    }
    Ok(b)
}

/// Heisenberg-form activity (default production path).
pub fn qda_nh(
    sys: &OpenSystem,
    scheme: &FeedbackScheme,
    rho0: &DensityMatrix,
    tau: f64,
    quad: &QuadratureSpec,
) -> Result<ActivityBreakdown> {
    qda(sys, scheme, rho0, tau, Method::Nh, quad)
}

/// Split-map form, kept as a cross-check of the Heisenberg form.
pub fn qda_nu(
    sys: &OpenSystem,
    scheme: &FeedbackScheme,
    rho0: &DensityMatrix,
    tau: f64,
    quad: &QuadratureSpec,
) -> Result<ActivityBreakdown> {
    qda(sys, scheme, rho0, tau, Method::Nu, quad)
}

/// Evaluates many times independently in parallel.
pub fn qda_sweep(
    sys: &OpenSystem,
    scheme: &FeedbackScheme,
    rho0: &DensityMatrix,
    taus: &[f64],
    method: Method,
    quad: &QuadratureSpec,
) -> Result<Vec<ActivityBreakdown>> {
    taus.par_iter()
        .map(|&t| qda(sys, scheme, rho0, t, method, quad))
        .collect()
}

/// Classical part of the activity: the integrated rate of the scheme's diagonal term.
/// For jump detection this is the expected number of jumps.
pub fn classical_activity(
    sys: &OpenSystem,
    scheme: &FeedbackScheme,
    rho0: &DensityMatrix,
    tau: f64,
) -> Result<f64> {
    check_inputs(sys, scheme, rho0, tau)?;
    let ops = activity_operators(sys, scheme)?;
    let s = integrated_state(&generator(sys, scheme)?.into_matrix(), rho0, tau, 1)?;
    Ok((&ops.w * s).trace().re)
}

/// Iterated integral of rho(s) over [0, tau], `order` times (order 1: int rho ds).
fn integrated_state(gen: &CMatrix, rho0: &DensityMatrix, tau: f64, order: usize) -> Result<CMatrix> {
    let n = gen.nrows();
    let d = rho0.dim();
    let id = CMatrix::identity(n, n);
    let nb = order + 1;
    let mut blocks: Vec<(usize, usize, &CMatrix)> = (0..order).map(|k| (k, k + 1, &id)).collect();
    blocks.push((order, order, gen));
    let m = block_matrix(nb, n, &blocks);
    let v = expm(&m, tau)? * stacked(nb, n, order, &vec_of(rho0.matrix()));
    Ok(unvec(top_block(&v, n).as_slice(), d))
}

/// Stencil step used by `Method::FiniteDifference`.
pub const FD_STEP: f64 = 1e-3;

/// Central differences of the tilted generating function and their Richardson pair.
fn fd_derivatives(
    sys: &OpenSystem,
    scheme: &FeedbackScheme,
    rho0: &DensityMatrix,
    tau: f64,
    h: f64,
) -> Result<(C64, C64, C64)> {
    let v0 = vec_of(rho0.matrix());
    let d = sys.dim();
    let gf = |th: f64, ph: f64| -> Result<C64> {
        let gen = two_sided(sys, scheme, th, ph)?;
        let v = expm(gen.matrix(), tau)? * &v0;
        Ok(unvec(v.as_slice(), d).trace())
    };
    let c_pp = gf(h, h)?;
    let c_pm = gf(h, -h)?;
    let c_mp = gf(-h, h)?;
    let c_mm = gf(-h, -h)?;
    let d_t = (gf(h, 0.0)? - gf(-h, 0.0)?) / (2.0 * h);
    let d_p = (gf(0.0, h)? - gf(0.0, -h)?) / (2.0 * h);
    let d_tp = (c_pp - c_pm - c_mp + c_mm) / (4.0 * h * h);
    Ok((d_t, d_p, d_tp))
}

fn fd_breakdown(
    sys: &OpenSystem,
    scheme: &FeedbackScheme,
    rho0: &DensityMatrix,
    tau: f64,
    h: f64,
) -> Result<ActivityBreakdown> {
    if !(1e-4..=1e-2).contains(&h) {
        return Err(Error::InvalidParameter(format!("stencil step must lie in [1e-4, 1e-2], got {h}")));
    }
    check_inputs(sys, scheme, rho0, tau)?;
    let (t1, p1, tp1) = fd_derivatives(sys, scheme, rho0, tau, h)?;
    let (t2, p2, tp2) = fd_derivatives(sys, scheme, rho0, tau, h / 2.0)?;
    let rich = |coarse: C64, fine: C64| (fine * 4.0 - coarse) / 3.0;
    let mixed = 4.0 * rich(tp1, tp2).re;
    let mean_sq = 4.0 * rich(t1 * p1, t2 * p2).re;
    let a = classical_activity(sys, scheme, rho0, tau)?;
    ActivityBreakdown::from_terms(a, mixed - a, mean_sq)
}

/// 4 [d_theta d_phi C - d_theta C d_phi C] at the origin, with C(theta, phi) the
/// trace of the two-sided evolution, from a 3x3 stencil with one Richardson step.
pub fn qda_fd_oracle(
    sys: &OpenSystem,
    scheme: &FeedbackScheme,
    rho0: &DensityMatrix,
    tau: f64,
    h: f64,
) -> Result<f64> {
    Ok(fd_breakdown(sys, scheme, rho0, tau, h)?.total)
}

/// Leading small-tau, small-nu feedback contribution to the jump-scheme activity:
/// 8 int int Re Tr[H_eff^dag Q rho(s2)] (s1 - s2) with Q = sum_z i nu_z L_z^dag [F_z, H] L_z
/// and rho evolved without feedback.
pub fn taylor_jump_correction(
    sys: &OpenSystem,
    fb: &JumpFeedback,
    rho0: &DensityMatrix,
    tau: f64,
) -> Result<f64> {
    let scheme = FeedbackScheme::Jump(fb.clone());
    check_inputs(sys, &scheme, rho0, tau)?;
    let h = sys.hamiltonian().matrix();
    let d = sys.dim();
    let mut q = CMatrix::zeros(d, d);
    for ((l, f), &nu) in sys.jumps().iter().zip(fb.operators()).zip(fb.nu()) {
        let comm = f.matrix() * h - h * f.matrix();
        q += l.adjoint() * comm * l.matrix() * (I * nu);
    }
    let ops = activity_operators(sys, &FeedbackScheme::None)?;
    // int_0^tau ds1 int_0^s1 ds2 (s1 - s2) rho(s2) is the third iterated integral.
    let weighted = integrated_state(lindblad(sys).matrix(), rho0, tau, 3)?;
    Ok(8.0 * (ops.h_eff.adjoint() * q * weighted).trace().re)
}

/// d ln B / d ln tau by centred differences (one-sided at the ends).
pub fn log_slopes(taus: &[f64], values: &[f64]) -> Result<Vec<f64>> {
    if taus.len() != values.len() || taus.len() < 3 {
        return Err(Error::InvalidParameter("need at least three matching samples".into()));
    }
    if taus.iter().chain(values).any(|&x| !(x > 0.0 && x.is_finite())) {
        return Err(Error::InvalidParameter("log slopes need positive samples".into()));
    }
    let lt: Vec<f64> = taus.iter().map(|t| t.ln()).collect();
    let lv: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let n = lt.len();
    Ok((0..n)
        .map(|k| {
            let (a, b) = match k {
                0 => (0, 1),
                k if k == n - 1 => (n - 2, n - 1),
                k => (k - 1, k + 1),
            };
            (lv[b] - lv[a]) / (lt[b] - lt[a])
        })
        .collect())
}

/// Local power-law exponent alpha(tau) with B ~ tau^alpha.
pub fn scaling_exponent(
    sys: &OpenSystem,
    scheme: &FeedbackScheme,
    rho0: &DensityMatrix,
    taus: &[f64],
    quad: &QuadratureSpec,
) -> Result<Vec<f64>> {
    let b = qda_sweep(sys, scheme, rho0, taus, Method::Nh, quad)?;
    let totals: Vec<f64> = b.iter().map(|x| x.total).collect();
    log_slopes(taus, &totals)
}

/// Period of the strongest oscillation in evenly spaced samples, from the peak
/// of a Hann-windowed, zero-padded spectrum refined by parabolic interpolation.
pub fn dominant_period(values: &[f64], spacing: f64) -> Result<f64> {
    let n = values.len();
    if n < 8 || !(spacing > 0.0) {
        return Err(Error::InvalidParameter("need at least 8 evenly spaced samples".into()));
    }
    let window: Vec<f64> = (0..n)
        .map(|k| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * k as f64 / (n - 1) as f64).cos())
        .collect();
    let wsum: f64 = window.iter().sum();
    let mean = values.iter().zip(&window).map(|(v, w)| v * w).sum::<f64>() / wsum;
    let padded = (n * 64).next_power_of_two();
    let mut buf: Vec<C64> = vec![C64::new(0.0, 0.0); padded];
    for k in 0..n {
        buf[k] = c((values[k] - mean) * window[k]);
    }
    FftPlanner::new().plan_fft_forward(padded).process(&mut buf);
    let mag: Vec<f64> = buf[..padded / 2].iter().map(|z| z.norm()).collect();
    let (peak, _) = mag
        .iter()
        .enumerate()
        .skip(1)
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty spectrum");
    if peak + 1 >= mag.len() || mag[peak] == 0.0 {
        return Err(Error::InvalidParameter("no oscillation found".into()));
    }
    let (a, b, cc) = (mag[peak - 1], mag[peak], mag[peak + 1]);
    let denom = a - 2.0 * b + cc;
    let shift = if denom != 0.0 { 0.5 * (a - cc) / denom } else { 0.0 };
    let freq = (peak as f64 + shift) / (padded as f64 * spacing);
    Ok(1.0 / freq)
}
