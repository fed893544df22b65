//! Time grids, propagation of density matrices and stationary states.

use crate::error::{Error, Result};
use crate::linops::{unvec, CMatrix, DensityMatrix, SuperOperator, C64};

/// Increasing sample times starting at zero.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeGrid {
    times: Vec<f64>,
}

impl TimeGrid {
    /// `n` equally spaced points on [0, t_end].
    pub fn uniform(t_end: f64, n: usize) -> Result<Self> {
        Self::check(t_end, n)?;
        let dt = t_end / (n - 1) as f64;
        Ok(Self {
            times: (0..n).map(|k| k as f64 * dt).collect(),
        })
    }

    /// `n` points t_k = t_end (k / (n-1))^2, dense near zero.
    pub fn graded(t_end: f64, n: usize) -> Result<Self> {
        Self::check(t_end, n)?;
        let m = (n - 1) as f64;
        Ok(Self {
            times: (0..n).map(|k| t_end * (k as f64 / m).powi(2)).collect(),
        })
    }

    pub fn from_times(times: Vec<f64>) -> Result<Self> {
        if times.first() != Some(&0.0) {
            return Err(Error::InvalidParameter("time grid must start at 0".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
            return Err(Error::InvalidParameter("time grid must be strictly increasing".into()));
        }
        Ok(Self { times })
    }

    fn check(t_end: f64, n: usize) -> Result<()> {
        if !(t_end.is_finite() && t_end > 0.0) {
            return Err(Error::InvalidParameter(format!("final time must be positive, got {t_end}")));
        }
        if n < 2 {
            return Err(Error::InvalidParameter("time grid needs at least two points".into()));
        }
        Ok(())
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().expect("non-empty grid")
    }
}

/// States on every grid point, obtained by repeated exact step propagators.
/// Step propagators are cached while the spacing is unchanged.
pub fn propagate(gen: &SuperOperator, rho0: &DensityMatrix, grid: &TimeGrid) -> Result<Vec<DensityMatrix>> {
    check_dim(gen, rho0)?;
    let d = gen.dim();
    let mut out = Vec::with_capacity(grid.len());
    let mut v = rho0.vectorize().entries().clone();
    out.push(rho0.clone());
    let mut cached: Option<(f64, CMatrix)> = None;
    for w in grid.times().windows(2) {
        let dt = w[1] - w[0];
        let step = match &cached {
            Some((h, p)) if (h - dt).abs() <= 1e-14 * dt.abs().max(1.0) => p,
            _ => {
                cached = Some((dt, gen.expm(dt)?));
                &cached.as_ref().expect("just set").1
            }
        };
        v = step * v;
        out.push(DensityMatrix::from_numerical(unvec(v.as_slice(), d))?);
    }
    Ok(out)
}

/// exp(gen t) rho0 as a validated state.
pub fn evolve_to(gen: &SuperOperator, rho0: &DensityMatrix, t: f64) -> Result<DensityMatrix> {
    check_dim(gen, rho0)?;
    let p = gen.expm(t)?;
    let v = p * rho0.vectorize().entries();
    DensityMatrix::from_numerical(unvec(v.as_slice(), gen.dim()))
}

/// Unique stationary state from the null space of the generator.
pub fn steady_state(gen: &SuperOperator) -> Result<DensityMatrix> {
    let m = gen.matrix();
    let scale = m.norm().max(1e-300);
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t.ok_or(Error::Singular("SVD"))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    let smallest = svd.singular_values[order[0]];
    if smallest > 1e-8 * scale {
        return Err(Error::NoSteadyState(smallest));
    }
    if order.len() > 1 {
        let second = svd.singular_values[order[1]];
        if second < 1e-9 * scale {
            return Err(Error::DegenerateSteadyState(second));
        }
    }
    let null: Vec<C64> = v_t.row(order[0]).iter().map(|z| z.conj()).collect();
    let rho = unvec(&null, gen.dim());
    let tr = rho.trace();
    if tr.norm() < 1e-12 {
        return Err(Error::NoSteadyState(smallest));
    }
    DensityMatrix::from_numerical(rho / tr)
}

/// Tr[obs rho_k] for every state.
pub fn expectation_series(states: &[DensityMatrix], obs: &CMatrix) -> Vec<C64> {
    states.iter().map(|r| r.expectation(obs)).collect()
}

fn check_dim(gen: &SuperOperator, rho0: &DensityMatrix) -> Result<()> {
    if gen.dim() != rho0.dim() {
        return Err(Error::DimensionMismatch {
            expected: gen.dim(),
            found: rho0.dim(),
        });
    }
    Ok(())
}
