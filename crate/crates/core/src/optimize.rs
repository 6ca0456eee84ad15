//! Bound-constrained maximization by projected limited-memory BFGS with
//! finite-difference gradients, and the estimation driver built on it.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use crate::covariance::{microergodic, MaternParams};
use crate::lattice::Lattice;
use crate::lif::profile_stats;
use crate::partition::Partition;
use crate::precondition::{PreconditionedSample, PreconditionerCoeffs};
use crate::{Error, Result};

const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACK: usize = 40;
const PG_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OptimizerConfig {
    /// Per-coordinate `(lo, hi)`; empty means unbounded in every coordinate.
    pub bounds: Vec<(f64, f64)>,
    pub fd_step: f64,
    pub rel_tol: f64,
    pub max_iter: usize,
    pub memory: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self { bounds: Vec::new(), fd_step: 1e-3, rel_tol: 1e-5, max_iter: 50, memory: 10 }
    }
}

impl OptimizerConfig {
    pub fn with_bounds(bounds: Vec<(f64, f64)>) -> Self {
        Self { bounds, ..Self::default() }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if !self.bounds.is_empty() && self.bounds.len() != dim {
            return Err(Error::DimensionMismatch { left: self.bounds.len(), right: dim });
        }
        if self.bounds.iter().any(|&(lo, hi)| !(lo < hi)) {
            return Err(Error::InvalidParameter("every bound needs lo < hi".into()));
        }
        if !(self.fd_step > 0.0) || !(self.rel_tol > 0.0) || self.max_iter == 0 || self.memory == 0 {
            return Err(Error::InvalidParameter(
                "fd_step and rel_tol must be positive, max_iter and memory at least 1".into(),
            ));
        }
        Ok(())
    }

    fn bound(&self, i: usize) -> (f64, f64) {
        self.bounds.get(i).copied().unwrap_or((f64::NEG_INFINITY, f64::INFINITY))
    }

    fn project(&self, x: &mut [f64]) {
        for (i, v) in x.iter_mut().enumerate() {
            let (lo, hi) = self.bound(i);
            *v = v.clamp(lo, hi);
        }
    }
}

/// Central differences with step `fd_step`, one-sided where a central
/// stencil would leave the box. `fx` is `f(x)`, used by one-sided stencils.
pub fn fd_gradient<F>(f: &mut F, x: &[f64], fx: f64, cfg: &OptimizerConfig) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let h = cfg.fd_step;
    let mut probe = x.to_vec();
    let mut g = vec![0.0; x.len()];
    for i in 0..x.len() {
        let (lo, hi) = cfg.bound(i);
        let up = x[i] + h <= hi;
        let down = x[i] - h >= lo;
        g[i] = match (down, up) {
            (true, true) => {
                probe[i] = x[i] + h;
                let fp = f(&probe)?;
                probe[i] = x[i] - h;
                let fm = f(&probe)?;
                (fp - fm) / (2.0 * h)
            }
            (false, true) => {
                probe[i] = x[i] + h;
                (f(&probe)? - fx) / h
            }
            (true, false) => {
                probe[i] = x[i] - h;
                (fx - f(&probe)?) / h
            }
            (false, false) => 0.0,
        };
        probe[i] = x[i];
    }
    Ok(g)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerOutput {
    pub x: Vec<f64>,
    pub f: f64,
    /// Objective after each accepted iterate, starting with `f(x0)`.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub bound_active: Vec<bool>,
}

/// Maximizes `f` over the box in `cfg` starting from `x0` (projected into
/// the box). Non-finite trial values are rejected by the line search; a
/// failed line search ends the run with `converged = false`.
pub fn maximize<F>(mut f: F, x0: &[f64], cfg: &OptimizerConfig) -> Result<OptimizerOutput>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    cfg.validate(x0.len())?;
    let n = x0.len();
    let mut x = x0.to_vec();
    cfg.project(&mut x);
    let mut fx = f(&x)?;
    if !fx.is_finite() {
        return Err(Error::NonFiniteObjective);
    }
    // Work with g = -f (minimization).
    let mut grad: Vec<f64> = fd_gradient(&mut f, &x, fx, cfg)?.iter().map(|v| -v).collect();
    let mut trace = vec![fx];
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iter {
        let fixed: Vec<bool> = (0..n)
            .map(|i| {
                let (lo, hi) = cfg.bound(i);
                (x[i] <= lo && grad[i] > 0.0) || (x[i] >= hi && grad[i] < 0.0)
            })
            .collect();
        let pg = (0..n)
            .map(|i| {
                let (lo, hi) = cfg.bound(i);
                (x[i] - (x[i] - grad[i]).clamp(lo, hi)).abs()
            })
            .fold(0.0, f64::max);
        if pg <= PG_TOL * (1.0 + fx.abs()) {
            converged = true;
            break;
        }
        let masked: Vec<f64> = grad.iter().zip(&fixed).map(|(g, &fx)| if fx { 0.0 } else { *g }).collect();
        let mut dir = two_loop(&masked, &history);
        for (d, &fx) in dir.iter_mut().zip(&fixed) {
            if fx {
                *d = 0.0;
            }
        }
        if dot(&dir, &grad) >= 0.0 {
            history.clear();
            dir = masked.iter().map(|g| -g).collect();
        }
        let mut alpha = if history.is_empty() && iterations == 0 {
            let dmax = dir.iter().fold(0.0f64, |a, d| a.max(d.abs()));
            if dmax > 1.0 { 1.0 / dmax } else { 1.0 }
        } else {
            1.0
        };
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACK {
            let mut xt: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + alpha * d).collect();
            cfg.project(&mut xt);
            let step: Vec<f64> = xt.iter().zip(&x).map(|(a, b)| a - b).collect();
            if step.iter().all(|s| *s == 0.0) {
                break;
            }
            let ft = f(&xt)?;
            if ft.is_finite() && -ft <= -fx + ARMIJO * dot(&grad, &step) {
                accepted = Some((xt, ft, step));
                break;
            }
            alpha *= 0.5;
        }
        let Some((xt, ft, step)) = accepted else {
            break;
        };
        iterations += 1;
        let gt: Vec<f64> = fd_gradient(&mut f, &xt, ft, cfg)?.iter().map(|v| -v).collect();
        let yv: Vec<f64> = gt.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy = dot(&step, &yv);
        if sy > 1e-12 * libm::sqrt(dot(&step, &step) * dot(&yv, &yv)) {
            if history.len() == cfg.memory {
                history.pop_front();
            }
            history.push_back((step, yv, 1.0 / sy));
        }
        let rel = (ft - fx) / fx.abs().max(ft.abs()).max(1.0);
        x = xt;
        fx = ft;
        grad = gt;
        trace.push(fx);
        if rel < cfg.rel_tol {
            converged = true;
            break;
        }
    }
    let bound_active = (0..n)
        .map(|i| {
            let (lo, hi) = cfg.bound(i);
            let tol = 1e-10 * (1.0 + x[i].abs());
            (x[i] - lo).abs() <= tol || (hi - x[i]).abs() <= tol
        })
        .collect();
    Ok(OptimizerOutput { x, f: fx, trace, iterations, converged, bound_active })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `-H g` by the two-loop recursion.
fn two_loop(g: &[f64], history: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = history.back() {
        let gamma = dot(s, y) / dot(y, y);
        for qi in &mut q {
            *qi *= gamma;
        }
    }
    for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q.iter().map(|v| -v).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum EstimationMode {
    /// Evaluate `φ̂` at a fixed range.
    FixedRho(Vec<f64>),
    /// Maximize the profile loss over the range starting at `x0`.
    Profile { x0: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EstimationResult {
    pub phi_hat: f64,
    pub rho_hat: Vec<f64>,
    /// `φ̂ ρ̂^{-2ν}` componentwise.
    pub microergodic_hat: Vec<f64>,
    /// Ratio of the estimated to the true microergodic parameter.
    pub xi_hat: Option<Vec<f64>>,
    pub phi_nonpositive: bool,
    pub iterations: usize,
    pub converged: bool,
    pub bound_active: Vec<bool>,
    pub trace: Vec<f64>,
}

/// Estimates `φ` (and the range in profile mode) from filtered data.
pub fn estimate(
    lat: &Lattice,
    y: &PreconditionedSample,
    pc: &PreconditionerCoeffs,
    part: &Partition,
    cfg: &OptimizerConfig,
    mode: &EstimationMode,
    truth: Option<&MaternParams>,
) -> Result<EstimationResult> {
    let objective = |rho: &[f64]| -> Result<f64> {
        if rho.iter().any(|r| !(*r > 0.0)) {
            return Ok(f64::NAN);
        }
        Ok(profile_stats(lat, y, pc, part, rho)?.profile_loss())
    };
    let (rho_hat, iterations, converged, bound_active, trace) = match mode {
        EstimationMode::FixedRho(rho) => {
            let v = objective(rho)?;
            (rho.clone(), 0, true, vec![false; rho.len()], vec![v])
        }
        EstimationMode::Profile { x0 } => {
            let out = maximize(objective, x0, cfg)?;
            (out.x, out.iterations, out.converged, out.bound_active, out.trace)
        }
    };
    let ps = profile_stats(lat, y, pc, part, &rho_hat)?;
    let phi = ps.phi_hat();
    let micro = microergodic(phi.value, &rho_hat, pc.nu());
    let xi_hat = truth.map(|t| {
        let true_micro = t.microergodic();
        let k = micro.len().max(true_micro.len());
        (0..k)
            .map(|i| micro[i.min(micro.len() - 1)] / true_micro[i.min(true_micro.len() - 1)])
            .collect()
    });
    Ok(EstimationResult {
        phi_hat: phi.value,
        rho_hat,
        microergodic_hat: micro,
        xi_hat,
        phi_nonpositive: phi.nonpositive,
        iterations,
        converged,
        bound_active,
        trace,
    })
}
