//! Feedback saddle points, closed-form values and Monte Carlo evaluation.

mod rng;
mod sim;

pub use rng::NoiseStream;
pub use sim::{
    approx_gap, mc_objective, mean_stderr, paired_stats, pairwise_sum, saddle_check,
    simulate_coupled, simulate_game, GapEstimate, LawRun, Perturbation, SaddleReport, SimBatch,
    SimConfig, MAX_STEP_OVER_EPS, PATH_BLOWUP,
};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::model::{Dims, GameSpec};
use crate::reduced::ReducedSolution;
use crate::riccati::{Blocks, RiccatiSolution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FeedbackKind {
    /// Built from the full solution at fixed `eps`.
    Exact,
    /// Built from the reduced solution with every `eps` term dropped.
    Approximate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Player {
    /// Controls `u1`, maximises the objective.
    Maximizer,
    /// Controls `u2`, minimises the objective.
    Minimizer,
}

/// Feedback gains: `u1 = F11 x1 + F12 x2`, `u2 = F21 x1 + F22 x2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gains {
    pub f11: Mat,
    pub f12: Mat,
    pub f21: Mat,
    pub f22: Mat,
}

impl Gains {
    /// Stacked `(k1 + k2) × n` gain acting on `(x1, x2)`.
    pub fn stacked(&self) -> Mat {
        let (k1, n1) = self.f11.shape();
        let (k2, n2) = self.f22.shape();
        let mut k = Mat::zeros(k1 + k2, n1 + n2);
        k.view_mut((0, 0), (k1, n1)).copy_from(&self.f11);
        k.view_mut((0, n1), (k1, n2)).copy_from(&self.f12);
        k.view_mut((k1, 0), (k2, n1)).copy_from(&self.f21);
        k.view_mut((k1, n1), (k2, n2)).copy_from(&self.f22);
        k
    }

    /// Squared Frobenius distances `|F_ij − G_ij|²` in the order 11, 12, 21, 22.
    pub fn sq_distances(&self, other: &Gains) -> [f64; 4] {
        [
            (&self.f11 - &other.f11).norm_squared(),
            (&self.f12 - &other.f12).norm_squared(),
            (&self.f21 - &other.f21).norm_squared(),
            (&self.f22 - &other.f22).norm_squared(),
        ]
    }
}

/// Saddle-point gains from first-order-form blocks; `eps = 0` gives the
/// approximate gains.
pub fn gains_from_blocks(b: &Blocks, eps: f64, spec: &GameSpec) -> Gains {
    let p12t = b.p12.transpose();
    let b11t = spec.b11.transpose();
    let b12t = spec.b12.transpose();
    let b21t = spec.b21.transpose();
    let b22t = spec.b22.transpose();
    Gains {
        f11: &b11t * &b.p11 + &b21t * &p12t,
        f12: &b11t * &b.p12 * eps + &b21t * &b.p22,
        f21: -(&b12t * &b.p11 + &b22t * &p12t),
        f22: -(&b12t * &b.p12 * eps + &b22t * &b.p22),
    }
}

/// Solution a feedback law is built from.
#[derive(Debug, Clone, Copy)]
pub enum SolutionRef<'a> {
    Full(&'a RiccatiSolution),
    Reduced(&'a ReducedSolution),
}

/// Time-indexed feedback for both players, optionally with constant offsets.
#[derive(Debug, Clone)]
pub struct FeedbackLaw<'a> {
    pub kind: FeedbackKind,
    source: SolutionRef<'a>,
    spec: GameSpec,
    /// Constant `k_i × n` additions to each player's stacked gain.
    offsets: [Option<Mat>; 2],
}

pub fn make_feedback<'a>(
    kind: FeedbackKind,
    sol: SolutionRef<'a>,
    spec: &GameSpec,
) -> Result<FeedbackLaw<'a>> {
    match (kind, sol) {
        (FeedbackKind::Exact, SolutionRef::Full(_))
        | (FeedbackKind::Approximate, SolutionRef::Reduced(_)) => Ok(FeedbackLaw {
            kind,
            source: sol,
            spec: spec.clone(),
            offsets: [None, None],
        }),
        _ => Err(Error::KindMismatch),
    }
}

impl<'a> FeedbackLaw<'a> {
    pub fn dims(&self) -> Dims {
        self.spec.dims
    }

    pub fn horizon(&self) -> f64 {
        self.spec.horizon
    }

    /// Unperturbed gains at `t`, clamped to `[0, T]`.
    pub fn gains(&self, t: f64) -> Gains {
        let t = t.clamp(0.0, self.spec.horizon);
        match self.source {
            SolutionRef::Full(sol) => gains_from_blocks(&sol.eval_clamped(t), sol.eps, &self.spec),
            SolutionRef::Reduced(red) => {
                let p11 = red.p11bar(t);
                let b = Blocks {
                    p12: crate::reduced::p12_bar(&p11, &red.p22bar, &self.spec),
                    p11,
                    p22: red.p22bar.clone(),
                };
                gains_from_blocks(&b, 0.0, &self.spec)
            }
        }
    }

    /// Stacked gain at `t` including any offsets.
    pub fn stacked_gain(&self, t: f64) -> Mat {
        let mut k = self.gains(t).stacked();
        let d = self.spec.dims;
        if let Some(o) = &self.offsets[0] {
            let mut rows = k.view_mut((0, 0), (d.k1, d.n()));
            rows += o;
        }
        if let Some(o) = &self.offsets[1] {
            let mut rows = k.view_mut((d.k1, 0), (d.k2, d.n()));
            rows += o;
        }
        k
    }

    /// Same law with a constant `k_i × n` matrix added to `player`'s gain.
    pub fn perturbed(&self, player: Player, offset: Mat) -> Result<FeedbackLaw<'a>> {
        let d = self.spec.dims;
        let rows = match player {
            Player::Maximizer => d.k1,
            Player::Minimizer => d.k2,
        };
        if offset.shape() != (rows, d.n()) {
            return Err(Error::Dimension(format!(
                "offset is {}x{}, expected {rows}x{}",
                offset.nrows(),
                offset.ncols(),
                d.n()
            )));
        }
        let mut law = self.clone();
        law.offsets[player as usize] = Some(offset);
        Ok(law)
    }
}

fn check_x0(spec: &GameSpec, x0: &[f64]) -> Result<()> {
    if x0.len() != spec.dims.n() {
        return Err(Error::Dimension(format!(
            "x0 has {} entries, expected {}",
            x0.len(),
            spec.dims.n()
        )));
    }
    Ok(())
}

fn quad(p: &Mat, x: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..p.nrows() {
        for j in 0..p.ncols() {
            acc += x[i] * p[(i, j)] * x[j];
        }
    }
    acc
}

fn bilinear(p: &Mat, x: &[f64], y: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..p.nrows() {
        for j in 0..p.ncols() {
            acc += x[i] * p[(i, j)] * y[j];
        }
    }
    acc
}

/// `trace(σᵀ P σ)`.
fn noise_trace(p: &Mat, sigma: &Mat) -> f64 {
    (sigma.transpose() * p * sigma).trace()
}

/// Trapezoid rule for samples `ys` at increasing abscissae `xs`.
pub fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    xs.windows(2)
        .zip(ys.windows(2))
        .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
        .sum()
}

/// Value of the game at `(0, x0)` from the full solution.
pub fn closed_form_value(full: &RiccatiSolution, spec: &GameSpec, x0: &[f64]) -> Result<f64> {
    check_x0(spec, x0)?;
    let n1 = spec.dims.n1;
    let (x1, x2) = x0.split_at(n1);
    let b0 = full.eval(0.0)?;
    let eps = full.eps;
    let deterministic =
        0.5 * (quad(&b0.p11, x1) + 2.0 * eps * bilinear(&b0.p12, x1, x2) + eps * quad(&b0.p22, x2));
    let integrand: Vec<f64> = (0..full.grid.len())
        .map(|k| noise_trace(&full.p11[k], &spec.sigma1) + noise_trace(&full.p22[k], &spec.sigma2))
        .collect();
    Ok(deterministic + 0.5 * trapezoid(&full.grid, &integrand))
}

/// Limit of the value as `eps → 0`, from the reduced solution.
pub fn limiting_value(red: &ReducedSolution, spec: &GameSpec, x0: &[f64]) -> Result<f64> {
    check_x0(spec, x0)?;
    let x1 = &x0[..spec.dims.n1];
    let integrand: Vec<f64> = red
        .dre
        .values
        .iter()
        .map(|p| noise_trace(p, &spec.sigma1))
        .collect();
    Ok(0.5 * quad(&red.p11bar(0.0), x1)
        + 0.5 * trapezoid(&red.dre.grid, &integrand)
        + 0.5 * spec.horizon * noise_trace(&red.p22bar, &spec.sigma2))
}

/// Closed-form and simulated values at one `eps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ValueReport {
    pub v_eps_closed: f64,
    pub j_mc: f64,
    pub j_mc_stderr: f64,
    pub v_bar: f64,
    /// `J(exact) − J(approximate)` on common paths.
    pub gap_exact_approx: f64,
    pub gap_exact_approx_stderr: f64,
    /// `V_eps − V_bar`.
    pub gap_to_limit: f64,
}

/// Value report together with the simulated batches behind it.
#[derive(Debug, Clone)]
pub struct ValueRun {
    pub report: ValueReport,
    pub exact: SimBatch,
    pub approximate: SimBatch,
}

/// Closed-form values plus one coupled simulation of the exact and
/// approximate laws.
pub fn value_run(
    spec: &GameSpec,
    full: &RiccatiSolution,
    red: &ReducedSolution,
    x0: &[f64],
    cfg: &SimConfig,
) -> Result<ValueRun> {
    let v_eps_closed = closed_form_value(full, spec, x0)?;
    let v_bar = limiting_value(red, spec, x0)?;
    let exact = make_feedback(FeedbackKind::Exact, SolutionRef::Full(full), spec)?;
    let approx = make_feedback(FeedbackKind::Approximate, SolutionRef::Reduced(red), spec)?;
    let mut batches = simulate_coupled(
        spec,
        full.eps,
        &[LawRun::plain(&exact), LawRun::plain(&approx)],
        x0,
        cfg,
    )?;
    let approximate = batches.pop().expect("two laws simulated");
    let exact = batches.pop().expect("two laws simulated");
    let (j_mc, j_mc_stderr) = mc_objective(&exact);
    let (gap, gap_stderr) = paired_stats(&exact.costs, &approximate.costs);
    Ok(ValueRun {
        report: ValueReport {
            v_eps_closed,
            j_mc,
            j_mc_stderr,
            v_bar,
            gap_exact_approx: gap,
            gap_exact_approx_stderr: gap_stderr,
            gap_to_limit: v_eps_closed - v_bar,
        },
        exact,
        approximate,
    })
}

/// [`ValueRun::report`] alone.
pub fn value_report(
    spec: &GameSpec,
    full: &RiccatiSolution,
    red: &ReducedSolution,
    x0: &[f64],
    cfg: &SimConfig,
) -> Result<ValueReport> {
    Ok(value_run(spec, full, red, x0, cfg)?.report)
}
