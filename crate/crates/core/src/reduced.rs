//! The `eps = 0` limit: a stabilising algebraic Riccati root for the fast
//! block, a reduced differential Riccati equation for the slow block, and the
//! affine map recovering the off-diagonal block.

use nalgebra::LU;
use serde::Serialize;

use crate::error::{Error, OdeSystem, Result};
use crate::linalg::{
    eigenvalues, min_singular_value, ordered_schur_stable_first, solve_sylvester,
    sym_max_eigenvalue, symmetrize_in_place, Mat, IMAG_AXIS_TOL,
};
use crate::model::{delta_blocks, DeltaBlocks, GameSpec};
use crate::ode::{ToleranceConfig, Trajectory};
use crate::output::{csv_text, matrix_columns, row_major};
use crate::riccati::{integrate_layered, map_failure, Blocks, FullRhs};

/// Relative singular-value floor below which `Δ2` and `Λ` count as singular.
pub const SINGULAR_REL_TOL: f64 = 1e-10;

const NEWTON_MAX_ITER: usize = 20;

/// Minimum number of steps across the horizon for the reduced DRE.
const DRE_MIN_STEPS: f64 = 200.0;

fn is_singular(m: &Mat) -> Option<f64> {
    let sigma_min = min_singular_value(m);
    (sigma_min <= SINGULAR_REL_TOL * m.norm()).then_some(sigma_min)
}

fn inverse(m: &Mat) -> Mat {
    LU::new(m.clone())
        .try_inverse()
        .unwrap_or_else(|| Mat::from_element(m.nrows(), m.ncols(), f64::NAN))
}

/// `A22ᵀ P + P A22 + P Δ2 P + Q2`.
pub fn are_residual(spec: &GameSpec, delta2: &Mat, p: &Mat) -> Mat {
    spec.a22.transpose() * p + p * &spec.a22 + p * delta2 * p + &spec.q2
}

fn is_hurwitz(m: &Mat) -> bool {
    eigenvalues(m).iter().all(|z| z.re < 0.0)
}

fn checked_delta2(spec: &GameSpec) -> Result<DeltaBlocks> {
    let d = delta_blocks(spec);
    if let Some(sigma_min) = is_singular(&d.delta2) {
        return Err(Error::Delta2Singular { sigma_min });
    }
    Ok(d)
}

/// Newton iterations `SᵀE + ES = −F(P)` until the correction stalls.
fn newton_polish(spec: &GameSpec, delta2: &Mat, mut p: Mat, max_iter: usize) -> Result<Mat> {
    for _ in 0..max_iter {
        let s = &spec.a22 + delta2 * &p;
        let r = are_residual(spec, delta2, &p);
        let e = solve_sylvester(&s.transpose(), &s, &(-r)).ok_or_else(|| {
            Error::NoStabilizingSolution("Newton step has a singular Lyapunov operator".into())
        })?;
        p += &e;
        symmetrize_in_place(&mut p);
        if e.norm() <= 1e-15 * (1.0 + p.norm()) {
            break;
        }
    }
    Ok(p)
}

/// Stabilising root `P22bar` of the reduced algebraic Riccati equation and
/// the closed-loop fast matrix `S = A22 + Δ2·P22bar`.
pub fn solve_reduced_are(spec: &GameSpec) -> Result<(Mat, Mat)> {
    spec.ensure_valid()?;
    let d = checked_delta2(spec)?;
    let n2 = spec.dims.n2;
    let mut h = Mat::zeros(2 * n2, 2 * n2);
    h.view_mut((0, 0), (n2, n2)).copy_from(&spec.a22);
    h.view_mut((0, n2), (n2, n2)).copy_from(&d.delta2);
    h.view_mut((n2, 0), (n2, n2)).copy_from(&(-&spec.q2));
    h.view_mut((n2, n2), (n2, n2))
        .copy_from(&(-spec.a22.transpose()));
    let schur = ordered_schur_stable_first(&h);
    if schur.min_abs_real < IMAG_AXIS_TOL {
        return Err(Error::NoStabilizingSolution(format!(
            "Hamiltonian has an eigenvalue with |Re λ| = {:e} on the imaginary axis",
            schur.min_abs_real
        )));
    }
    if schur.n_stable != n2 {
        return Err(Error::NoStabilizingSolution(format!(
            "stable invariant subspace has dimension {} instead of {n2}",
            schur.n_stable
        )));
    }
    let x = schur.q.view((0, 0), (n2, n2)).into_owned();
    let y = schur.q.view((n2, 0), (n2, n2)).into_owned();
    let x_sv = x.clone().svd(false, false).singular_values;
    if x_sv.min() <= SINGULAR_REL_TOL * x_sv.max() {
        return Err(Error::NoStabilizingSolution(
            "stable subspace basis has a singular upper block".into(),
        ));
    }
    let x_inv = x.try_inverse().ok_or_else(|| {
        Error::NoStabilizingSolution("stable subspace basis has a singular upper block".into())
    })?;
    let mut p = (y * x_inv).map(|z| z.re);
    symmetrize_in_place(&mut p);
    let p = newton_polish(spec, &d.delta2, p, 1)?;
    let s = &spec.a22 + &d.delta2 * &p;
    if !is_hurwitz(&s) {
        return Err(Error::NoStabilizingSolution(
            "closed-loop fast matrix is not Hurwitz".into(),
        ));
    }
    Ok((p, s))
}

/// Newton iteration on the reduced algebraic Riccati equation from `guess`.
pub fn refine_are(spec: &GameSpec, guess: &Mat) -> Result<Mat> {
    spec.ensure_valid()?;
    let d = checked_delta2(spec)?;
    let mut p = guess.clone();
    symmetrize_in_place(&mut p);
    newton_polish(spec, &d.delta2, p, NEWTON_MAX_ITER)
}

/// Constant coefficients of the reduced differential Riccati equation.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedCoefficients {
    pub atilde: Mat,
    pub m: Mat,
    pub n: Mat,
    pub lambda: Mat,
}

/// `Λ = A22ᵀΔ2⁻¹A22 − Q2` and the coefficients `(Ã, M, N)`.
///
/// `p22bar` is not needed by the formulas; it is accepted so callers pass the
/// pair that certifies `Λ` invertible.
pub fn reduced_coefficients(spec: &GameSpec, _p22bar: &Mat) -> Result<ReducedCoefficients> {
    let d = checked_delta2(spec)?;
    let d2_inv = {
        let mut m = inverse(&d.delta2);
        symmetrize_in_place(&mut m);
        m
    };
    let (a12, a21, a22) = (&spec.a12, &spec.a21, &spec.a22);
    let mut lambda = a22.transpose() * &d2_inv * a22 - &spec.q2;
    symmetrize_in_place(&mut lambda);
    if let Some(sigma_min) = is_singular(&lambda) {
        return Err(Error::LambdaSingular { sigma_min });
    }
    let lambda_inv = {
        let mut m = inverse(&lambda);
        symmetrize_in_place(&mut m);
        m
    };
    let core = &d2_inv * (&d.delta2 - a22 * &lambda_inv * a22.transpose()) * &d2_inv;
    let atilde =
        &spec.a11 - &d.delta * &core * a21 - a12 * &lambda_inv * a22.transpose() * &d2_inv * a21;
    let cross = &d.delta * &d2_inv * a22 * &lambda_inv * a12.transpose();
    let mut m = &d.delta1 + a12 * &lambda_inv * a12.transpose()
        - &cross
        - cross.transpose()
        - &d.delta * &core * d.delta.transpose();
    let mut n = &spec.q1 - a21.transpose() * &core * a21;
    symmetrize_in_place(&mut m);
    symmetrize_in_place(&mut n);
    Ok(ReducedCoefficients {
        atilde,
        m,
        n,
        lambda,
    })
}

/// Solution of the reduced differential Riccati equation on `[0, T]`.
#[derive(Debug, Clone)]
pub struct ReducedDre {
    pub horizon: f64,
    /// Increasing times from `0` to `T`.
    pub grid: Vec<f64>,
    pub values: Vec<Mat>,
    /// `sup_t |P11bar(t)|`.
    pub p0: f64,
    traj: Trajectory,
    n1: usize,
}

impl ReducedDre {
    /// Dense value at `t`, clamped to `[0, T]`.
    pub fn eval(&self, t: f64) -> Mat {
        let s = self.horizon - t.clamp(0.0, self.horizon);
        let mut p = Mat::from_row_slice(self.n1, self.n1, &self.traj.eval(s));
        symmetrize_in_place(&mut p);
        p
    }

    /// `dP11bar/dt` at `t`, clamped to `[0, T]`.
    pub fn eval_deriv(&self, t: f64) -> Mat {
        let s = self.horizon - t.clamp(0.0, self.horizon);
        -Mat::from_row_slice(self.n1, self.n1, &self.traj.eval_deriv(s))
    }
}

/// Integrates `dP/dt + ÃᵀP + PÃ + PMP + N = 0`, `P(T) = 0` backward.
pub fn solve_reduced_dre(
    spec: &GameSpec,
    coeffs: &ReducedCoefficients,
    tol: &ToleranceConfig,
) -> Result<ReducedDre> {
    tol.validate()?;
    let n1 = spec.dims.n1;
    let horizon = spec.horizon;
    let at = coeffs.atilde.transpose();
    let rhs = |_s: f64, y: &[f64], dy: &mut [f64]| {
        let p = Mat::from_row_slice(n1, n1, y);
        let pa = &p * &coeffs.atilde;
        let out = &at * &p + pa + &p * &coeffs.m * &p + &coeffs.n;
        for (k, v) in row_major(&out).enumerate() {
            dy[k] = v;
        }
    };
    // Bounding the step keeps the cubic dense output as accurate as the nodes.
    let layer = Some((horizon, horizon / DRE_MIN_STEPS));
    let traj = integrate_layered(rhs, vec![0.0; n1 * n1], horizon, layer, &[(0, n1)], tol)
        .map_err(|f| map_failure(f, OdeSystem::ReducedDre, horizon))?;
    let grid: Vec<f64> = traj.s.iter().rev().map(|s| horizon - s).collect();
    let values: Vec<Mat> = traj
        .y
        .iter()
        .rev()
        .map(|y| Mat::from_row_slice(n1, n1, y))
        .collect();
    let p0 = values.iter().map(Mat::norm).fold(0.0, f64::max);
    Ok(ReducedDre {
        horizon,
        grid,
        values,
        p0,
        traj,
        n1,
    })
}

/// `P12bar = −(A21ᵀP22bar + P11·A12 + P11·Δ·P22bar)(A22 + Δ2·P22bar)⁻¹`.
pub fn p12_bar(p11: &Mat, p22bar: &Mat, spec: &GameSpec) -> Mat {
    let d = delta_blocks(spec);
    let s = &spec.a22 + &d.delta2 * p22bar;
    let num = spec.a21.transpose() * p22bar + p11 * &spec.a12 + p11 * &d.delta * p22bar;
    // X·S = −num  ⇔  Sᵀ·Xᵀ = −numᵀ
    let xt = LU::new(s.transpose())
        .solve(&(-num.transpose()))
        .unwrap_or_else(|| Mat::from_element(s.nrows(), p11.nrows(), f64::NAN));
    xt.transpose()
}

/// Everything the reduced problem produces, plus the stability margin.
#[derive(Debug, Clone)]
pub struct ReducedSolution {
    pub dre: ReducedDre,
    /// `P12bar` on `dre.grid`.
    pub p12bar: Vec<Mat>,
    pub p22bar: Mat,
    pub coeffs: ReducedCoefficients,
    pub s: Mat,
    /// `−λ_max(sym S)`; positive iff the symmetric part of `S` is negative definite.
    pub gamma: f64,
    pub deltas: DeltaBlocks,
    pub dims: crate::model::Dims,
}

impl ReducedSolution {
    pub fn grid(&self) -> &[f64] {
        &self.dre.grid
    }

    pub fn p0(&self) -> f64 {
        self.dre.p0
    }

    pub fn p11bar(&self, t: f64) -> Mat {
        self.dre.eval(t)
    }

    pub fn p12bar_at(&self, t: f64, spec: &GameSpec) -> Mat {
        p12_bar(&self.dre.eval(t), &self.p22bar, spec)
    }

    /// Constants as JSON.
    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Constants {
            p22bar: Vec<Vec<f64>>,
            s: Vec<Vec<f64>>,
            atilde: Vec<Vec<f64>>,
            m: Vec<Vec<f64>>,
            n: Vec<Vec<f64>>,
            lambda: Vec<Vec<f64>>,
            gamma: f64,
            p0: f64,
        }
        let rows = |m: &Mat| -> Vec<Vec<f64>> {
            m.row_iter().map(|r| r.iter().copied().collect()).collect()
        };
        let c = Constants {
            p22bar: rows(&self.p22bar),
            s: rows(&self.s),
            atilde: rows(&self.coeffs.atilde),
            m: rows(&self.coeffs.m),
            n: rows(&self.coeffs.n),
            lambda: rows(&self.coeffs.lambda),
            gamma: self.gamma,
            p0: self.dre.p0,
        };
        Ok(serde_json::to_string_pretty(&c)?)
    }

    /// CSV with columns `t`, `P11bar_ij`, `P12bar_ij`.
    pub fn to_csv(&self) -> String {
        let d = self.dims;
        let mut header = vec!["t".to_string()];
        header.extend(matrix_columns("P11bar", d.n1, d.n1));
        header.extend(matrix_columns("P12bar", d.n1, d.n2));
        let rows = (0..self.dre.grid.len()).map(|k| {
            std::iter::once(self.dre.grid[k])
                .chain(row_major(&self.dre.values[k]))
                .chain(row_major(&self.p12bar[k]))
                .collect::<Vec<_>>()
        });
        csv_text(&header, rows)
    }
}

/// Runs the whole reduced pipeline: ARE, coefficients, DRE, `P12bar`.
pub fn solve_reduced(spec: &GameSpec, tol: &ToleranceConfig) -> Result<ReducedSolution> {
    let (p22bar, s) = solve_reduced_are(spec)?;
    let coeffs = reduced_coefficients(spec, &p22bar)?;
    let dre = solve_reduced_dre(spec, &coeffs, tol)?;
    let p12bar = dre
        .values
        .iter()
        .map(|p| p12_bar(p, &p22bar, spec))
        .collect();
    let gamma = -sym_max_eigenvalue(&s);
    Ok(ReducedSolution {
        dre,
        p12bar,
        p22bar,
        coeffs,
        s,
        gamma,
        deltas: delta_blocks(spec),
        dims: spec.dims,
    })
}

/// Largest Frobenius residuals of the three `eps = 0` equations over the grid.
pub fn verify_reduced_system(rs: &ReducedSolution, spec: &GameSpec) -> (f64, f64, f64) {
    let rhs = FullRhs::new(spec);
    let mut worst = (0.0f64, 0.0f64, 0.0f64);
    for (k, &t) in rs.dre.grid.iter().enumerate() {
        let b = Blocks {
            p11: rs.dre.values[k].clone(),
            p12: rs.p12bar[k].clone(),
            p22: rs.p22bar.clone(),
        };
        let (f, g1, g2) = rhs.eval(&b, 0.0);
        let r6a = rs.dre.eval_deriv(t) + f;
        worst.0 = worst.0.max(r6a.norm());
        worst.1 = worst.1.max(g1.norm());
        worst.2 = worst.2.max(g2.norm());
    }
    worst
}
