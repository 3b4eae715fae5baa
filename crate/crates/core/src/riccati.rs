//! The full Riccati system at fixed `eps`, integrated backward from `P(T) = 0`.
//!
//! The state is stored in first-order form: `P = [[P11, eps·P12], [eps·P12ᵀ, eps·P22]]`.
//! Integration runs forward in time-to-go `s = T − t`.

use crate::error::{Error, OdeSystem, Result};
use crate::linalg::{symmetrize_in_place, Mat};
use crate::model::{assemble_compact, check_eps, delta_blocks, Dims, GameSpec};
use crate::ode::{
    integrate, IntegrationFailure, StepCheck, StepControl, ToleranceConfig, Trajectory,
};
use crate::output::{csv_text, matrix_columns, row_major};

/// Largest pre-symmetrization drift, relative to `max(1, |P|)`, accepted on a step.
pub const SYMMETRY_DRIFT_TOL: f64 = 1e-9;

/// Below this `eps` the terminal layer is integrated with a capped step.
pub const TERMINAL_LAYER_EPS: f64 = 1e-2;

/// The three blocks `(P11, P12, P22)` of a first-order-form solution.
#[derive(Debug, Clone, PartialEq)]
pub struct Blocks {
    pub p11: Mat,
    pub p12: Mat,
    pub p22: Mat,
}

impl Blocks {
    pub fn zeros(d: Dims) -> Self {
        Self {
            p11: Mat::zeros(d.n1, d.n1),
            p12: Mat::zeros(d.n1, d.n2),
            p22: Mat::zeros(d.n2, d.n2),
        }
    }

    pub(crate) fn pack(&self) -> Vec<f64> {
        row_major(&self.p11)
            .chain(row_major(&self.p12))
            .chain(row_major(&self.p22))
            .collect()
    }

    pub(crate) fn unpack(d: Dims, y: &[f64]) -> Self {
        let (a, b) = (d.n1 * d.n1, d.n1 * d.n2);
        Self {
            p11: Mat::from_row_slice(d.n1, d.n1, &y[..a]),
            p12: Mat::from_row_slice(d.n1, d.n2, &y[a..a + b]),
            p22: Mat::from_row_slice(d.n2, d.n2, &y[a + b..]),
        }
    }
}

/// Right-hand sides `(f, g1, g2)` with the block data precomputed.
#[derive(Debug, Clone)]
pub struct FullRhs {
    a11: Mat,
    a12: Mat,
    a21: Mat,
    a22: Mat,
    delta1: Mat,
    delta: Mat,
    delta2: Mat,
    q1: Mat,
    q2: Mat,
}

impl FullRhs {
    pub fn new(spec: &GameSpec) -> Self {
        let d = delta_blocks(spec);
        Self {
            a11: spec.a11.clone(),
            a12: spec.a12.clone(),
            a21: spec.a21.clone(),
            a22: spec.a22.clone(),
            delta1: d.delta1,
            delta: d.delta,
            delta2: d.delta2,
            q1: spec.q1.clone(),
            q2: spec.q2.clone(),
        }
    }

    /// `f`, `g1`, `g2` at `(P11, P12, P22)`; `f` and `g2` are symmetrized.
    pub fn eval(&self, p: &Blocks, eps: f64) -> (Mat, Mat, Mat) {
        let (p11, p12, p22) = (&p.p11, &p.p12, &p.p22);
        let p12t = p12.transpose();
        let delta_t = self.delta.transpose();
        let p11_delta = p11 * &self.delta;
        let p12_delta2 = p12 * &self.delta2;

        let x = p11 * &self.a11
            + p12 * &self.a21
            + p11 * &self.delta1 * p11 * 0.5
            + &p11_delta * &p12t
            + &p12_delta2 * &p12t * 0.5;
        let mut f = &x + x.transpose() + &self.q1;
        symmetrize_in_place(&mut f);

        let g1 = (self.a11.transpose() * p12 + p11 * &self.delta1 * p12 + p12 * &delta_t * p12)
            * eps
            + self.a21.transpose() * p22
            + p11 * &self.a12
            + p12 * &self.a22
            + &p11_delta * p22
            + &p12_delta2 * p22;

        let y = &p12t * &self.a12 * eps
            + p22 * &self.a22
            + &p12t * &self.delta1 * p12 * (0.5 * eps * eps)
            + p22 * &delta_t * p12 * eps
            + p22 * &self.delta2 * p22 * 0.5;
        let mut g2 = &y + y.transpose() + &self.q2;
        symmetrize_in_place(&mut g2);
        (f, g1, g2)
    }
}

/// Evaluates the three full-system right-hand sides; `eps = 0` gives the
/// reduced-system right-hand sides.
pub fn full_rhs(p11: &Mat, p12: &Mat, p22: &Mat, eps: f64, spec: &GameSpec) -> (Mat, Mat, Mat) {
    let p = Blocks {
        p11: p11.clone(),
        p12: p12.clone(),
        p22: p22.clone(),
    };
    FullRhs::new(spec).eval(&p, eps)
}

/// Symmetrizes the `P11` and `P22` slices of a packed state in place.
pub(crate) fn symmetrize_packed(y: &mut [f64], blocks: &[(usize, usize)]) -> StepCheck {
    let scale = 1.0 + y.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut worst: f64 = 0.0;
    for &(offset, n) in blocks {
        let mut drift2 = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                let (a, b) = (offset + i * n + j, offset + j * n + i);
                let d = y[a] - y[b];
                drift2 += 2.0 * d * d;
                let avg = 0.5 * (y[a] + y[b]);
                y[a] = avg;
                y[b] = avg;
            }
        }
        worst = worst.max(drift2.sqrt());
    }
    if worst > SYMMETRY_DRIFT_TOL * scale {
        StepCheck::Reject
    } else if worst > 0.0 {
        StepCheck::Modified
    } else {
        StepCheck::Unchanged
    }
}

/// Time-gridded solution of the full system with a `C¹` dense interpolant.
#[derive(Debug, Clone)]
pub struct RiccatiSolution {
    pub eps: f64,
    pub horizon: f64,
    pub dims: Dims,
    /// Increasing times from `0` to `T`.
    pub grid: Vec<f64>,
    pub p11: Vec<Mat>,
    pub p12: Vec<Mat>,
    pub p22: Vec<Mat>,
    traj: Trajectory,
}

impl RiccatiSolution {
    fn check_time(&self, t: f64) -> Result<()> {
        if (0.0..=self.horizon).contains(&t) {
            Ok(())
        } else {
            Err(Error::TimeOutOfRange {
                t,
                horizon: self.horizon,
            })
        }
    }

    /// Blocks at time `t` from the dense interpolant.
    pub fn eval(&self, t: f64) -> Result<Blocks> {
        self.check_time(t)?;
        Ok(self.eval_clamped(t))
    }

    pub(crate) fn eval_clamped(&self, t: f64) -> Blocks {
        let t = t.clamp(0.0, self.horizon);
        let mut b = Blocks::unpack(self.dims, &self.traj.eval(self.horizon - t));
        symmetrize_in_place(&mut b.p11);
        symmetrize_in_place(&mut b.p22);
        b
    }

    /// Time derivatives `(dP11/dt, dP12/dt, dP22/dt)` at `t`.
    pub fn eval_deriv(&self, t: f64) -> Result<Blocks> {
        self.check_time(t)?;
        let ds = self.traj.eval_deriv(self.horizon - t);
        let mut b = Blocks::unpack(self.dims, &ds);
        b.p11 *= -1.0;
        b.p12 *= -1.0;
        b.p22 *= -1.0;
        Ok(b)
    }

    /// Number of accepted integrator steps.
    pub fn n_steps(&self) -> usize {
        self.traj.len().saturating_sub(1)
    }

    /// CSV with columns `t`, `P11_ij`, `P12_ij`, `P22_ij` (row-major).
    pub fn to_csv(&self) -> String {
        let d = self.dims;
        let mut header = vec!["t".to_string()];
        header.extend(matrix_columns("P11", d.n1, d.n1));
        header.extend(matrix_columns("P12", d.n1, d.n2));
        header.extend(matrix_columns("P22", d.n2, d.n2));
        let rows = (0..self.grid.len()).map(|k| {
            std::iter::once(self.grid[k])
                .chain(row_major(&self.p11[k]))
                .chain(row_major(&self.p12[k]))
                .chain(row_major(&self.p22[k]))
                .collect::<Vec<_>>()
        });
        csv_text(&header, rows)
    }
}

/// Integrates the packed system `dy/ds = rhs` over `[0, span]`, with an
/// optional capped-step first segment `[0, layer]`.
pub(crate) fn integrate_layered<F>(
    mut rhs: F,
    y0: Vec<f64>,
    span: f64,
    layer: Option<(f64, f64)>,
    sym_blocks: &[(usize, usize)],
    tol: &ToleranceConfig,
) -> std::result::Result<Trajectory, IntegrationFailure>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let ctl = StepControl::for_span(span);
    let hook = |y: &mut [f64]| symmetrize_packed(y, sym_blocks);
    match layer {
        Some((width, h_cap)) if width < span => {
            let capped = StepControl {
                h_max: h_cap,
                ..ctl
            };
            let mut traj = integrate(&mut rhs, hook, 0.0, width, y0, tol, &capped)?;
            let y_mid = traj.y.last().cloned().unwrap_or_default();
            let rest = integrate(&mut rhs, hook, width, span, y_mid, tol, &ctl)?;
            traj.append(rest);
            Ok(traj)
        }
        Some((_, h_cap)) => {
            let capped = StepControl {
                h_max: h_cap,
                ..ctl
            };
            integrate(&mut rhs, hook, 0.0, span, y0, tol, &capped)
        }
        None => integrate(&mut rhs, hook, 0.0, span, y0, tol, &ctl),
    }
}

pub(crate) fn map_failure(f: IntegrationFailure, system: OdeSystem, horizon: f64) -> Error {
    match f {
        IntegrationFailure::BlowUp { s } => Error::BlowUp {
            system,
            t_escape: horizon - s,
        },
        IntegrationFailure::StepLimit { s } => Error::StepLimitExceeded {
            system,
            t: horizon - s,
        },
    }
}

/// Solves the full system on `[0, T]` at fixed `eps`.
///
/// With `output_grid`, the stored grid is that set of times (sorted);
/// otherwise it is the accepted-step grid.
pub fn solve_full(
    spec: &GameSpec,
    eps: f64,
    tol: &ToleranceConfig,
    output_grid: Option<&[f64]>,
) -> Result<RiccatiSolution> {
    spec.ensure_valid()?;
    check_eps(eps)?;
    tol.validate()?;
    let d = spec.dims;
    let horizon = spec.horizon;
    let rhs_data = FullRhs::new(spec);
    let (n11, n12) = (d.n1 * d.n1, d.n1 * d.n2);
    let rhs = |_s: f64, y: &[f64], dy: &mut [f64]| {
        let p = Blocks::unpack(d, y);
        let (f, g1, g2) = rhs_data.eval(&p, eps);
        let inv = 1.0 / eps;
        for (k, v) in row_major(&f).enumerate() {
            dy[k] = v;
        }
        for (k, v) in row_major(&g1).enumerate() {
            dy[n11 + k] = v * inv;
        }
        for (k, v) in row_major(&g2).enumerate() {
            dy[n11 + n12 + k] = v * inv;
        }
    };
    let layer =
        (eps < TERMINAL_LAYER_EPS).then(|| (50.0 * eps * std::f64::consts::LN_10, eps / 20.0));
    let y0 = Blocks::zeros(d).pack();
    let sym = [(0, d.n1), (n11 + n12, d.n2)];
    let traj = integrate_layered(rhs, y0, horizon, layer, &sym, tol)
        .map_err(|f| map_failure(f, OdeSystem::Full, horizon))?;

    let mut sol = RiccatiSolution {
        eps,
        horizon,
        dims: d,
        grid: Vec::new(),
        p11: Vec::new(),
        p12: Vec::new(),
        p22: Vec::new(),
        traj,
    };
    let times: Vec<f64> = match output_grid {
        Some(g) => {
            let mut g = g.to_vec();
            if let Some(&bad) = g.iter().find(|t| !(0.0..=horizon).contains(*t)) {
                return Err(Error::TimeOutOfRange { t: bad, horizon });
            }
            g.sort_by(f64::total_cmp);
            g.dedup();
            g
        }
        None => sol.traj.s.iter().rev().map(|s| horizon - s).collect(),
    };
    for &t in &times {
        let b = sol.eval_clamped(t);
        sol.p11.push(b.p11);
        sol.p12.push(b.p12);
        sol.p22.push(b.p22);
    }
    sol.grid = times;
    Ok(sol)
}

/// `[[P11, eps·P12], [eps·P12ᵀ, eps·P22]]` at time `t`.
#[allow(non_snake_case)]
pub fn assemble_P(sol: &RiccatiSolution, t: f64) -> Result<Mat> {
    let b = sol.eval(t)?;
    Ok(assemble_blocks(&b, sol.eps, sol.dims))
}

pub(crate) fn assemble_blocks(b: &Blocks, eps: f64, d: Dims) -> Mat {
    let n1 = d.n1;
    let mut p = Mat::zeros(d.n(), d.n());
    p.view_mut((0, 0), (n1, n1)).copy_from(&b.p11);
    p.view_mut((0, n1), (n1, d.n2)).copy_from(&(&b.p12 * eps));
    p.view_mut((n1, 0), (d.n2, n1))
        .copy_from(&(b.p12.transpose() * eps));
    p.view_mut((n1, n1), (d.n2, d.n2))
        .copy_from(&(&b.p22 * eps));
    p
}

/// Largest Frobenius residual of the `n × n` generalised Riccati equation over the grid.
pub fn riccati_residual(sol: &RiccatiSolution, spec: &GameSpec) -> Result<f64> {
    let compact = assemble_compact(spec, sol.eps)?;
    let k = compact.quadratic_coefficient();
    let a = &compact.a_eps;
    let mut worst: f64 = 0.0;
    for &t in &sol.grid {
        let p = assemble_blocks(&sol.eval(t)?, sol.eps, sol.dims);
        let dp = assemble_blocks(&sol.eval_deriv(t)?, sol.eps, sol.dims);
        let r = dp + a.transpose() * &p + &p * a + &p * &k * &p + &compact.q;
        worst = worst.max(r.norm());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixture_s1;
    use approx::assert_relative_eq;

    fn scalar(x: f64) -> Mat {
        Mat::from_element(1, 1, x)
    }

    #[test]
    fn rhs_constant_terms_only_at_zero() {
        let spec = fixture_s1();
        let z = scalar(0.0);
        let (f, g1, g2) = full_rhs(&z, &z, &z, 1.0, &spec);
        assert_eq!((f[(0, 0)], g1[(0, 0)], g2[(0, 0)]), (1.0, 0.0, 1.0));
    }

    #[test]
    fn rhs_reduced_f_value() {
        let spec = fixture_s1();
        let (f, _, _) = full_rhs(&scalar(1.0), &scalar(0.0), &scalar(0.0), 0.0, &spec);
        assert_relative_eq!(f[(0, 0)], -0.25, epsilon = 1e-15);
    }

    #[test]
    fn zero_cost_is_identically_zero() {
        let spec = fixture_s1().zero_cost();
        let sol = solve_full(&spec, 0.3, &ToleranceConfig::default(), None).unwrap();
        for k in 0..sol.grid.len() {
            assert_eq!(
                sol.p11[k].norm() + sol.p12[k].norm() + sol.p22[k].norm(),
                0.0
            );
        }
        assert_eq!(riccati_residual(&sol, &spec).unwrap(), 0.0);
    }

    #[test]
    fn terminal_values_and_assembly() {
        let spec = fixture_s1();
        let sol = solve_full(&spec, 0.01, &ToleranceConfig::default(), None).unwrap();
        assert_eq!(*sol.grid.last().unwrap(), 2.0);
        assert_eq!(sol.grid[0], 0.0);
        assert_eq!(assemble_P(&sol, 2.0).unwrap().norm(), 0.0);
        let b = sol.eval(0.7).unwrap();
        let p = assemble_P(&sol, 0.7).unwrap();
        assert_eq!(p[(0, 1)], 0.01 * b.p12[(0, 0)]);
        assert_eq!(p[(0, 1)], p[(1, 0)]);
        assert!(assemble_P(&sol, 2.5).is_err());
        assert!(sol.grid.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn unit_eps_assembly_is_raw_blocks() {
        let spec = fixture_s1();
        let sol = solve_full(&spec, 1.0, &ToleranceConfig::default(), None).unwrap();
        let b = sol.eval(0.0).unwrap();
        let p = assemble_P(&sol, 0.0).unwrap();
        assert_eq!(p[(0, 0)], b.p11[(0, 0)]);
        assert_eq!(p[(0, 1)], b.p12[(0, 0)]);
        assert_eq!(p[(1, 1)], b.p22[(0, 0)]);
    }

    #[test]
    fn residuals_small() {
        let spec = fixture_s1();
        let tol = ToleranceConfig::default();
        let sol = solve_full(&spec, 1.0, &tol, None).unwrap();
        assert!(riccati_residual(&sol, &spec).unwrap() < 1e-5);
        let sol = solve_full(&spec, 1e-2, &tol, None).unwrap();
        assert!(riccati_residual(&sol, &spec).unwrap() < 1e-4);
    }

    #[test]
    fn fast_block_approaches_are_root() {
        let spec = fixture_s1();
        let sol = solve_full(&spec, 1e-3, &ToleranceConfig::default(), None).unwrap();
        let p22 = sol.eval(0.0).unwrap().p22[(0, 0)];
        assert!((p22 - (2f64.sqrt() - 1.0)).abs() < 5e-3);
    }

    #[test]
    fn output_grid_is_respected() {
        let spec = fixture_s1();
        let grid = [1.0, 0.0, 0.5, 2.0];
        let sol = solve_full(&spec, 0.5, &ToleranceConfig::default(), Some(&grid)).unwrap();
        assert_eq!(sol.grid, vec![0.0, 0.5, 1.0, 2.0]);
        assert!(solve_full(&spec, 0.5, &ToleranceConfig::default(), Some(&[3.0])).is_err());
    }

    #[test]
    fn deterministic() {
        let spec = fixture_s1();
        let tol = ToleranceConfig::default();
        let a = solve_full(&spec, 0.05, &tol, None).unwrap();
        let b = solve_full(&spec, 0.05, &tol, None).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
    }

    #[test]
    fn csv_header() {
        let sol = solve_full(&fixture_s1(), 1.0, &ToleranceConfig::default(), None).unwrap();
        let csv = sol.to_csv();
        assert!(csv.starts_with("t,P11_11,P12_11,P22_11\n"));
        assert_eq!(csv.lines().count(), sol.grid.len() + 1);
    }
}
