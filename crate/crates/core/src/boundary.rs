//! Fast boundary layer near the terminal time, in stretched time `tau = (T − t)/eps`.

use crate::error::{Assumption, Error, OdeSystem, Result};
use crate::linalg::{spectral_norm, sym_max_eigenvalue, symmetrize_in_place, Mat};
use crate::model::{delta_blocks, Dims, GameSpec};
use crate::ode::{ToleranceConfig, Trajectory};
use crate::output::{csv_text, matrix_columns, row_major};
use crate::reduced::{p12_bar, ReducedSolution};
use crate::riccati::integrate_layered;

/// Smallest stability margin accepted as positive.
pub const GAMMA_FLOOR: f64 = 1e-12;

/// Upper end of the `delta` search, as a fraction of `gamma`.
pub const DELTA_CEILING: f64 = 0.99;

/// Multiple of the integration tolerance by which a trajectory may exceed an envelope.
pub const ENVELOPE_SLACK: f64 = 10.0;

/// `h(P11) = −(A21ᵀP22bar + P11·A12 + P11·Δ·P22bar)(A22 + Δ2·P22bar)⁻¹`.
pub fn h_map(p11: &Mat, p22bar: &Mat, spec: &GameSpec) -> Mat {
    p12_bar(p11, p22bar, spec)
}

/// `Φ(P11) = A21ᵀ + P11·Δ + h(P11)·Δ2`.
pub fn phi_map(p11: &Mat, spec: &GameSpec, p22bar: &Mat) -> Mat {
    let d = delta_blocks(spec);
    spec.a21.transpose() + p11 * &d.delta + h_map(p11, p22bar, spec) * &d.delta2
}

fn closed_loop(spec: &GameSpec, p22bar: &Mat) -> Mat {
    &spec.a22 + delta_blocks(spec).delta2 * p22bar
}

/// `gamma = −λ_max(sym S)`; fails unless the symmetric part of `S` is negative definite.
pub fn gamma_margin(spec: &GameSpec, p22bar: &Mat) -> Result<f64> {
    let gamma = -sym_max_eigenvalue(&closed_loop(spec, p22bar));
    if gamma <= GAMMA_FLOOR {
        return Err(Error::AssumptionFailed {
            assumption: Assumption::NegativeDefiniteSymPart,
            detail: format!("gamma = {gamma} is not positive"),
        });
    }
    Ok(gamma)
}

/// Radius `q2 = (gamma + delta)/‖Δ2‖₂` of the certified ball and whether
/// `P22bar` lies strictly inside it.
pub fn attraction_check(spec: &GameSpec, p22bar: &Mat, delta: f64) -> Result<(bool, f64)> {
    let gamma = gamma_margin(spec, p22bar)?;
    attraction_with_gamma(spec, p22bar, gamma, delta)
}

fn attraction_with_gamma(
    spec: &GameSpec,
    p22bar: &Mat,
    gamma: f64,
    delta: f64,
) -> Result<(bool, f64)> {
    if !(delta > 0.0 && delta < gamma) {
        return Err(Error::DeltaOutOfRange { delta, gamma });
    }
    let op = spectral_norm(&delta_blocks(spec).delta2);
    let q2 = if op == 0.0 {
        f64::INFINITY
    } else {
        (gamma + delta) / op
    };
    Ok((p22bar.norm() < q2, q2))
}

/// `delta` certifying the attraction ball: `requested` if given, else
/// `gamma/2`, raised by bisection toward `0.99·gamma` when needed.
pub fn select_delta(spec: &GameSpec, p22bar: &Mat, requested: Option<f64>) -> Result<(f64, f64)> {
    let gamma = gamma_margin(spec, p22bar)?;
    let fail = |delta: f64, q2: f64| Error::AssumptionFailed {
        assumption: Assumption::AttractionBall,
        detail: format!(
            "|P22bar| = {} is not below q2 = {q2} at delta = {delta}",
            p22bar.norm()
        ),
    };
    if let Some(delta) = requested {
        let (ok, q2) = attraction_with_gamma(spec, p22bar, gamma, delta)?;
        return if ok {
            Ok((delta, q2))
        } else {
            Err(fail(delta, q2))
        };
    }
    let mut lo = 0.5 * gamma;
    let (ok, q2) = attraction_with_gamma(spec, p22bar, gamma, lo)?;
    if ok {
        return Ok((lo, q2));
    }
    let mut hi = DELTA_CEILING * gamma;
    let (ok, q2) = attraction_with_gamma(spec, p22bar, gamma, hi)?;
    if !ok {
        return Err(fail(hi, q2));
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if attraction_with_gamma(spec, p22bar, gamma, mid)?.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let (_, q2) = attraction_with_gamma(spec, p22bar, gamma, hi)?;
    Ok((hi, q2))
}

/// `max(T/eps, 60/(gamma − delta))`.
pub fn default_tau_max(eps: f64, horizon: f64, gamma: f64, delta: f64) -> f64 {
    (horizon / eps).max(60.0 / (gamma - delta))
}

/// Layer trajectory `(P12hat, P22hat)` with its certified decay constants.
#[derive(Debug, Clone)]
pub struct BoundaryLayerSolution {
    /// Increasing stretched times from `0` to `tau_max`.
    pub tau_grid: Vec<f64>,
    pub p12hat: Vec<Mat>,
    pub p22hat: Vec<Mat>,
    pub gamma: f64,
    pub delta: f64,
    pub q2: f64,
    pub k1: f64,
    pub k2: f64,
    /// Smallest admissible radius for the `P12hat` ball built from `|Φ(0)|`.
    pub q1: f64,
    /// `sup_t |Φ(P11bar(t))|` along the reduced trajectory.
    pub c_p: f64,
    pub phi0_norm: f64,
    pub tau_max: f64,
    dims: Dims,
    traj: Trajectory,
}

impl BoundaryLayerSolution {
    /// Envelope `e^{−(γ−δ)τ}|P22hat(0)|`.
    pub fn envelope22(&self, tau: f64) -> f64 {
        (-(self.gamma - self.delta) * tau).exp() * self.p22hat[0].norm()
    }

    /// Envelope `k1 e^{−γτ}|P12hat(0)| + k2 e^{−(γ−δ)τ}`.
    pub fn envelope12(&self, tau: f64) -> f64 {
        self.k1 * (-self.gamma * tau).exp() * self.p12hat[0].norm()
            + self.k2 * (-(self.gamma - self.delta) * tau).exp()
    }

    /// `(P12hat, P22hat)` at `tau`, clamped to `[0, tau_max]`.
    pub fn eval(&self, tau: f64) -> (Mat, Mat) {
        let tau = tau.clamp(0.0, self.tau_max);
        let y = self.traj.eval(tau);
        let split = self.dims.n1 * self.dims.n2;
        let p12 = Mat::from_row_slice(self.dims.n1, self.dims.n2, &y[..split]);
        let mut p22 = Mat::from_row_slice(self.dims.n2, self.dims.n2, &y[split..]);
        symmetrize_in_place(&mut p22);
        (p12, p22)
    }

    /// Number of grid points where either envelope is exceeded beyond `slack`.
    pub fn envelope_violations(&self, slack: f64) -> usize {
        self.tau_grid
            .iter()
            .enumerate()
            .filter(|&(k, &tau)| {
                self.p22hat[k].norm() > self.envelope22(tau) + slack
                    || self.p12hat[k].norm() > self.envelope12(tau) + slack
            })
            .count()
    }

    /// Whether `|P22hat|` never increases by more than `slack` between grid points.
    pub fn p22_monotone(&self, slack: f64) -> bool {
        self.p22hat
            .windows(2)
            .all(|w| w[1].norm() <= w[0].norm() + slack)
    }

    /// CSV with columns `tau`, `P12hat_ij`, `P22hat_ij`, `env12`, `env22`.
    pub fn to_csv(&self) -> String {
        let d = self.dims;
        let mut header = vec!["tau".to_string()];
        header.extend(matrix_columns("P12hat", d.n1, d.n2));
        header.extend(matrix_columns("P22hat", d.n2, d.n2));
        header.push("env12".into());
        header.push("env22".into());
        let rows = (0..self.tau_grid.len()).map(|k| {
            let tau = self.tau_grid[k];
            std::iter::once(tau)
                .chain(row_major(&self.p12hat[k]))
                .chain(row_major(&self.p22hat[k]))
                .chain([self.envelope12(tau), self.envelope22(tau)])
                .collect::<Vec<_>>()
        });
        csv_text(&header, rows)
    }
}

/// Integrates the layer forward from `(−h(0), −P22bar)` to `tau_max`.
///
/// `delta = None` selects it with [`select_delta`].
pub fn solve_boundary_layer(
    spec: &GameSpec,
    red: &ReducedSolution,
    delta: Option<f64>,
    tau_max: f64,
    tol: &ToleranceConfig,
) -> Result<BoundaryLayerSolution> {
    tol.validate()?;
    if !(tau_max > 0.0 && tau_max.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "tau_max = {tau_max} must be positive"
        )));
    }
    let d = spec.dims;
    let p22bar = &red.p22bar;
    let gamma = gamma_margin(spec, p22bar)?;
    let (delta, q2) = select_delta(spec, p22bar, delta)?;
    let deltas = delta_blocks(spec);
    let s = closed_loop(spec, p22bar);
    let st = s.transpose();
    let zero = Mat::zeros(d.n1, d.n1);
    let h0 = h_map(&zero, p22bar, spec);
    let phi0 = phi_map(&zero, spec, p22bar);
    let delta2_norm = deltas.delta2.norm();
    let k1 = (delta2_norm * q2 / (gamma - delta)).exp();
    let k2 = phi0.norm() * q2 / delta * k1;
    let q1 = k1 * (h0.norm() + phi0.norm() * q2 / delta) + h0.norm();
    let c_p = red
        .dre
        .values
        .iter()
        .map(|p| phi_map(p, spec, p22bar).norm())
        .fold(0.0, f64::max);

    let split = d.n1 * d.n2;
    let rhs = |_tau: f64, y: &[f64], dy: &mut [f64]| {
        let p12 = Mat::from_row_slice(d.n1, d.n2, &y[..split]);
        let p22 = Mat::from_row_slice(d.n2, d.n2, &y[split..]);
        let d2p22 = &deltas.delta2 * &p22;
        let dp12 = &p12 * &s + &phi0 * &p22 + &p12 * &d2p22;
        let dp22 = &st * &p22 + &p22 * &s + &p22 * &d2p22;
        for (k, v) in row_major(&dp12).enumerate() {
            dy[k] = v;
        }
        for (k, v) in row_major(&dp22).enumerate() {
            dy[split + k] = v;
        }
    };
    let y0: Vec<f64> = row_major(&(-&h0)).chain(row_major(&(-p22bar))).collect();
    // Past the transient the state sits below the absolute tolerance and the
    // error control alone would let the step grow to the stability edge of
    // the explicit scheme, where the decay stalls. Cap it by the Lipschitz
    // bound of the layer field on the certified ball.
    let lipschitz = 2.0 * s.norm() + delta2_norm * q2;
    let h_cap = if lipschitz > 0.0 {
        1.0 / lipschitz
    } else {
        tau_max
    };
    let layer = Some((tau_max, h_cap));
    let traj = integrate_layered(rhs, y0, tau_max, layer, &[(split, d.n2)], tol).map_err(|f| {
        match crate::riccati::map_failure(f, OdeSystem::BoundaryLayer, 0.0) {
            Error::BlowUp { system, t_escape } => Error::BlowUp {
                system,
                t_escape: -t_escape,
            },
            Error::StepLimitExceeded { system, t } => Error::StepLimitExceeded { system, t: -t },
            e => e,
        }
    })?;

    let mut p12hat = Vec::with_capacity(traj.len());
    let mut p22hat = Vec::with_capacity(traj.len());
    for y in &traj.y {
        p12hat.push(Mat::from_row_slice(d.n1, d.n2, &y[..split]));
        p22hat.push(Mat::from_row_slice(d.n2, d.n2, &y[split..]));
    }
    let sol = BoundaryLayerSolution {
        tau_grid: traj.s.clone(),
        p12hat,
        p22hat,
        gamma,
        delta,
        q2,
        k1,
        k2,
        q1,
        c_p,
        phi0_norm: phi0.norm(),
        tau_max,
        dims: d,
        traj,
    };
    for (k, &tau) in sol.tau_grid.iter().enumerate() {
        let e22 = sol.envelope22(tau);
        let e12 = sol.envelope12(tau);
        let slack22 = ENVELOPE_SLACK * (tol.abs + tol.rel * e22);
        let slack12 = ENVELOPE_SLACK * (tol.abs + tol.rel * e12);
        if sol.p22hat[k].norm() > e22 + slack22 || sol.p12hat[k].norm() > e12 + slack12 {
            return Err(Error::EnvelopeViolated { tau });
        }
    }
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixture_s1;
    use crate::reduced::solve_reduced;
    use crate::riccati::full_rhs;
    use approx::assert_relative_eq;

    fn m(x: f64) -> Mat {
        Mat::from_element(1, 1, x)
    }

    #[test]
    fn s1_maps() {
        let spec = fixture_s1();
        let sq2 = 2f64.sqrt();
        let pb = m(sq2 - 1.0);
        let h0 = h_map(&m(0.0), &pb, &spec)[(0, 0)];
        assert_relative_eq!(h0, (sq2 - 1.0) / (2.0 * sq2), epsilon = 1e-15);
        let phi0 = phi_map(&m(0.0), &spec, &pb)[(0, 0)];
        assert_relative_eq!(phi0, 0.5 - h0, epsilon = 1e-15);
        assert_relative_eq!(gamma_margin(&spec, &pb).unwrap(), sq2, epsilon = 1e-15);
    }

    #[test]
    fn phi_is_affine() {
        let spec = fixture_s1();
        let pb = m(0.4);
        let phi0 = phi_map(&m(0.0), &spec, &pb);
        let lin = |x: f64| phi_map(&m(x), &spec, &pb) - &phi0;
        let sum = lin(0.3) + lin(-1.7);
        assert_relative_eq!(sum[(0, 0)], lin(-1.4)[(0, 0)], epsilon = 1e-14);
    }

    #[test]
    fn gamma_of_non_normal_fails() {
        let mut spec = fixture_s1();
        spec.dims.n2 = 2;
        spec.a22 = Mat::from_row_slice(2, 2, &[-1.0, 10.0, 0.0, -1.0]);
        spec.b21 = Mat::zeros(2, 1);
        spec.b22 = Mat::zeros(2, 1);
        let p = Mat::zeros(2, 2);
        let err = gamma_margin(&spec, &p).unwrap_err();
        assert_eq!(err.assumption(), Some(Assumption::NegativeDefiniteSymPart));
        spec.a22 = Mat::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -3.0]);
        assert_relative_eq!(gamma_margin(&spec, &p).unwrap(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn s1_attraction() {
        let spec = fixture_s1();
        let sq2 = 2f64.sqrt();
        let pb = m(sq2 - 1.0);
        let (ok, q2) = attraction_check(&spec, &pb, sq2 / 2.0).unwrap();
        assert!(ok);
        assert_relative_eq!(q2, 1.5 * sq2, epsilon = 1e-14);
        assert!(attraction_check(&spec, &pb, sq2).is_err());
        assert!(attraction_check(&spec, &m(0.0), 0.1).unwrap().0);
    }

    #[test]
    fn tau_max_rule() {
        assert_relative_eq!(
            default_tau_max(0.1, 2.0, 1.0, 0.3),
            60.0 / 0.7,
            epsilon = 1e-12
        );
        assert_eq!(default_tau_max(1e-4, 2.0, 1.4, 0.7), 20000.0);
    }

    #[test]
    fn s1_layer_envelopes_and_bernoulli_oracle() {
        let spec = fixture_s1();
        let tol = ToleranceConfig::default();
        let red = solve_reduced(&spec, &tol).unwrap();
        let gamma = red.gamma;
        let bl = solve_boundary_layer(&spec, &red, Some(gamma / 2.0), 20.0, &tol).unwrap();
        assert_eq!(bl.envelope_violations(0.0), 0);
        assert!(bl.p22_monotone(tol.abs));
        assert!(bl.p22hat.last().unwrap().norm() <= bl.envelope22(20.0));
        let (a, b, y0) = (2.0 * red.s[(0, 0)], -1.0, -red.p22bar[(0, 0)]);
        for (k, &tau) in bl.tau_grid.iter().enumerate() {
            let e = (a * tau).exp();
            let exact = a * y0 * e / (a + b * y0 * (1.0 - e));
            assert!((bl.p22hat[k][(0, 0)] - exact).abs() < 1e-8, "tau {tau}");
        }
    }

    #[test]
    fn long_layer_keeps_decaying_below_tolerance() {
        let spec = fixture_s1();
        let tol = ToleranceConfig::default();
        let red = solve_reduced(&spec, &tol).unwrap();
        let bl = solve_boundary_layer(&spec, &red, Some(red.gamma / 2.0), 2000.0, &tol).unwrap();
        assert_eq!(bl.envelope_violations(0.0), 0);
        let k = bl.tau_grid.partition_point(|&t| t < 50.0);
        assert!(bl.p22hat[k].norm() < 1e-40 && bl.p12hat[k].norm() < 1e-20);
    }

    #[test]
    fn zero_cost_layer_is_trivial() {
        let spec = fixture_s1().zero_cost();
        let tol = ToleranceConfig::default();
        let red = solve_reduced(&spec, &tol).unwrap();
        let bl = solve_boundary_layer(&spec, &red, None, 10.0, &tol).unwrap();
        assert!(bl.p12hat.iter().chain(&bl.p22hat).all(|p| p.norm() == 0.0));
    }

    #[test]
    fn equilibrium_and_are_consistency() {
        let spec = fixture_s1();
        let red = solve_reduced(&spec, &ToleranceConfig::default()).unwrap();
        let (_, _, g2) = full_rhs(&m(0.0), &m(0.3), &red.p22bar, 0.0, &spec);
        assert!(g2.norm() < 1e-10);
    }
}
