//! Adaptive Dormand–Prince 5(4) integrator with PI step-size control and
//! cubic Hermite dense output.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative and absolute tolerances for the adaptive integrators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToleranceConfig {
    pub rel: f64,
    pub abs: f64,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        Self {
            rel: 1e-8,
            abs: 1e-10,
        }
    }
}

impl ToleranceConfig {
    pub fn new(rel: f64, abs: f64) -> Result<Self> {
        let tol = Self { rel, abs };
        tol.validate()?;
        Ok(tol)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel > 0.0 && self.rel.is_finite() && self.abs > 0.0 && self.abs.is_finite()) {
            return Err(Error::InvalidTolerance(format!(
                "rel = {}, abs = {} must both be positive and finite",
                self.rel, self.abs
            )));
        }
        Ok(())
    }
}

/// Limits on a single integration run.
#[derive(Debug, Clone, Copy)]
pub struct StepControl {
    pub h_max: f64,
    /// Absolute floor on the step size; falling below it is a failure.
    pub min_step: f64,
    pub max_steps: usize,
    /// Euclidean norm of the state above which the solution counts as escaping.
    pub blowup: f64,
}

impl StepControl {
    pub fn for_span(span: f64) -> Self {
        Self {
            h_max: span.abs(),
            min_step: 1e-14 * span.abs(),
            max_steps: 5_000_000,
            blowup: 1e12,
        }
    }
}

/// Verdict of a post-step hook on a candidate state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepCheck {
    Unchanged,
    /// The hook projected the state; derivatives are re-evaluated.
    Modified,
    Reject,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IntegrationFailure {
    BlowUp { s: f64 },
    StepLimit { s: f64 },
}

/// Accepted steps of an integration: nodes, states and derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub s: Vec<f64>,
    pub y: Vec<Vec<f64>>,
    pub dy: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.y.first().map_or(0, Vec::len)
    }

    /// Appends `other`, whose first node must coincide with this trajectory's last node.
    pub fn append(&mut self, mut other: Trajectory) {
        if !self.s.is_empty() && !other.s.is_empty() {
            other.s.remove(0);
            other.y.remove(0);
            other.dy.remove(0);
        }
        self.s.extend(other.s);
        self.y.extend(other.y);
        self.dy.extend(other.dy);
    }

    /// Index `i` of the interval `[s_i, s_{i+1}]` that contains `s` (clamped).
    fn interval(&self, s: f64) -> usize {
        let n = self.s.len();
        if n < 2 {
            return 0;
        }
        let increasing = self.s[n - 1] >= self.s[0];
        let idx = if increasing {
            self.s.partition_point(|&x| x <= s)
        } else {
            self.s.partition_point(|&x| x >= s)
        };
        idx.saturating_sub(1).min(n - 2)
    }

    fn hermite_weights(&self, i: usize, s: f64) -> (f64, [f64; 4], [f64; 4]) {
        let h = self.s[i + 1] - self.s[i];
        let th = (s - self.s[i]) / h;
        let th2 = th * th;
        let th3 = th2 * th;
        let w = [
            2.0 * th3 - 3.0 * th2 + 1.0,
            th3 - 2.0 * th2 + th,
            -2.0 * th3 + 3.0 * th2,
            th3 - th2,
        ];
        let dw = [
            (6.0 * th2 - 6.0 * th) / h,
            3.0 * th2 - 4.0 * th + 1.0,
            (-6.0 * th2 + 6.0 * th) / h,
            3.0 * th2 - 2.0 * th,
        ];
        (h, w, dw)
    }

    /// Cubic Hermite interpolant at `s`. Node values are returned verbatim.
    pub fn eval(&self, s: f64) -> Vec<f64> {
        if self.s.len() == 1 {
            return self.y[0].clone();
        }
        let i = self.interval(s);
        if s == self.s[i] {
            return self.y[i].clone();
        }
        if s == self.s[i + 1] {
            return self.y[i + 1].clone();
        }
        let (h, w, _) = self.hermite_weights(i, s);
        let (y0, y1, d0, d1) = (&self.y[i], &self.y[i + 1], &self.dy[i], &self.dy[i + 1]);
        (0..y0.len())
            .map(|k| w[0] * y0[k] + w[1] * h * d0[k] + w[2] * y1[k] + w[3] * h * d1[k])
            .collect()
    }

    /// Derivative of the Hermite interpolant at `s`.
    pub fn eval_deriv(&self, s: f64) -> Vec<f64> {
        if self.s.len() == 1 {
            return self.dy[0].clone();
        }
        let i = self.interval(s);
        if s == self.s[i] {
            return self.dy[i].clone();
        }
        if s == self.s[i + 1] {
            return self.dy[i + 1].clone();
        }
        let (_, _, dw) = self.hermite_weights(i, s);
        let (y0, y1, d0, d1) = (&self.y[i], &self.y[i + 1], &self.dy[i], &self.dy[i + 1]);
        (0..y0.len())
            .map(|k| dw[0] * y0[k] + dw[1] * d0[k] + dw[2] * y1[k] + dw[3] * d1[k])
            .collect()
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const PI_BETA: f64 = 0.04;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

fn weighted_rms(v: &[f64], y: &[f64], y_new: &[f64], tol: &ToleranceConfig) -> f64 {
    let n = v.len().max(1) as f64;
    let sum: f64 = v
        .iter()
        .zip(y.iter().zip(y_new))
        .map(|(e, (a, b))| {
            let sc = tol.abs + tol.rel * a.abs().max(b.abs());
            (e / sc) * (e / sc)
        })
        .sum();
    (sum / n).sqrt()
}

fn euclid(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Integrates `dy/ds = rhs(s, y)` from `s0` to `s_end > s0`.
///
/// `post_step` runs on every candidate step result; `StepCheck::Reject`
/// halves the step size.
pub fn integrate<F, G>(
    mut rhs: F,
    mut post_step: G,
    s0: f64,
    s_end: f64,
    y0: Vec<f64>,
    tol: &ToleranceConfig,
    ctl: &StepControl,
) -> std::result::Result<Trajectory, IntegrationFailure>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    G: FnMut(&mut [f64]) -> StepCheck,
{
    let n = y0.len();
    let mut traj = Trajectory {
        s: vec![s0],
        y: vec![y0.clone()],
        dy: Vec::new(),
    };
    let mut k1 = vec![0.0; n];
    rhs(s0, &y0, &mut k1);
    traj.dy.push(k1.clone());
    if s_end <= s0 {
        return Ok(traj);
    }

    let (mut k2, mut k3, mut k4, mut k5, mut k6, mut k7) = (
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
    );
    let mut ytmp = vec![0.0; n];
    let mut ynew = vec![0.0; n];
    let mut err = vec![0.0; n];
    let mut y = y0;
    let mut s = s0;

    // Initial step guess.
    let mut h = {
        let sc: Vec<f64> = y.iter().map(|v| tol.abs + tol.rel * v.abs()).collect();
        let d0 = (y.iter().zip(&sc).map(|(v, c)| (v / c).powi(2)).sum::<f64>() / n as f64).sqrt();
        let d1 = (k1
            .iter()
            .zip(&sc)
            .map(|(v, c)| (v / c).powi(2))
            .sum::<f64>()
            / n as f64)
            .sqrt();
        let h0 = if d0 < 1e-5 || d1 < 1e-5 {
            1e-6
        } else {
            0.01 * d0 / d1
        };
        let h0 = h0.min(ctl.h_max).min(s_end - s0);
        for i in 0..n {
            ytmp[i] = y[i] + h0 * k1[i];
        }
        rhs(s + h0, &ytmp, &mut k2);
        let d2 = (k2
            .iter()
            .zip(&k1)
            .zip(&sc)
            .map(|((a, b), c)| ((a - b) / c).powi(2))
            .sum::<f64>()
            / n as f64)
            .sqrt()
            / h0;
        let dmax = d1.max(d2);
        let h1 = if dmax <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / dmax).powf(0.2)
        };
        (100.0 * h0).min(h1).min(ctl.h_max)
    };

    let mut fac_old: f64 = 1e-4;
    let mut steps = 0usize;
    let mut last_rejected = false;

    loop {
        if steps >= ctl.max_steps {
            return Err(IntegrationFailure::StepLimit { s });
        }
        let mut last = false;
        if s + h >= s_end || s + 1.01 * h >= s_end {
            h = s_end - s;
            last = true;
        }
        if h < ctl.min_step && !last {
            return Err(IntegrationFailure::StepLimit { s });
        }
        steps += 1;

        for i in 0..n {
            ytmp[i] = y[i] + h * A21 * k1[i];
        }
        rhs(s + C2 * h, &ytmp, &mut k2);
        for i in 0..n {
            ytmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        rhs(s + C3 * h, &ytmp, &mut k3);
        for i in 0..n {
            ytmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        rhs(s + C4 * h, &ytmp, &mut k4);
        for i in 0..n {
            ytmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        rhs(s + C5 * h, &ytmp, &mut k5);
        for i in 0..n {
            ytmp[i] =
                y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        let s_new = if last { s_end } else { s + h };
        rhs(s_new, &ytmp, &mut k6);
        for i in 0..n {
            ynew[i] =
                y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }

        if !ynew.iter().all(|v| v.is_finite()) || euclid(&ynew) > ctl.blowup {
            if h <= ctl.min_step * 2.0 || euclid(&y) > 1e-3 * ctl.blowup {
                return Err(IntegrationFailure::BlowUp { s });
            }
            h *= 0.25;
            last_rejected = true;
            continue;
        }

        rhs(s_new, &ynew, &mut k7);
        for i in 0..n {
            err[i] =
                h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        }
        let e = weighted_rms(&err, &y, &ynew, tol);
        let fac11 = e.powf(0.2 - PI_BETA * 0.75);

        if e <= 1.0 {
            let check = post_step(&mut ynew);
            if check == StepCheck::Reject {
                h *= 0.5;
                last_rejected = true;
                continue;
            }
            let mut fac = fac11 / fac_old.powf(PI_BETA);
            fac_old = e.max(1e-4);
            fac = (fac / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
            let mut h_next = h / fac;
            if last_rejected {
                h_next = h_next.min(h);
            }
            last_rejected = false;

            if check == StepCheck::Modified {
                rhs(s_new, &ynew, &mut k7);
            }
            std::mem::swap(&mut y, &mut ynew);
            std::mem::swap(&mut k1, &mut k7);
            s = s_new;
            traj.s.push(s);
            traj.y.push(y.clone());
            traj.dy.push(k1.clone());
            if last {
                return Ok(traj);
            }
            h = h_next.min(ctl.h_max);
        } else {
            h /= (fac11 / SAFETY).min(1.0 / FAC_MIN);
            last_rejected = true;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_matches_closed_form() {
        let tol = ToleranceConfig::default();
        let ctl = StepControl::for_span(5.0);
        let traj = integrate(
            |_, y, dy| dy[0] = -2.0 * y[0],
            |_| StepCheck::Unchanged,
            0.0,
            5.0,
            vec![1.0],
            &tol,
            &ctl,
        )
        .unwrap();
        assert_eq!(*traj.s.last().unwrap(), 5.0);
        for (s, y) in traj.s.iter().zip(&traj.y) {
            assert!((y[0] - (-2.0 * s).exp()).abs() < 1e-8);
        }
        for k in 0..50 {
            let s = 0.1 * k as f64 + 0.013;
            assert!((traj.eval(s)[0] - (-2.0 * s).exp()).abs() < 1e-6);
            assert!((traj.eval_deriv(s)[0] + 2.0 * (-2.0 * s).exp()).abs() < 1e-4);
        }
    }

    #[test]
    fn finite_escape_is_reported() {
        // y' = y^2, y(0) = 1 escapes at s = 1.
        let tol = ToleranceConfig::default();
        let ctl = StepControl::for_span(2.0);
        let res = integrate(
            |_, y, dy| dy[0] = y[0] * y[0],
            |_| StepCheck::Unchanged,
            0.0,
            2.0,
            vec![1.0],
            &tol,
            &ctl,
        );
        match res {
            Err(IntegrationFailure::BlowUp { s }) => assert!((s - 1.0).abs() < 1e-3, "s = {s}"),
            other => panic!("expected blow-up, got {other:?}"),
        }
    }

    #[test]
    fn bad_tolerance_rejected() {
        assert!(ToleranceConfig::new(0.0, 1e-10).is_err());
        assert!(ToleranceConfig::new(1e-8, f64::NAN).is_err());
    }
}
