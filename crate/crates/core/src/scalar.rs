//! Closed forms for the fully scalar game, used as independent oracles.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{delta_blocks, GameSpec};

/// Scalar reduced-DRE coefficients `dP/dt + 2·atilde·P + m·P² + n = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalarCoefficients {
    pub atilde: f64,
    pub m: f64,
    pub n: f64,
}

impl ScalarCoefficients {
    /// Coefficients written over the common denominator `A22² − Δ2·Q2`.
    pub fn from_spec(spec: &GameSpec) -> Result<Self> {
        let s = Scalars::of(spec)?;
        let den = s.a22 * s.a22 - s.d2 * s.q2;
        if den == 0.0 {
            return Err(Error::ConditionFailed("A22² − Δ2·Q2 vanishes".to_string()));
        }
        Ok(Self {
            atilde: s.a11 + (s.d * s.q2 * s.a21 - s.a12 * s.a21 * s.a22) / den,
            m: s.d1 + (s.d2 * s.a12 * s.a12 - 2.0 * s.d * s.a12 * s.a22 + s.d * s.d * s.q2) / den,
            n: s.q1 + s.q2 * s.a21 * s.a21 / den,
        })
    }

    /// `atilde² − m·n`.
    pub fn discriminant(&self) -> f64 {
        self.atilde * self.atilde - self.m * self.n
    }

    /// Time-to-go at which the solution started from zero escapes, if ever.
    pub fn escape_time_to_go(&self) -> Option<f64> {
        if self.n == 0.0 {
            return None;
        }
        let a = self.atilde;
        let disc = self.discriminant();
        if disc > 0.0 {
            let r = disc.sqrt();
            (a > r).then(|| ((a + r) / (a - r)).ln() / (2.0 * r))
        } else if disc == 0.0 {
            (a > 0.0).then(|| 1.0 / a)
        } else {
            let w = (-disc).sqrt();
            Some(w.atan2(a) / w)
        }
    }
}

struct Scalars {
    a11: f64,
    a12: f64,
    a21: f64,
    a22: f64,
    d1: f64,
    d: f64,
    d2: f64,
    q1: f64,
    q2: f64,
}

impl Scalars {
    fn of(spec: &GameSpec) -> Result<Self> {
        if !spec.dims.is_scalar() {
            return Err(Error::NotScalar);
        }
        let db = delta_blocks(spec);
        Ok(Self {
            a11: spec.a11[(0, 0)],
            a12: spec.a12[(0, 0)],
            a21: spec.a21[(0, 0)],
            a22: spec.a22[(0, 0)],
            d1: db.delta1[(0, 0)],
            d: db.delta[(0, 0)],
            d2: db.delta2[(0, 0)],
            q1: spec.q1[(0, 0)],
            q2: spec.q2[(0, 0)],
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalarConditions {
    /// `atilde² − m·n ≥ 0`.
    pub cond_dre_a: bool,
    /// `atilde − sqrt(|atilde² − m·n|) ≤ 0`.
    pub cond_dre_b: bool,
    /// `Δ2·Q2 < 0`.
    pub cond_are: bool,
    /// Open interval `(lo, hi)` bounding the exact boundary-layer basin;
    /// one end is infinite. `None` when `cond_are` fails.
    pub region_lo_hi: Option<(f64, f64)>,
    /// Time-to-go at which the reduced DRE escapes from zero, if it does.
    pub dre_escape: Option<f64>,
}

impl ScalarConditions {
    pub fn dre_condition(&self) -> bool {
        self.cond_dre_a || self.cond_dre_b
    }
}

pub fn scalar_conditions(spec: &GameSpec) -> Result<ScalarConditions> {
    let s = Scalars::of(spec)?;
    let c = ScalarCoefficients::from_spec(spec).ok();
    let cond_are = s.d2 * s.q2 < 0.0;
    let region_lo_hi = cond_are.then(|| {
        let stab_s = -(s.a22 * s.a22 - s.d2 * s.q2).sqrt();
        let edge = -2.0 * stab_s / s.d2;
        if s.d2 < 0.0 {
            (edge, f64::INFINITY)
        } else {
            (f64::NEG_INFINITY, edge)
        }
    });
    Ok(ScalarConditions {
        cond_dre_a: c.is_some_and(|c| c.discriminant() >= 0.0),
        cond_dre_b: c.is_some_and(|c| c.atilde - c.discriminant().abs().sqrt() <= 0.0),
        cond_are,
        region_lo_hi,
        dre_escape: c.and_then(|c| c.escape_time_to_go()),
    })
}

/// Stabilising and anti-stabilising roots of `Δ2·P² + 2·A22·P + Q2 = 0`.
pub fn scalar_are_roots(spec: &GameSpec) -> Result<(f64, f64)> {
    let s = Scalars::of(spec)?;
    // Q2 = 0 with A22 < 0 keeps a stabilising root at zero.
    let degenerate_ok = s.q2 == 0.0 && s.d2 != 0.0 && s.a22 < 0.0;
    if s.d2 * s.q2 >= 0.0 && !degenerate_ok {
        return Err(Error::ConditionFailed(format!(
            "Δ2·Q2 = {} is not negative",
            s.d2 * s.q2
        )));
    }
    let root = (s.a22 * s.a22 - s.d2 * s.q2).sqrt();
    Ok(((-s.a22 - root) / s.d2, (-s.a22 + root) / s.d2))
}

/// Closed-form value at `t` of the scalar reduced DRE with zero terminal data.
pub fn scalar_dre_oracle(spec: &GameSpec, coeffs: &ScalarCoefficients, t: f64) -> Result<f64> {
    if !spec.dims.is_scalar() {
        return Err(Error::NotScalar);
    }
    if !(0.0..=spec.horizon).contains(&t) {
        return Err(Error::TimeOutOfRange {
            t,
            horizon: spec.horizon,
        });
    }
    let ScalarCoefficients { atilde: a, n, .. } = *coeffs;
    let disc = coeffs.discriminant();
    let dre_ok = disc >= 0.0 || a - disc.abs().sqrt() <= 0.0;
    if !dre_ok {
        return Err(Error::ConditionFailed(
            "neither scalar DRE solvability condition holds".to_string(),
        ));
    }
    let s = spec.horizon - t;
    if let Some(escape) = coeffs.escape_time_to_go() {
        if escape <= s {
            return Err(Error::ConditionFailed(format!(
                "closed form escapes at time-to-go {escape}"
            )));
        }
    }
    if n == 0.0 || s == 0.0 {
        return Ok(0.0);
    }
    let value = if disc > 0.0 {
        let r = disc.sqrt();
        let one_minus_e = -(-2.0 * r * s).exp_m1();
        let one_plus_e = 2.0 - one_minus_e;
        n * one_minus_e / (r * one_plus_e - a * one_minus_e)
    } else if disc == 0.0 {
        n * s / (1.0 - a * s)
    } else {
        let w = (-disc).sqrt();
        let (sin, cos) = (w * s).sin_cos();
        n * sin / (w * cos - a * sin)
    };
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixture_s1;
    use approx::assert_relative_eq;

    #[test]
    fn s1_coefficients_and_conditions() {
        let spec = fixture_s1();
        let c = ScalarCoefficients::from_spec(&spec).unwrap();
        assert_relative_eq!(c.atilde, -0.875, epsilon = 1e-15);
        assert_relative_eq!(c.m, -0.125, epsilon = 1e-15);
        assert_relative_eq!(c.n, 1.125, epsilon = 1e-15);
        let cond = scalar_conditions(&spec).unwrap();
        assert!(cond.cond_dre_a && cond.cond_are);
        let (lo, hi) = cond.region_lo_hi.unwrap();
        assert_relative_eq!(lo, -2.0 * 2f64.sqrt(), epsilon = 1e-14);
        assert_eq!(hi, f64::INFINITY);
        assert_eq!(cond.dre_escape, None);
    }

    #[test]
    fn are_roots() {
        let spec = fixture_s1();
        let (stab, unstab) = scalar_are_roots(&spec).unwrap();
        let sq2 = 2f64.sqrt();
        assert_relative_eq!(stab, sq2 - 1.0, epsilon = 1e-15);
        assert_relative_eq!(unstab, -(sq2 + 1.0), epsilon = 1e-15);
        for p in [stab, unstab] {
            assert!((-p * p - 2.0 * p + 1.0).abs() < 1e-12);
        }
        // unstab − stab equals the basin edge −2S/Δ2
        let s = -1.0 - stab;
        assert_relative_eq!(unstab - stab, -2.0 * s / -1.0, epsilon = 1e-14);

        let mut q0 = fixture_s1();
        q0.q2[(0, 0)] = 0.0;
        assert_eq!(scalar_are_roots(&q0).unwrap(), (0.0, -2.0));

        let mut flip = fixture_s1();
        flip.q2[(0, 0)] = -1.0;
        assert!(!scalar_conditions(&flip).unwrap().cond_are);
        assert!(matches!(
            scalar_are_roots(&flip),
            Err(Error::ConditionFailed(_))
        ));
    }

    #[test]
    fn oracle_regimes() {
        let mut spec = fixture_s1();
        spec.horizon = 1.5;
        let linear = ScalarCoefficients {
            atilde: 0.3,
            m: 0.0,
            n: 2.0,
        };
        for t in [0.0, 0.4, 1.5] {
            let s = 1.5 - t;
            let expect = 2.0 / 0.6 * ((0.6f64 * s).exp() - 1.0);
            assert_relative_eq!(
                scalar_dre_oracle(&spec, &linear, t).unwrap(),
                expect,
                max_relative = 1e-13,
                epsilon = 1e-15
            );
        }
        let zero_n = ScalarCoefficients {
            atilde: 1.0,
            m: 3.0,
            n: 0.0,
        };
        assert_eq!(scalar_dre_oracle(&spec, &zero_n, 0.0).unwrap(), 0.0);
        let double = ScalarCoefficients {
            atilde: -1.0,
            m: 1.0,
            n: 1.0,
        };
        assert_relative_eq!(
            scalar_dre_oracle(&spec, &double, 0.0).unwrap(),
            1.5 / 2.5,
            epsilon = 1e-15
        );
    }

    #[test]
    fn escape_time_matches_denominator_root() {
        let complex = ScalarCoefficients {
            atilde: -1.0,
            m: 1.0,
            n: 1.5,
        };
        let escape = complex.escape_time_to_go().unwrap();
        let w = 0.5f64.sqrt();
        assert!((w * (w * escape).cos() + (w * escape).sin()).abs() < 1e-12);
        let mut spec = fixture_s1();
        spec.horizon = escape * 0.999;
        assert!(scalar_dre_oracle(&spec, &complex, 0.0).is_ok());
        spec.horizon = escape * 1.001;
        assert!(scalar_dre_oracle(&spec, &complex, 0.0).is_err());
    }

    #[test]
    fn non_scalar_rejected() {
        let mut spec = fixture_s1();
        spec.dims.n1 = 2;
        assert!(matches!(scalar_conditions(&spec), Err(Error::NotScalar)));
    }
}
