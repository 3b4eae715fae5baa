//! Error estimates between full, reduced and boundary-layer solutions, and
//! empirical convergence rates across an `eps` sweep.

use serde::Serialize;

use crate::boundary::{
    default_tau_max, gamma_margin, select_delta, solve_boundary_layer, BoundaryLayerSolution,
};
use crate::error::{Error, Result};
use crate::game::{closed_form_value, gains_from_blocks, limiting_value, trapezoid};
use crate::linalg::Mat;
use crate::model::{check_eps, GameSpec};
use crate::ode::ToleranceConfig;
use crate::output::csv_text;
use crate::reduced::{solve_reduced, ReducedSolution};
use crate::riccati::{solve_full, Blocks, RiccatiSolution};

/// Uniform points added to the solver grid when sampling a sup norm.
pub const UNIFORM_SUP_POINTS: usize = 200;

/// Default sweep, decreasing.
pub const DEFAULT_EPS_SWEEP: [f64; 5] = [1e-1, 3e-2, 1e-2, 3e-3, 1e-3];

/// Sup-norm errors and feedback-gain gaps at one `eps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TikhonovReport {
    pub eps: f64,
    /// `sup_t |P11 − P11bar|`.
    pub err_p11: f64,
    /// `sup_t |P12 − P12bar − P12hat((T − t)/eps)|`.
    pub err_p12: f64,
    /// `sup_t |P22 − P22bar − P22hat((T − t)/eps)|`.
    pub err_p22: f64,
    /// `sup_t |P(t) − diag(P11bar(t), 0)|` for the assembled matrix.
    pub err_assembled: f64,
    /// `∫|F_ij − Fbar_ij|² dt` in the order 11, 12, 21, 22.
    pub l2_gaps: [f64; 4],
}

/// Sorted union of two point sets with exact duplicates removed.
fn merge_points(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut pts: Vec<f64> = a.iter().chain(b).copied().collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

/// `n` equally spaced points covering `[0, horizon]`.
pub fn uniform_points(horizon: f64, n: usize) -> Vec<f64> {
    let n = n.max(2);
    (0..n)
        .map(|k| horizon * k as f64 / (n - 1) as f64)
        .collect()
}

fn check_same_spec(full: &RiccatiSolution, red: &ReducedSolution, spec: &GameSpec) -> Result<()> {
    if full.dims != spec.dims || red.dims != spec.dims || full.horizon != spec.horizon {
        return Err(Error::GridMismatch(
            "solutions were not built from this spec".into(),
        ));
    }
    Ok(())
}

/// The four sup errors `(P11, P12, P22, assembled)` sampled at `points`.
pub fn sup_errors_at(
    full: &RiccatiSolution,
    red: &ReducedSolution,
    bl: &BoundaryLayerSolution,
    spec: &GameSpec,
    points: &[f64],
) -> Result<[f64; 4]> {
    check_same_spec(full, red, spec)?;
    let eps = full.eps;
    let horizon = spec.horizon;
    if bl.tau_max < horizon / eps * (1.0 - 1e-12) {
        return Err(Error::GridMismatch(format!(
            "boundary layer covers tau <= {}, need {}",
            bl.tau_max,
            horizon / eps
        )));
    }
    let (n1, n2) = (spec.dims.n1, spec.dims.n2);
    let mut sup = [0.0f64; 4];
    for &t in points {
        let b = full.eval(t)?;
        let p11bar = red.p11bar(t);
        let p12bar = red.p12bar_at(t, spec);
        let (h12, h22) = bl.eval((horizon - t) / eps);
        let d11 = &b.p11 - &p11bar;
        let e12 = (&b.p12 - &p12bar - h12).norm();
        let e22 = (&b.p22 - &red.p22bar - h22).norm();
        let mut diff = Mat::zeros(n1 + n2, n1 + n2);
        diff.view_mut((0, 0), (n1, n1)).copy_from(&d11);
        diff.view_mut((0, n1), (n1, n2)).copy_from(&(&b.p12 * eps));
        diff.view_mut((n1, 0), (n2, n1))
            .copy_from(&(b.p12.transpose() * eps));
        diff.view_mut((n1, n1), (n2, n2)).copy_from(&(&b.p22 * eps));
        for (s, v) in sup.iter_mut().zip([d11.norm(), e12, e22, diff.norm()]) {
            *s = s.max(v);
        }
    }
    Ok(sup)
}

/// Sup errors on the solver grid plus uniform points, and the L² gain gaps.
pub fn tikhonov_errors(
    full: &RiccatiSolution,
    red: &ReducedSolution,
    bl: &BoundaryLayerSolution,
    spec: &GameSpec,
) -> Result<TikhonovReport> {
    let points = merge_points(
        &full.grid,
        &uniform_points(spec.horizon, UNIFORM_SUP_POINTS),
    );
    let [err_p11, err_p12, err_p22, err_assembled] = sup_errors_at(full, red, bl, spec, &points)?;
    Ok(TikhonovReport {
        eps: full.eps,
        err_p11,
        err_p12,
        err_p22,
        err_assembled,
        l2_gaps: l2_feedback_gap(full, red, spec)?,
    })
}

fn reduced_blocks(red: &ReducedSolution, spec: &GameSpec, t: f64) -> Blocks {
    Blocks {
        p11: red.p11bar(t),
        p12: red.p12bar_at(t, spec),
        p22: red.p22bar.clone(),
    }
}

/// `∫₀ᵀ |F_ij − Fbar_ij|² dt` by the trapezoid rule on the merged grids.
pub fn l2_feedback_gap(
    full: &RiccatiSolution,
    red: &ReducedSolution,
    spec: &GameSpec,
) -> Result<[f64; 4]> {
    check_same_spec(full, red, spec)?;
    let pts = merge_points(&full.grid, red.grid());
    let mut cols: [Vec<f64>; 4] = Default::default();
    for &t in &pts {
        let exact = gains_from_blocks(&full.eval(t)?, full.eps, spec);
        let approx = gains_from_blocks(&reduced_blocks(red, spec, t), 0.0, spec);
        for (c, v) in cols.iter_mut().zip(exact.sq_distances(&approx)) {
            c.push(v);
        }
    }
    Ok(cols.map(|c| trapezoid(&pts, &c)))
}

/// `∫₀ᵀ |P_i2 − Pbar_i2|^j dt` for `i = 1, 2`.
pub fn deviation_integrals(
    full: &RiccatiSolution,
    red: &ReducedSolution,
    spec: &GameSpec,
    j: u32,
) -> Result<[f64; 2]> {
    if j == 0 {
        return Err(Error::InvalidArgument(
            "exponent j must be at least 1".into(),
        ));
    }
    check_same_spec(full, red, spec)?;
    let pts = merge_points(&full.grid, red.grid());
    let mut c12 = Vec::with_capacity(pts.len());
    let mut c22 = Vec::with_capacity(pts.len());
    for &t in &pts {
        let b = full.eval(t)?;
        c12.push((&b.p12 - red.p12bar_at(t, spec)).norm().powi(j as i32));
        c22.push((&b.p22 - &red.p22bar).norm().powi(j as i32));
    }
    Ok([trapezoid(&pts, &c12), trapezoid(&pts, &c22)])
}

/// Least-squares line through `(ln eps, ln err)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateFit {
    /// Decreasing.
    pub eps_values: Vec<f64>,
    pub errors: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// `eps` values whose error was zero or not finite, left out of the fit.
    pub excluded: Vec<f64>,
}

pub fn fit_rate(points: &[(f64, f64)]) -> Result<RateFit> {
    let mut pts: Vec<(f64, f64)> = points.to_vec();
    pts.sort_by(|a, b| b.0.total_cmp(&a.0));
    let (kept, dropped): (Vec<_>, Vec<_>) = pts
        .into_iter()
        .partition(|&(e, err)| e > 0.0 && e.is_finite() && err > 0.0 && err.is_finite());
    let distinct =
        kept.windows(2).filter(|w| w[0].0 != w[1].0).count() + usize::from(!kept.is_empty());
    if distinct < 3 {
        return Err(Error::InsufficientPoints(distinct));
    }
    let xs: Vec<f64> = kept.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = kept.iter().map(|p| p.1.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    Ok(RateFit {
        eps_values: kept.iter().map(|p| p.0).collect(),
        errors: kept.iter().map(|p| p.1).collect(),
        slope,
        intercept,
        r_squared,
        excluded: dropped.iter().map(|p| p.0).collect(),
    })
}

/// All measured quantities at one sweep point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint {
    pub report: TikhonovReport,
    /// Integrals of `|P_i2 − Pbar_i2|^j` indexed `[j − 1][i − 1]`, `j = 1, 2`.
    pub deviation: [[f64; 2]; 2],
    /// `|V_eps(x0) − Vbar(x0)|`.
    pub value_gap: f64,
    /// Accepted steps of the full solver.
    pub full_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSettings {
    pub tol: ToleranceConfig,
    /// `None` picks the default margin split.
    pub delta: Option<f64>,
    pub x0: Vec<f64>,
}

/// Sweep results ordered by decreasing `eps`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sweep {
    pub points: Vec<SweepPoint>,
    pub delta: f64,
    pub gamma: f64,
}

/// Names of the fitted series, matching the CSV columns after `eps`.
pub const SERIES: [&str; 14] = [
    "err_P11",
    "err_P12",
    "err_P22",
    "err_assembled",
    "gap_11",
    "gap_12",
    "gap_21",
    "gap_22",
    "int_P12_j1",
    "int_P22_j1",
    "int_P12_j2",
    "int_P22_j2",
    "value_gap",
    "full_steps",
];

/// Number of leading [`SERIES`] entries written to the sweep CSV.
const CSV_SERIES: usize = 8;

impl SweepPoint {
    fn series(&self) -> [f64; 14] {
        let r = &self.report;
        let [[a, b], [c, d]] = self.deviation;
        [
            r.err_p11,
            r.err_p12,
            r.err_p22,
            r.err_assembled,
            r.l2_gaps[0],
            r.l2_gaps[1],
            r.l2_gaps[2],
            r.l2_gaps[3],
            a,
            b,
            c,
            d,
            self.value_gap,
            self.full_steps as f64,
        ]
    }
}

impl Sweep {
    pub fn eps_values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.report.eps).collect()
    }

    /// Values of the named series, in sweep order.
    pub fn series(&self, name: &str) -> Option<Vec<f64>> {
        let k = SERIES.iter().position(|s| *s == name)?;
        Some(self.points.iter().map(|p| p.series()[k]).collect())
    }

    /// Rate fit of the named series; `None` for unknown names.
    pub fn fit(&self, name: &str) -> Option<Result<RateFit>> {
        let ys = self.series(name)?;
        let pts: Vec<(f64, f64)> = self.eps_values().into_iter().zip(ys).collect();
        Some(fit_rate(&pts))
    }

    /// CSV with columns `eps, err_P11, …, gap_22`.
    pub fn to_csv(&self) -> String {
        let mut header = vec!["eps".to_string()];
        header.extend(SERIES[..CSV_SERIES].iter().map(|s| s.to_string()));
        let rows = self.points.iter().map(|p| {
            std::iter::once(p.report.eps)
                .chain(p.series()[..CSV_SERIES].iter().copied())
                .collect::<Vec<_>>()
        });
        csv_text(&header, rows)
    }

    /// JSON with per-series slopes keyed by name (`null` where no fit is
    /// possible) and the smallest `eps` reached.
    pub fn summary_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Slope {
            slope: f64,
            intercept: f64,
            r_squared: f64,
            excluded: Vec<f64>,
        }
        #[derive(Serialize)]
        struct Summary {
            eps: Vec<f64>,
            smallest_eps: f64,
            gamma: f64,
            delta: f64,
            slopes: serde_json::Map<String, serde_json::Value>,
        }
        let mut slopes = serde_json::Map::new();
        for &name in &SERIES[..SERIES.len() - 1] {
            let fit = self.fit(name).and_then(|r| r.ok()).map(|f| Slope {
                slope: f.slope,
                intercept: f.intercept,
                r_squared: f.r_squared,
                excluded: f.excluded,
            });
            slopes.insert(name.to_string(), serde_json::to_value(fit)?);
        }
        let eps = self.eps_values();
        let summary = Summary {
            smallest_eps: eps.last().copied().unwrap_or(f64::NAN),
            eps,
            gamma: self.gamma,
            delta: self.delta,
            slopes,
        };
        Ok(serde_json::to_string_pretty(&summary)?)
    }
}

/// Solves full, reduced and layer problems at every `eps` and collects errors.
///
/// Fails with `InsufficientPoints` before any solving when fewer than three
/// distinct `eps` values are given.
pub fn run_sweep(spec: &GameSpec, eps_list: &[f64], settings: &SweepSettings) -> Result<Sweep> {
    spec.ensure_valid()?;
    settings.tol.validate()?;
    let mut eps_sorted = eps_list.to_vec();
    for &e in &eps_sorted {
        check_eps(e)?;
    }
    eps_sorted.sort_by(|a, b| b.total_cmp(a));
    eps_sorted.dedup();
    if eps_sorted.len() < 3 {
        return Err(Error::InsufficientPoints(eps_sorted.len()));
    }
    let red = solve_reduced(spec, &settings.tol)?;
    let gamma = gamma_margin(spec, &red.p22bar)?;
    let (delta, _) = select_delta(spec, &red.p22bar, settings.delta)?;
    let v_bar = limiting_value(&red, spec, &settings.x0)?;
    let points = eps_sorted
        .iter()
        .map(|&eps| {
            let full = solve_full(spec, eps, &settings.tol, None)?;
            let tau_max = default_tau_max(eps, spec.horizon, gamma, delta);
            let bl = solve_boundary_layer(spec, &red, Some(delta), tau_max, &settings.tol)?;
            let report = tikhonov_errors(&full, &red, &bl, spec)?;
            Ok(SweepPoint {
                report,
                deviation: [
                    deviation_integrals(&full, &red, spec, 1)?,
                    deviation_integrals(&full, &red, spec, 2)?,
                ],
                value_gap: (closed_form_value(&full, spec, &settings.x0)? - v_bar).abs(),
                full_steps: full.n_steps(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Sweep {
        points,
        delta,
        gamma,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixture_s1;
    use approx::assert_relative_eq;

    fn pipeline(
        spec: &GameSpec,
        eps: f64,
    ) -> (RiccatiSolution, ReducedSolution, BoundaryLayerSolution) {
        let tol = ToleranceConfig::default();
        let full = solve_full(spec, eps, &tol, None).unwrap();
        let red = solve_reduced(spec, &tol).unwrap();
        let gamma = gamma_margin(spec, &red.p22bar).unwrap();
        let bl = solve_boundary_layer(
            spec,
            &red,
            None,
            default_tau_max(eps, spec.horizon, gamma, gamma / 2.0),
            &tol,
        )
        .unwrap();
        (full, red, bl)
    }

    #[test]
    fn exact_lines() {
        let eps = [1e-1, 1e-2, 1e-3];
        let lin: Vec<_> = eps.iter().map(|&e| (e, 3.0 * e)).collect();
        let f = fit_rate(&lin).unwrap();
        assert_relative_eq!(f.slope, 1.0, epsilon = 1e-12);
        assert_relative_eq!(f.r_squared, 1.0, epsilon = 1e-12);
        assert_relative_eq!(f.intercept, 3f64.ln(), epsilon = 1e-12);
        let quad: Vec<_> = eps.iter().map(|&e| (e, 5.0 * e * e)).collect();
        assert_relative_eq!(fit_rate(&quad).unwrap().slope, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn fit_needs_three_positive_points() {
        assert!(matches!(
            fit_rate(&[(0.1, 1.0), (0.01, 0.1)]),
            Err(Error::InsufficientPoints(2))
        ));
        let f = fit_rate(&[(0.1, 1.0), (0.05, 0.0), (0.01, 0.1), (0.001, 0.01)]).unwrap();
        assert_eq!(f.excluded, vec![0.05]);
        assert_eq!(f.eps_values, vec![0.1, 0.01, 0.001]);
    }

    #[test]
    fn zero_cost_errors_vanish() {
        let spec = fixture_s1().zero_cost();
        let (full, red, bl) = pipeline(&spec, 0.1);
        let r = tikhonov_errors(&full, &red, &bl, &spec).unwrap();
        assert_eq!([r.err_p11, r.err_p12, r.err_p22, r.err_assembled], [0.0; 4]);
        assert_eq!(r.l2_gaps, [0.0; 4]);
        assert_eq!(
            deviation_integrals(&full, &red, &spec, 2).unwrap(),
            [0.0; 2]
        );
    }

    #[test]
    fn short_layer_is_rejected() {
        let spec = fixture_s1();
        let tol = ToleranceConfig::default();
        let full = solve_full(&spec, 0.1, &tol, None).unwrap();
        let red = solve_reduced(&spec, &tol).unwrap();
        let bl = solve_boundary_layer(&spec, &red, None, 5.0, &tol).unwrap();
        assert!(matches!(
            tikhonov_errors(&full, &red, &bl, &spec),
            Err(Error::GridMismatch(_))
        ));
    }

    #[test]
    fn s1_errors_shrink_with_eps() {
        let spec = fixture_s1();
        let (f2, red, bl2) = pipeline(&spec, 1e-2);
        let (f3, _, bl3) = pipeline(&spec, 1e-3);
        let a = tikhonov_errors(&f2, &red, &bl2, &spec).unwrap();
        let b = tikhonov_errors(&f3, &red, &bl3, &spec).unwrap();
        for (x, y) in [
            (a.err_p11, b.err_p11),
            (a.err_p12, b.err_p12),
            (a.err_p22, b.err_p22),
        ] {
            assert!((5.0..=20.0).contains(&(x / y)), "ratio {}", x / y);
        }
        let sup22 = f2.p22.iter().map(|m| m.norm()).fold(0.0, f64::max);
        assert!(a.err_assembled >= 1e-2 * sup22 - 1e-12);
    }

    #[test]
    fn deviation_integrals_hoelder_bound() {
        let spec = fixture_s1();
        let (full, red, _) = pipeline(&spec, 1e-2);
        let j1 = deviation_integrals(&full, &red, &spec, 1).unwrap();
        let j2 = deviation_integrals(&full, &red, &spec, 2).unwrap();
        let sup22 = full
            .grid
            .iter()
            .map(|&t| (&full.eval(t).unwrap().p22 - &red.p22bar).norm())
            .fold(0.0, f64::max);
        assert!(j2[1] <= sup22 * j1[1] * (1.0 + 1e-9));
        assert!(deviation_integrals(&full, &red, &spec, 0).is_err());
    }

    #[test]
    fn sweep_rejects_single_eps() {
        let settings = SweepSettings {
            tol: ToleranceConfig::default(),
            delta: None,
            x0: vec![1.0, 1.0],
        };
        assert!(matches!(
            run_sweep(&fixture_s1(), &[0.1], &settings),
            Err(Error::InsufficientPoints(1))
        ));
    }
}
