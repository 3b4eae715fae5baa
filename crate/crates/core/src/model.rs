//! Problem data of the slow–fast game and the constant blocks derived from it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{asymmetry, symmetrize_in_place, Mat};

/// Relative asymmetry of `Q1`, `Q2` above which a spec is rejected.
pub const SYMMETRY_REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub n1: usize,
    pub n2: usize,
    pub k1: usize,
    pub k2: usize,
    pub m1: usize,
    pub m2: usize,
}

impl Dims {
    pub const SCALAR: Dims = Dims {
        n1: 1,
        n2: 1,
        k1: 1,
        k2: 1,
        m1: 1,
        m2: 1,
    };

    pub fn n(&self) -> usize {
        self.n1 + self.n2
    }

    pub fn is_scalar(&self) -> bool {
        *self == Self::SCALAR
    }
}

/// Block coefficients of the game.
///
/// Player 1 (control `u1`, maximiser) enters through `B11`, `B21`; player 2
/// (control `u2`, minimiser) through `B12`, `B22`. The fast state is driven
/// by `(A21 x1 + A22 x2 + B21 u1 + B22 u2) / eps` with noise `sigma2 / sqrt(eps)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GameSpec {
    pub dims: Dims,
    pub a11: Mat,
    pub a12: Mat,
    pub a21: Mat,
    pub a22: Mat,
    pub b11: Mat,
    pub b12: Mat,
    pub b21: Mat,
    pub b22: Mat,
    pub sigma1: Mat,
    pub sigma2: Mat,
    pub q1: Mat,
    pub q2: Mat,
    pub horizon: f64,
}

/// Every violated invariant of a [`GameSpec`]; empty iff the spec is well formed.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_ok() {
            Ok(())
        } else {
            Err(Error::InvalidSpec(self.violations))
        }
    }
}

fn relative_asymmetry(m: &Mat) -> f64 {
    let scale = m.norm();
    if scale == 0.0 {
        0.0
    } else {
        asymmetry(m) / scale
    }
}

pub fn validate_spec(spec: &GameSpec) -> ValidationReport {
    let mut v = Vec::new();
    let d = spec.dims;
    for (name, val) in [
        ("n1", d.n1),
        ("n2", d.n2),
        ("k1", d.k1),
        ("k2", d.k2),
        ("m1", d.m1),
        ("m2", d.m2),
    ] {
        if val < 1 {
            v.push(format!("{name} must be at least 1"));
        }
    }
    if !(spec.horizon > 0.0 && spec.horizon.is_finite()) {
        v.push("T must be positive".to_string());
    }
    let shapes: [(&str, &Mat, usize, usize); 12] = [
        ("A11", &spec.a11, d.n1, d.n1),
        ("A12", &spec.a12, d.n1, d.n2),
        ("A21", &spec.a21, d.n2, d.n1),
        ("A22", &spec.a22, d.n2, d.n2),
        ("B11", &spec.b11, d.n1, d.k1),
        ("B12", &spec.b12, d.n1, d.k2),
        ("B21", &spec.b21, d.n2, d.k1),
        ("B22", &spec.b22, d.n2, d.k2),
        ("sigma1", &spec.sigma1, d.n1, d.m1),
        ("sigma2", &spec.sigma2, d.n2, d.m2),
        ("Q1", &spec.q1, d.n1, d.n1),
        ("Q2", &spec.q2, d.n2, d.n2),
    ];
    for (name, m, r, c) in shapes {
        if m.shape() != (r, c) {
            v.push(format!(
                "{name} has shape {}x{}, expected {r}x{c}",
                m.nrows(),
                m.ncols()
            ));
        } else if m.iter().any(|x| !x.is_finite()) {
            v.push(format!("{name} has non-finite entries"));
        }
    }
    for (name, q) in [("Q1", &spec.q1), ("Q2", &spec.q2)] {
        if q.is_square() && relative_asymmetry(q) > SYMMETRY_REL_TOL {
            v.push(format!("{name} not symmetric"));
        }
    }
    ValidationReport { violations: v }
}

impl GameSpec {
    /// Validates and symmetrizes `Q1`, `Q2` (whose asymmetry is already
    /// below [`SYMMETRY_REL_TOL`]).
    pub fn checked(mut self) -> Result<Self> {
        validate_spec(&self).into_result()?;
        symmetrize_in_place(&mut self.q1);
        symmetrize_in_place(&mut self.q2);
        Ok(self)
    }

    pub fn ensure_valid(&self) -> Result<()> {
        validate_spec(self).into_result()
    }

    /// One-dimensional spec from scalar coefficients.
    #[allow(clippy::too_many_arguments)]
    pub fn scalar(
        a: [f64; 4],
        b: [f64; 4],
        sigma: [f64; 2],
        q: [f64; 2],
        horizon: f64,
    ) -> GameSpec {
        let m = |x: f64| Mat::from_element(1, 1, x);
        GameSpec {
            dims: Dims::SCALAR,
            a11: m(a[0]),
            a12: m(a[1]),
            a21: m(a[2]),
            a22: m(a[3]),
            b11: m(b[0]),
            b12: m(b[1]),
            b21: m(b[2]),
            b22: m(b[3]),
            sigma1: m(sigma[0]),
            sigma2: m(sigma[1]),
            q1: m(q[0]),
            q2: m(q[1]),
            horizon,
        }
    }

    /// Same data with both cost weights set to zero.
    pub fn zero_cost(&self) -> GameSpec {
        let mut s = self.clone();
        s.q1.fill(0.0);
        s.q2.fill(0.0);
        s
    }

    pub fn from_json_str(text: &str) -> Result<GameSpec> {
        let file: SpecFile = serde_json::from_str(text)?;
        file.into_spec()
    }

    pub fn from_json_file(path: impl AsRef<std::path::Path>) -> Result<GameSpec> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&SpecFile::from_spec(self))?)
    }
}

/// Canonical scalar fixture used across tests, examples and the CLI.
pub fn fixture_s1() -> GameSpec {
    GameSpec::scalar(
        [-1.0, 1.0, 0.5, -1.0],
        [1.0, 0.5, 0.0, 1.0],
        [1.0, 1.0],
        [1.0, 1.0],
        2.0,
    )
}

/// On-disk JSON layout: dimensions, horizon and every block as an array of rows.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct SpecFile {
    n1: usize,
    n2: usize,
    k1: usize,
    k2: usize,
    m1: usize,
    m2: usize,
    #[serde(rename = "T")]
    horizon: f64,
    #[serde(rename = "A11")]
    a11: Vec<Vec<f64>>,
    #[serde(rename = "A12")]
    a12: Vec<Vec<f64>>,
    #[serde(rename = "A21")]
    a21: Vec<Vec<f64>>,
    #[serde(rename = "A22")]
    a22: Vec<Vec<f64>>,
    #[serde(rename = "B11")]
    b11: Vec<Vec<f64>>,
    #[serde(rename = "B12")]
    b12: Vec<Vec<f64>>,
    #[serde(rename = "B21")]
    b21: Vec<Vec<f64>>,
    #[serde(rename = "B22")]
    b22: Vec<Vec<f64>>,
    sigma1: Vec<Vec<f64>>,
    sigma2: Vec<Vec<f64>>,
    #[serde(rename = "Q1")]
    q1: Vec<Vec<f64>>,
    #[serde(rename = "Q2")]
    q2: Vec<Vec<f64>>,
}

fn rows_to_mat(name: &str, rows: &[Vec<f64>]) -> Result<Mat> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|row| row.len() != c) {
        return Err(Error::InvalidSpec(vec![format!("{name} has ragged rows")]));
    }
    if rows.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::InvalidSpec(vec![format!(
            "{name} has non-finite entries"
        )]));
    }
    Ok(Mat::from_row_iterator(r, c, rows.iter().flatten().copied()))
}

fn mat_to_rows(m: &Mat) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

impl SpecFile {
    fn into_spec(self) -> Result<GameSpec> {
        if !self.horizon.is_finite() {
            return Err(Error::InvalidSpec(vec!["T is not finite".into()]));
        }
        let spec = GameSpec {
            dims: Dims {
                n1: self.n1,
                n2: self.n2,
                k1: self.k1,
                k2: self.k2,
                m1: self.m1,
                m2: self.m2,
            },
            a11: rows_to_mat("A11", &self.a11)?,
            a12: rows_to_mat("A12", &self.a12)?,
            a21: rows_to_mat("A21", &self.a21)?,
            a22: rows_to_mat("A22", &self.a22)?,
            b11: rows_to_mat("B11", &self.b11)?,
            b12: rows_to_mat("B12", &self.b12)?,
            b21: rows_to_mat("B21", &self.b21)?,
            b22: rows_to_mat("B22", &self.b22)?,
            sigma1: rows_to_mat("sigma1", &self.sigma1)?,
            sigma2: rows_to_mat("sigma2", &self.sigma2)?,
            q1: rows_to_mat("Q1", &self.q1)?,
            q2: rows_to_mat("Q2", &self.q2)?,
            horizon: self.horizon,
        };
        spec.checked()
    }

    fn from_spec(s: &GameSpec) -> SpecFile {
        SpecFile {
            n1: s.dims.n1,
            n2: s.dims.n2,
            k1: s.dims.k1,
            k2: s.dims.k2,
            m1: s.dims.m1,
            m2: s.dims.m2,
            horizon: s.horizon,
            a11: mat_to_rows(&s.a11),
            a12: mat_to_rows(&s.a12),
            a21: mat_to_rows(&s.a21),
            a22: mat_to_rows(&s.a22),
            b11: mat_to_rows(&s.b11),
            b12: mat_to_rows(&s.b12),
            b21: mat_to_rows(&s.b21),
            b22: mat_to_rows(&s.b22),
            sigma1: mat_to_rows(&s.sigma1),
            sigma2: mat_to_rows(&s.sigma2),
            q1: mat_to_rows(&s.q1),
            q2: mat_to_rows(&s.q2),
        }
    }
}

/// The three blocks of the indefinite quadratic coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaBlocks {
    /// `B11 B11ᵀ − B12 B12ᵀ`
    pub delta1: Mat,
    /// `B11 B21ᵀ − B12 B22ᵀ`
    pub delta: Mat,
    /// `B21 B21ᵀ − B22 B22ᵀ`
    pub delta2: Mat,
}

pub fn delta_blocks(spec: &GameSpec) -> DeltaBlocks {
    let mut delta1 = &spec.b11 * spec.b11.transpose() - &spec.b12 * spec.b12.transpose();
    let delta = &spec.b11 * spec.b21.transpose() - &spec.b12 * spec.b22.transpose();
    let mut delta2 = &spec.b21 * spec.b21.transpose() - &spec.b22 * spec.b22.transpose();
    symmetrize_in_place(&mut delta1);
    symmetrize_in_place(&mut delta2);
    DeltaBlocks {
        delta1,
        delta,
        delta2,
    }
}

/// Stacked `n × n` form of the system at a fixed `eps`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompactSystem {
    pub eps: f64,
    pub a_eps: Mat,
    pub b_eps: Mat,
    pub sigma_eps: Mat,
    pub q: Mat,
    /// Signature matrix `diag(−I_k1, I_k2)`.
    pub r: Mat,
    pub dims: Dims,
}

pub fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps <= 1.0 {
        Ok(())
    } else {
        Err(Error::EpsOutOfRange(eps))
    }
}

pub fn assemble_compact(spec: &GameSpec, eps: f64) -> Result<CompactSystem> {
    check_eps(eps)?;
    let d = spec.dims;
    let (n1, n, k) = (d.n1, d.n(), d.k1 + d.k2);
    let mut a = Mat::zeros(n, n);
    a.view_mut((0, 0), (n1, n1)).copy_from(&spec.a11);
    a.view_mut((0, n1), (n1, d.n2)).copy_from(&spec.a12);
    a.view_mut((n1, 0), (d.n2, n1))
        .copy_from(&(&spec.a21 / eps));
    a.view_mut((n1, n1), (d.n2, d.n2))
        .copy_from(&(&spec.a22 / eps));
    let mut b = Mat::zeros(n, k);
    b.view_mut((0, 0), (n1, d.k1)).copy_from(&spec.b11);
    b.view_mut((0, d.k1), (n1, d.k2)).copy_from(&spec.b12);
    b.view_mut((n1, 0), (d.n2, d.k1))
        .copy_from(&(&spec.b21 / eps));
    b.view_mut((n1, d.k1), (d.n2, d.k2))
        .copy_from(&(&spec.b22 / eps));
    let mut sigma = Mat::zeros(n, d.m1 + d.m2);
    sigma.view_mut((0, 0), (n1, d.m1)).copy_from(&spec.sigma1);
    sigma
        .view_mut((n1, d.m1), (d.n2, d.m2))
        .copy_from(&(&spec.sigma2 / eps.sqrt()));
    let mut q = Mat::zeros(n, n);
    q.view_mut((0, 0), (n1, n1)).copy_from(&spec.q1);
    q.view_mut((n1, n1), (d.n2, d.n2)).copy_from(&spec.q2);
    let mut r = Mat::identity(k, k);
    for i in 0..d.k1 {
        r[(i, i)] = -1.0;
    }
    Ok(CompactSystem {
        eps,
        a_eps: a,
        b_eps: b,
        sigma_eps: sigma,
        q,
        r,
        dims: d,
    })
}

impl CompactSystem {
    /// `−Bᵋ R⁻¹ (Bᵋ)ᵀ`; `R` is its own inverse.
    pub fn quadratic_coefficient(&self) -> Mat {
        -(&self.b_eps * &self.r * self.b_eps.transpose())
    }

    /// Recovers the fast-row blocks `(A21, A22, B21, B22, sigma2)` by undoing
    /// the `1/eps` and `1/sqrt(eps)` scalings.
    pub fn fast_blocks(&self) -> (Mat, Mat, Mat, Mat, Mat) {
        let d = self.dims;
        let n1 = d.n1;
        let e = self.eps;
        (
            self.a_eps.view((n1, 0), (d.n2, n1)) * e,
            self.a_eps.view((n1, n1), (d.n2, d.n2)) * e,
            self.b_eps.view((n1, 0), (d.n2, d.k1)) * e,
            self.b_eps.view((n1, d.k1), (d.n2, d.k2)) * e,
            self.sigma_eps.view((n1, d.m1), (d.n2, d.m2)) * e.sqrt(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn s1_is_valid() {
        assert!(validate_spec(&fixture_s1()).is_ok());
    }

    #[test]
    fn asymmetric_q_is_reported() {
        let mut spec = GameSpec {
            dims: Dims {
                n1: 2,
                ..Dims::SCALAR
            },
            a11: Mat::identity(2, 2),
            a12: Mat::zeros(2, 1),
            b11: Mat::zeros(2, 1),
            b12: Mat::zeros(2, 1),
            sigma1: Mat::zeros(2, 1),
            a21: Mat::zeros(1, 2),
            q1: Mat::identity(2, 2),
            ..fixture_s1()
        };
        assert!(validate_spec(&spec).is_ok());
        spec.q1[(0, 1)] += 1e-6;
        let report = validate_spec(&spec);
        assert_eq!(report.violations, vec!["Q1 not symmetric".to_string()]);
    }

    #[test]
    fn zero_horizon_is_reported() {
        let mut spec = fixture_s1();
        spec.horizon = 0.0;
        assert_eq!(
            validate_spec(&spec).violations,
            vec!["T must be positive".to_string()]
        );
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let mut spec = fixture_s1();
        spec.b22 = Mat::zeros(2, 1);
        let report = validate_spec(&spec);
        assert_eq!(report.violations.len(), 1);
        assert!(report.violations[0].starts_with("B22 has shape"));
    }

    #[test]
    fn s1_delta_blocks() {
        let d = delta_blocks(&fixture_s1());
        assert_eq!(d.delta1[(0, 0)], 0.75);
        assert_eq!(d.delta[(0, 0)], -0.5);
        assert_eq!(d.delta2[(0, 0)], -1.0);
    }

    #[test]
    fn zero_and_cancelling_b_blocks() {
        let mut spec = fixture_s1();
        for b in [&mut spec.b11, &mut spec.b12, &mut spec.b21, &mut spec.b22] {
            b.fill(0.0);
        }
        let d = delta_blocks(&spec);
        assert_eq!(d.delta1.norm() + d.delta.norm() + d.delta2.norm(), 0.0);

        let mut spec = fixture_s1();
        spec.b12 = spec.b11.clone();
        spec.b22 = spec.b21.clone();
        let d = delta_blocks(&spec);
        assert_eq!(d.delta1.norm() + d.delta.norm() + d.delta2.norm(), 0.0);
    }

    #[test]
    fn compact_scaling() {
        let spec = fixture_s1();
        let c1 = assemble_compact(&spec, 1.0).unwrap();
        assert_eq!(c1.a_eps[(1, 0)], 0.5);
        assert_eq!(c1.a_eps[(1, 1)], -1.0);
        assert_eq!(c1.sigma_eps[(1, 1)], 1.0);
        let c = assemble_compact(&spec, 0.01).unwrap();
        assert_relative_eq!(c.a_eps[(1, 0)], 50.0, max_relative = 1e-15);
        assert_relative_eq!(c.sigma_eps[(1, 1)], 10.0, max_relative = 1e-15);
        assert_eq!(c.r[(0, 0)], -1.0);
        assert_eq!(c.r[(1, 1)], 1.0);
        assert!(assemble_compact(&spec, 0.0).is_err());
        assert!(assemble_compact(&spec, 1.5).is_err());
    }

    #[test]
    fn compact_quadratic_block_matches_delta2() {
        let spec = fixture_s1();
        let eps = 0.1;
        let c = assemble_compact(&spec, eps).unwrap();
        let k = c.quadratic_coefficient();
        let d = delta_blocks(&spec);
        assert_relative_eq!(
            k[(1, 1)],
            d.delta2[(0, 0)] / (eps * eps),
            max_relative = 1e-14
        );
        assert_relative_eq!(k[(0, 1)], d.delta[(0, 0)] / eps, max_relative = 1e-14);
        assert_relative_eq!(k[(0, 0)], d.delta1[(0, 0)], max_relative = 1e-14);
    }

    #[test]
    fn json_round_trip_and_nonfinite_rejection() {
        let spec = fixture_s1();
        let text = spec.to_json_string().unwrap();
        assert!(text.contains("\"T\""));
        let back = GameSpec::from_json_str(&text).unwrap();
        assert_eq!(back, spec);
        let bad = text.replace("\"T\": 2.0", "\"T\": 1e999");
        assert!(GameSpec::from_json_str(&bad).is_err());
    }
}
