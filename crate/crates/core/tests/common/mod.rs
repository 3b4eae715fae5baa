//! Oracles and generators shared by the integration tests.
#![allow(dead_code)]

use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use slowfast_game::linalg::Mat;
use slowfast_game::model::{Dims, GameSpec};
use slowfast_game::reduced::solve_reduced;
use slowfast_game::ToleranceConfig;

/// Blocks `(P11, P12, P22)` of the first-order form at one time.
pub type BlockTriple = (Mat, Mat, Mat);

/// Right side of `dP/ds = AᵀP + PA + Q + P(B1B1ᵀ − B2B2ᵀ)P` for the
/// assembled `n × n` matrix in time-to-go `s`, built from the stacked
/// `eps`-scaled system without any block algebra.
fn compact_rhs(a: &Mat, s_quad: &Mat, q: &Mat, p: &Mat) -> Mat {
    a.transpose() * p + p * a + q + p * s_quad * p
}

/// Fixed-step RK4 solution of the assembled Riccati equation, unpacked to
/// blocks at the requested times (each must be a multiple of `h` from `T`).
pub fn rk4_full_oracle(spec: &GameSpec, eps: f64, h: f64, times: &[f64]) -> Vec<BlockTriple> {
    let d = spec.dims;
    let (n1, n2) = (d.n1, d.n2);
    let n = n1 + n2;
    let mut a = Mat::zeros(n, n);
    a.view_mut((0, 0), (n1, n1)).copy_from(&spec.a11);
    a.view_mut((0, n1), (n1, n2)).copy_from(&spec.a12);
    a.view_mut((n1, 0), (n2, n1)).copy_from(&(&spec.a21 / eps));
    a.view_mut((n1, n1), (n2, n2)).copy_from(&(&spec.a22 / eps));
    let mut b1 = Mat::zeros(n, d.k1);
    b1.view_mut((0, 0), (n1, d.k1)).copy_from(&spec.b11);
    b1.view_mut((n1, 0), (n2, d.k1))
        .copy_from(&(&spec.b21 / eps));
    let mut b2 = Mat::zeros(n, d.k2);
    b2.view_mut((0, 0), (n1, d.k2)).copy_from(&spec.b12);
    b2.view_mut((n1, 0), (n2, d.k2))
        .copy_from(&(&spec.b22 / eps));
    let s_quad = &b1 * b1.transpose() - &b2 * b2.transpose();
    let mut q = Mat::zeros(n, n);
    q.view_mut((0, 0), (n1, n1)).copy_from(&spec.q1);
    q.view_mut((n1, n1), (n2, n2)).copy_from(&spec.q2);

    let n_steps = (spec.horizon / h).round() as usize;
    let mut targets: Vec<(usize, usize)> = times
        .iter()
        .enumerate()
        .map(|(i, &t)| (((spec.horizon - t) / h).round() as usize, i))
        .collect();
    targets.sort();
    let mut out = vec![None; times.len()];
    let mut p = Mat::zeros(n, n);
    let mut next = 0;
    for step in 0..=n_steps {
        while next < targets.len() && targets[next].0 == step {
            let p11 = p.view((0, 0), (n1, n1)).into_owned();
            let p12 = p.view((0, n1), (n1, n2)).into_owned() / eps;
            let p22 = p.view((n1, n1), (n2, n2)).into_owned() / eps;
            out[targets[next].1] = Some((p11, p12, p22));
            next += 1;
        }
        if step == n_steps {
            break;
        }
        let k1 = compact_rhs(&a, &s_quad, &q, &p);
        let k2 = compact_rhs(&a, &s_quad, &q, &(&p + &k1 * (h / 2.0)));
        let k3 = compact_rhs(&a, &s_quad, &q, &(&p + &k2 * (h / 2.0)));
        let k4 = compact_rhs(&a, &s_quad, &q, &(&p + &k3 * h));
        p += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    }
    out.into_iter()
        .map(|b| b.expect("time on the RK4 grid"))
        .collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    Uniform::new(lo, hi).expect("lo < hi").sample(rng)
}

pub fn normal_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Mat {
    Mat::from_fn(rows, cols, |_, _| {
        let z: f64 = StandardNormal.sample(rng);
        scale * z
    })
}

/// Random positive semidefinite `n × n` matrix.
fn psd(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Mat {
    let g = normal_matrix(rng, n, n, scale);
    &g * g.transpose()
}

/// Random spec of the given shape with a stable fast block and a dominant
/// minimiser channel, so the reduced problem is usually well posed.
pub fn random_spec(rng: &mut ChaCha8Rng, dims: Dims, horizon: f64) -> GameSpec {
    let Dims {
        n1,
        n2,
        k1,
        k2,
        m1,
        m2,
    } = dims;
    let a22 = normal_matrix(rng, n2, n2, 0.3) - Mat::identity(n2, n2) * uniform(rng, 1.0, 2.0);
    let b22 = normal_matrix(rng, n2, k2, 0.3)
        + Mat::from_fn(n2, k2, |i, j| if i == j { 1.5 } else { 0.0 });
    GameSpec {
        dims,
        a11: normal_matrix(rng, n1, n1, 0.5),
        a12: normal_matrix(rng, n1, n2, 0.5),
        a21: normal_matrix(rng, n2, n1, 0.5),
        a22,
        b11: normal_matrix(rng, n1, k1, 0.3),
        b12: normal_matrix(rng, n1, k2, 0.8),
        b21: normal_matrix(rng, n2, k1, 0.3),
        b22,
        sigma1: normal_matrix(rng, n1, m1, 0.5),
        sigma2: normal_matrix(rng, n2, m2, 0.5),
        q1: psd(rng, n1, 0.7),
        q2: psd(rng, n2, 0.7) + Mat::identity(n2, n2) * 0.1,
        horizon,
    }
    .checked()
    .expect("generated spec is valid")
}

/// First `count` random specs (`n1, n2 ≤ 4`) whose reduced problem solves.
pub fn random_solvable_specs(seed: u64, count: usize) -> Vec<GameSpec> {
    let mut rng = rng(seed);
    let tol = ToleranceConfig::default();
    let mut specs = Vec::new();
    while specs.len() < count {
        let size = |r: &mut ChaCha8Rng| (uniform(r, 1.0, 5.0).floor() as usize).clamp(1, 4);
        let dims = Dims {
            n1: size(&mut rng),
            n2: size(&mut rng),
            k1: size(&mut rng).min(2),
            k2: 0,
            m1: 1,
            m2: 1,
        };
        let dims = Dims {
            k2: dims.n2,
            ..dims
        };
        let spec = random_spec(&mut rng, dims, 1.0);
        if solve_reduced(&spec, &tol).is_ok() {
            specs.push(spec);
        }
    }
    specs
}

/// Random fully scalar spec with coefficients of moderate size.
pub fn random_scalar_spec(rng: &mut ChaCha8Rng) -> GameSpec {
    let mut u = |lo, hi| uniform(rng, lo, hi);
    GameSpec::scalar(
        [u(-2.0, 1.0), u(-1.0, 1.0), u(-1.0, 1.0), u(-2.0, -0.5)],
        [u(-1.0, 1.0), u(-1.0, 1.0), u(-0.5, 0.5), u(0.8, 1.5)],
        [u(0.0, 1.0), u(0.0, 1.0)],
        [u(0.0, 2.0), u(0.1, 2.0)],
        u(0.5, 3.0),
    )
}

/// Fixture variant whose fast state feeds the maximiser's slow gain, so every
/// feedback-gain block carries a first-order layer contribution.
pub fn coupled_fixture() -> GameSpec {
    let mut spec = slowfast_game::fixture_s1();
    spec.b21[(0, 0)] = 0.5;
    spec.checked().expect("valid spec")
}
