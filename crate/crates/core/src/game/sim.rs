//! Euler–Maruyama simulation of the closed-loop game with common random numbers.

use serde::Serialize;

use super::rng::NoiseStream;
use super::{check_x0, make_feedback, FeedbackKind, FeedbackLaw, Player, SolutionRef};
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::model::{assemble_compact, check_eps, GameSpec};
use crate::output::csv_text;
use crate::reduced::ReducedSolution;
use crate::riccati::RiccatiSolution;

/// State norm above which a path counts as escaping.
pub const PATH_BLOWUP: f64 = 1e9;

/// Largest admissible step as a fraction of `eps`.
pub const MAX_STEP_OVER_EPS: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimConfig {
    /// Requested step; the effective step is `T / ceil(T / h)`.
    pub h: f64,
    pub n_paths: usize,
    pub seed: u64,
    /// Each increment is the sum of this many finer normal draws, so runs
    /// with `(h, r)` and `(h / r, 1)` share one Brownian path.
    pub noise_refinement: usize,
}

impl SimConfig {
    pub fn new(h: f64, n_paths: usize, seed: u64) -> Self {
        Self {
            h,
            n_paths,
            seed,
            noise_refinement: 1,
        }
    }
}

/// One law to simulate, optionally recording `½∫|(K − K_ref)_player X|² dt`.
#[derive(Clone, Copy)]
pub struct LawRun<'r, 'a> {
    pub law: &'r FeedbackLaw<'a>,
    pub probe: Option<(&'r FeedbackLaw<'a>, Player)>,
}

impl<'r, 'a> LawRun<'r, 'a> {
    pub fn plain(law: &'r FeedbackLaw<'a>) -> Self {
        Self { law, probe: None }
    }
}

/// Per-path outcomes of one law.
#[derive(Debug, Clone, Serialize)]
pub struct SimBatch {
    pub eps: f64,
    /// Effective step.
    pub h: f64,
    pub n_steps: usize,
    pub n_paths: usize,
    pub seed: u64,
    pub x0: Vec<f64>,
    pub costs: Vec<f64>,
    /// Row-major `n_paths × n` terminal states.
    pub terminal: Vec<f64>,
    pub deviation: Option<Vec<f64>>,
    /// Sample mean of `|X(t_k)|²` at every step.
    pub second_moment: Vec<f64>,
}

impl SimBatch {
    pub fn summary_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Summary {
            mean: f64,
            stderr: f64,
            n_paths: usize,
            h: f64,
            seed: u64,
        }
        let (mean, stderr) = mc_objective(self);
        Ok(serde_json::to_string_pretty(&Summary {
            mean,
            stderr,
            n_paths: self.n_paths,
            h: self.h,
            seed: self.seed,
        })?)
    }

    /// CSV with one row per path: index, cost, terminal state.
    pub fn per_path_csv(&self) -> String {
        let n = self.x0.len();
        let mut header = vec!["path".to_string(), "cost".to_string()];
        header.extend((1..=n).map(|i| format!("x_T_{i}")));
        let rows = (0..self.n_paths).map(|p| {
            [p as f64, self.costs[p]]
                .into_iter()
                .chain(self.terminal[p * n..(p + 1) * n].iter().copied())
                .collect::<Vec<_>>()
        });
        csv_text(&header, rows)
    }
}

/// Sum with `O(log n)` round-off growth, independent of traversal order within halves.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        xs.iter().sum()
    } else {
        let (a, b) = xs.split_at(xs.len() / 2);
        pairwise_sum(a) + pairwise_sum(b)
    }
}

/// Sample mean and standard error of `xs`.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = pairwise_sum(xs) / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&dev) / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Sample mean and standard error of the per-path cost.
pub fn mc_objective(batch: &SimBatch) -> (f64, f64) {
    mean_stderr(&batch.costs)
}

/// Mean and standard error of the pathwise difference `a − b`.
pub fn paired_stats(a: &[f64], b: &[f64]) -> (f64, f64) {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    mean_stderr(&d)
}

/// Per-step matrices of one law: transition, running-cost weight, probe weight.
struct StepTables {
    transition: Vec<f64>,
    weight: Vec<f64>,
    probe: Option<Vec<f64>>,
}

fn push_flat(out: &mut Vec<f64>, m: &Mat) {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(m[(i, j)]);
        }
    }
}

/// Paths advanced together; per-path arithmetic does not depend on it.
const PATH_BLOCK: usize = 64;

/// Scratch state for one block of paths, stored `[state][path]`.
struct PathBlock {
    n: usize,
    n_steps: usize,
    kicks: Vec<f64>,
    x: Vec<f64>,
    xn: Vec<f64>,
    cost: [f64; PATH_BLOCK],
    dev: [f64; PATH_BLOCK],
    c_prev: [f64; PATH_BLOCK],
    d_prev: [f64; PATH_BLOCK],
    norm2: [f64; PATH_BLOCK],
}

impl PathBlock {
    fn new(n: usize, n_steps: usize) -> Self {
        Self {
            n,
            n_steps,
            kicks: vec![0.0; n_steps * n * PATH_BLOCK],
            x: vec![0.0; n * PATH_BLOCK],
            xn: vec![0.0; n * PATH_BLOCK],
            cost: [0.0; PATH_BLOCK],
            dev: [0.0; PATH_BLOCK],
            c_prev: [0.0; PATH_BLOCK],
            d_prev: [0.0; PATH_BLOCK],
            norm2: [0.0; PATH_BLOCK],
        }
    }

    /// `out[p] = xᵀ W x` for every path.
    fn quad_all(w: &[f64], x: &[f64], n: usize, out: &mut [f64; PATH_BLOCK]) {
        out.fill(0.0);
        for i in 0..n {
            let xi = &x[i * PATH_BLOCK..(i + 1) * PATH_BLOCK];
            for j in 0..n {
                let wij = w[i * n + j];
                let xj = &x[j * PATH_BLOCK..(j + 1) * PATH_BLOCK];
                for p in 0..PATH_BLOCK {
                    out[p] += wij * xi[p] * xj[p];
                }
            }
        }
    }

    fn run(
        &mut self,
        table: &StepTables,
        x0: &[f64],
        h: f64,
        width: usize,
        first: usize,
        batch: &mut SimBatch,
    ) -> Result<()> {
        let (n, nn) = (self.n, self.n * self.n);
        for (row, &v) in self.x.chunks_exact_mut(PATH_BLOCK).zip(x0) {
            row.fill(v);
        }
        self.cost.fill(0.0);
        self.dev.fill(0.0);
        Self::quad_all(&table.weight[..nn], &self.x, n, &mut self.c_prev);
        if let Some(pw) = &table.probe {
            Self::quad_all(&pw[..nn], &self.x, n, &mut self.d_prev);
        }
        let x0_norm2: f64 = x0.iter().map(|v| v * v).sum();
        batch.second_moment[0] += x0_norm2 * width as f64;
        let mut c_next = [0.0; PATH_BLOCK];
        for k in 0..self.n_steps {
            let mk = &table.transition[k * nn..(k + 1) * nn];
            let kick = &self.kicks[k * n * PATH_BLOCK..(k + 1) * n * PATH_BLOCK];
            self.xn.copy_from_slice(kick);
            for (out, mrow) in self.xn.chunks_exact_mut(PATH_BLOCK).zip(mk.chunks_exact(n)) {
                for (&mij, xj) in mrow.iter().zip(self.x.chunks_exact(PATH_BLOCK)) {
                    for (o, &v) in out.iter_mut().zip(xj) {
                        *o += mij * v;
                    }
                }
            }
            std::mem::swap(&mut self.x, &mut self.xn);
            self.norm2.fill(0.0);
            for xi in self.x.chunks_exact(PATH_BLOCK) {
                for (acc, &v) in self.norm2.iter_mut().zip(xi) {
                    *acc += v * v;
                }
            }
            let limit = PATH_BLOWUP * PATH_BLOWUP;
            if let Some(p) = (0..width).find(|&p| self.norm2[p].is_nan() || self.norm2[p] > limit) {
                return Err(Error::PathBlowUp {
                    path: first + p,
                    t: (k + 1) as f64 * h,
                });
            }
            batch.second_moment[k + 1] += pairwise_sum(&self.norm2[..width]);
            let next = (k + 1) * nn..(k + 2) * nn;
            Self::quad_all(&table.weight[next.clone()], &self.x, n, &mut c_next);
            for ((c, &a), &b) in self.cost.iter_mut().zip(&self.c_prev).zip(&c_next) {
                *c += 0.5 * h * (a + b);
            }
            self.c_prev = c_next;
            if let Some(pw) = &table.probe {
                Self::quad_all(&pw[next], &self.x, n, &mut c_next);
                for ((d, &a), &b) in self.dev.iter_mut().zip(&self.d_prev).zip(&c_next) {
                    *d += 0.5 * h * (a + b);
                }
                self.d_prev = c_next;
            }
        }
        batch.costs.extend_from_slice(&self.cost[..width]);
        for p in 0..width {
            batch
                .terminal
                .extend((0..n).map(|i| self.x[i * PATH_BLOCK + p]));
        }
        if let Some(v) = batch.deviation.as_mut() {
            v.extend_from_slice(&self.dev[..width]);
        }
        Ok(())
    }
}

/// Simulates every law in `runs` on the same Brownian paths.
pub fn simulate_coupled(
    spec: &GameSpec,
    eps: f64,
    runs: &[LawRun<'_, '_>],
    x0: &[f64],
    cfg: &SimConfig,
) -> Result<Vec<SimBatch>> {
    spec.ensure_valid()?;
    check_eps(eps)?;
    check_x0(spec, x0)?;
    let limit = MAX_STEP_OVER_EPS * eps;
    if cfg.h.is_nan() || cfg.h <= 0.0 || cfg.h > limit * (1.0 + 1e-12) {
        return Err(Error::StepTooLarge { h: cfg.h, limit });
    }
    if cfg.n_paths == 0 || cfg.noise_refinement == 0 {
        return Err(Error::InvalidArgument(
            "n_paths and noise_refinement must be at least 1".into(),
        ));
    }
    let horizon = spec.horizon;
    let n_steps = (horizon / cfg.h - 1e-9).ceil().max(1.0) as usize;
    let h = horizon / n_steps as f64;
    let d = spec.dims;
    let n = d.n();
    let m = d.m1 + d.m2;
    let compact = assemble_compact(spec, eps)?;
    let ident = Mat::identity(n, n);

    let tables: Vec<StepTables> = runs
        .iter()
        .map(|run| {
            let mut t = StepTables {
                transition: Vec::with_capacity((n_steps + 1) * n * n),
                weight: Vec::with_capacity((n_steps + 1) * n * n),
                probe: run.probe.map(|_| Vec::with_capacity((n_steps + 1) * n * n)),
            };
            for k in 0..=n_steps {
                let time = k as f64 * h;
                let gain = run.law.stacked_gain(time);
                let closed = &compact.a_eps + &compact.b_eps * &gain;
                push_flat(&mut t.transition, &(&ident + closed * h));
                let w = (&compact.q + gain.transpose() * &compact.r * &gain) * 0.5;
                push_flat(&mut t.weight, &w);
                if let (Some(buf), Some((reference, player))) = (t.probe.as_mut(), run.probe) {
                    let diff = gain - reference.stacked_gain(time);
                    let (start, rows) = match player {
                        Player::Maximizer => (0, d.k1),
                        Player::Minimizer => (d.k1, d.k2),
                    };
                    let block = diff.rows(start, rows).into_owned();
                    push_flat(buf, &(block.transpose() * block * 0.5));
                }
            }
            t
        })
        .collect();

    let sigma: Vec<f64> = {
        let mut v = Vec::with_capacity(n * m);
        push_flat(&mut v, &compact.sigma_eps);
        v
    };
    let r = cfg.noise_refinement;
    let fine_scale = (h / r as f64).sqrt();

    let mut batches: Vec<SimBatch> = runs
        .iter()
        .map(|run| SimBatch {
            eps,
            h,
            n_steps,
            n_paths: cfg.n_paths,
            seed: cfg.seed,
            x0: x0.to_vec(),
            costs: Vec::with_capacity(cfg.n_paths),
            terminal: Vec::with_capacity(cfg.n_paths * n),
            deviation: run.probe.map(|_| Vec::with_capacity(cfg.n_paths)),
            second_moment: vec![0.0; n_steps + 1],
        })
        .collect();

    let mut normals = vec![0.0; n_steps * r * m];
    let mut dw = vec![0.0; m];
    let mut block = PathBlock::new(n, n_steps);
    let mut first = 0;
    while first < cfg.n_paths {
        let width = PATH_BLOCK.min(cfg.n_paths - first);
        // Noise kicks laid out as [step][state][path] for contiguous inner loops.
        for p in 0..width {
            NoiseStream::new(cfg.seed, (first + p) as u64).fill_normal(&mut normals);
            for k in 0..n_steps {
                let fine = &normals[k * r * m..(k + 1) * r * m];
                for (c, w) in dw.iter_mut().enumerate() {
                    *w = fine.iter().skip(c).step_by(m).sum::<f64>() * fine_scale;
                }
                for i in 0..n {
                    let row = &sigma[i * m..(i + 1) * m];
                    block.kicks[(k * n + i) * PATH_BLOCK + p] =
                        row.iter().zip(&dw).map(|(a, b)| a * b).sum();
                }
            }
        }
        for (table, batch) in tables.iter().zip(batches.iter_mut()) {
            block.run(table, x0, h, width, first, batch)?;
        }
        first += width;
    }
    for b in &mut batches {
        for v in &mut b.second_moment {
            *v /= cfg.n_paths as f64;
        }
    }
    Ok(batches)
}

/// Simulates a single law.
pub fn simulate_game(
    spec: &GameSpec,
    eps: f64,
    law: &FeedbackLaw<'_>,
    x0: &[f64],
    cfg: &SimConfig,
) -> Result<SimBatch> {
    let mut out = simulate_coupled(spec, eps, &[LawRun::plain(law)], x0, cfg)?;
    Ok(out.remove(0))
}

/// Objectives of the exact and approximate laws on common paths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapEstimate {
    pub exact: (f64, f64),
    pub approximate: (f64, f64),
    /// `J(exact) − J(approximate)`.
    pub gap: f64,
    pub gap_stderr: f64,
}

pub fn approx_gap(
    spec: &GameSpec,
    eps: f64,
    full: &RiccatiSolution,
    red: &ReducedSolution,
    x0: &[f64],
    cfg: &SimConfig,
) -> Result<GapEstimate> {
    let exact = make_feedback(FeedbackKind::Exact, SolutionRef::Full(full), spec)?;
    let approx = make_feedback(FeedbackKind::Approximate, SolutionRef::Reduced(red), spec)?;
    let b = simulate_coupled(
        spec,
        eps,
        &[LawRun::plain(&exact), LawRun::plain(&approx)],
        x0,
        cfg,
    )?;
    let (gap, gap_stderr) = paired_stats(&b[0].costs, &b[1].costs);
    Ok(GapEstimate {
        exact: mc_objective(&b[0]),
        approximate: mc_objective(&b[1]),
        gap,
        gap_stderr,
    })
}

/// One unilateral deviation from the exact saddle point.
#[derive(Debug, Clone, Serialize)]
pub struct Perturbation {
    pub player: Player,
    pub rho: f64,
    pub objective: (f64, f64),
    /// `J(perturbed) − J(saddle)` on common paths, with its standard error.
    pub gap: f64,
    pub gap_stderr: f64,
    /// Wrong-signed gap beyond three standard errors.
    pub violated: bool,
    /// For minimiser deviations: `½E∫|u2 − F21 X1 − F22 X2|² dt` on the same paths.
    pub completion: Option<f64>,
    /// Mean and standard error of `gap − completion` per path.
    pub completion_residual: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SaddleReport {
    pub saddle: (f64, f64),
    pub perturbations: Vec<Perturbation>,
    pub violations: usize,
    /// Minimiser deviations whose gap differs from the completion term beyond three standard errors.
    pub completion_mismatches: usize,
}

/// Random `rows × cols` matrix with Frobenius norm `rho`.
fn random_offset(noise: &mut NoiseStream, rows: usize, cols: usize, rho: f64) -> Mat {
    let mut m = Mat::from_fn(rows, cols, |_, _| noise.next_normal());
    let norm = m.norm();
    if norm > 0.0 {
        m *= rho / norm;
    }
    m
}

/// Tests the saddle inequality against `n_perturbations` random constant gain
/// offsets per player and per radius in `rhos`.
pub fn saddle_check(
    spec: &GameSpec,
    eps: f64,
    full: &RiccatiSolution,
    x0: &[f64],
    n_perturbations: usize,
    rhos: &[f64],
    cfg: &SimConfig,
) -> Result<SaddleReport> {
    let saddle = make_feedback(FeedbackKind::Exact, SolutionRef::Full(full), spec)?;
    let d = spec.dims;
    let mut offsets = NoiseStream::new(cfg.seed, u64::MAX);
    let mut laws = Vec::new();
    let mut meta = Vec::new();
    for &rho in rhos {
        for player in [Player::Maximizer, Player::Minimizer] {
            let rows = match player {
                Player::Maximizer => d.k1,
                Player::Minimizer => d.k2,
            };
            for _ in 0..n_perturbations {
                let offset = random_offset(&mut offsets, rows, d.n(), rho);
                laws.push(saddle.perturbed(player, offset)?);
                meta.push((player, rho));
            }
        }
    }
    let mut runs = vec![LawRun::plain(&saddle)];
    runs.extend(laws.iter().zip(&meta).map(|(law, &(player, _))| LawRun {
        law,
        probe: (player == Player::Minimizer).then_some((&saddle, player)),
    }));
    let batches = simulate_coupled(spec, eps, &runs, x0, cfg)?;
    let base = &batches[0];
    let mut perturbations = Vec::with_capacity(meta.len());
    for (batch, &(player, rho)) in batches[1..].iter().zip(&meta) {
        let (gap, gap_stderr) = paired_stats(&batch.costs, &base.costs);
        let violated = match player {
            Player::Minimizer => gap < -3.0 * gap_stderr,
            Player::Maximizer => gap > 3.0 * gap_stderr,
        };
        let (completion, completion_residual) = match &batch.deviation {
            Some(dev) => {
                let resid: Vec<f64> = (0..batch.n_paths)
                    .map(|p| batch.costs[p] - base.costs[p] - dev[p])
                    .collect();
                (Some(mean_stderr(dev).0), Some(mean_stderr(&resid)))
            }
            None => (None, None),
        };
        perturbations.push(Perturbation {
            player,
            rho,
            objective: mc_objective(batch),
            gap,
            gap_stderr,
            violated,
            completion,
            completion_residual,
        });
    }
    let violations = perturbations.iter().filter(|p| p.violated).count();
    let completion_mismatches = perturbations
        .iter()
        .filter_map(|p| p.completion_residual)
        .filter(|(m, se)| m.abs() > 3.0 * se)
        .count();
    Ok(SaddleReport {
        saddle: mc_objective(base),
        perturbations,
        violations,
        completion_mismatches,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixture_s1;
    use crate::ode::ToleranceConfig;
    use crate::riccati::solve_full;

    fn quiet_s1() -> GameSpec {
        let mut spec = fixture_s1();
        spec.sigma1.fill(0.0);
        spec.sigma2.fill(0.0);
        spec
    }

    #[test]
    fn pairwise_and_stats() {
        let xs: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&xs), 499500.0);
        assert_eq!(mean_stderr(&[2.5; 10]), (2.5, 0.0));
    }

    #[test]
    fn step_limit_enforced() {
        let spec = fixture_s1();
        let full = solve_full(&spec, 0.1, &ToleranceConfig::default(), None).unwrap();
        let law = make_feedback(FeedbackKind::Exact, SolutionRef::Full(&full), &spec).unwrap();
        let err = simulate_game(&spec, 0.1, &law, &[1.0, 1.0], &SimConfig::new(0.02, 4, 1));
        assert!(matches!(err, Err(Error::StepTooLarge { .. })));
    }

    #[test]
    fn quiet_zero_state_stays_zero() {
        let spec = quiet_s1().zero_cost();
        let full = solve_full(&spec, 0.1, &ToleranceConfig::default(), None).unwrap();
        let law = make_feedback(FeedbackKind::Exact, SolutionRef::Full(&full), &spec).unwrap();
        let b = simulate_game(&spec, 0.1, &law, &[0.0, 0.0], &SimConfig::new(0.01, 3, 9)).unwrap();
        assert!(b.costs.iter().chain(&b.terminal).all(|v| *v == 0.0));
    }

    #[test]
    fn quiet_paths_identical_across_seeds() {
        let spec = quiet_s1();
        let full = solve_full(&spec, 0.1, &ToleranceConfig::default(), None).unwrap();
        let law = make_feedback(FeedbackKind::Exact, SolutionRef::Full(&full), &spec).unwrap();
        let a = simulate_game(&spec, 0.1, &law, &[1.0, 1.0], &SimConfig::new(0.01, 3, 1)).unwrap();
        let b = simulate_game(&spec, 0.1, &law, &[1.0, 1.0], &SimConfig::new(0.01, 5, 2)).unwrap();
        assert!(a.costs.iter().chain(&b.costs).all(|c| *c == a.costs[0]));
    }

    #[test]
    fn fast_relaxation_without_control() {
        let spec = quiet_s1().zero_cost();
        let eps = 1e-3;
        let mut horizon_spec = spec.clone();
        horizon_spec.horizon = 10.0 * eps;
        horizon_spec.a12.fill(0.0);
        horizon_spec.a21.fill(0.0);
        let full = solve_full(&horizon_spec, eps, &ToleranceConfig::default(), None).unwrap();
        let law =
            make_feedback(FeedbackKind::Exact, SolutionRef::Full(&full), &horizon_spec).unwrap();
        let cfg = SimConfig::new(eps / 1000.0, 1, 0);
        let b = simulate_game(&horizon_spec, eps, &law, &[0.0, 1.0], &cfg).unwrap();
        let x2 = b.terminal[1];
        assert!((x2 - (-10f64).exp()).abs() < 1e-6, "x2 = {x2}");
    }

    #[test]
    fn quiet_cost_converges_to_deterministic_value() {
        let spec = quiet_s1();
        let eps = 0.1;
        let full = solve_full(&spec, eps, &ToleranceConfig::default(), None).unwrap();
        let law = make_feedback(FeedbackKind::Exact, SolutionRef::Full(&full), &spec).unwrap();
        let value = super::super::closed_form_value(&full, &spec, &[1.0, 1.0]).unwrap();
        let errs: Vec<f64> = [2e-3, 1e-3, 5e-4]
            .iter()
            .map(|&h| {
                let b =
                    simulate_game(&spec, eps, &law, &[1.0, 1.0], &SimConfig::new(h, 1, 0)).unwrap();
                (b.costs[0] - value).abs()
            })
            .collect();
        assert!(
            errs[1] < 0.6 * errs[0] && errs[2] < 0.6 * errs[1],
            "{errs:?}"
        );
    }

    #[test]
    fn refinement_couples_brownian_paths() {
        let spec = fixture_s1().zero_cost();
        let full = solve_full(&spec, 0.1, &ToleranceConfig::default(), None).unwrap();
        let law = make_feedback(FeedbackKind::Exact, SolutionRef::Full(&full), &spec).unwrap();
        let fine =
            simulate_game(&spec, 0.1, &law, &[0.0, 0.0], &SimConfig::new(5e-3, 4, 3)).unwrap();
        let coarse_cfg = SimConfig {
            noise_refinement: 2,
            ..SimConfig::new(1e-2, 4, 3)
        };
        let coarse = simulate_game(&spec, 0.1, &law, &[0.0, 0.0], &coarse_cfg).unwrap();
        for (a, b) in fine.terminal.iter().zip(&coarse.terminal) {
            assert!((a - b).abs() < 0.2, "{a} vs {b}");
        }
    }
}
