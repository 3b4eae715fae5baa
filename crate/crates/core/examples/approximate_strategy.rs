//! Objective gap between the exact saddle law and the `eps`-free approximate
//! law, on common Brownian paths, across a short `eps` sweep.

use slowfast_game::asymptotics::fit_rate;
use slowfast_game::game::{approx_gap, SimConfig};
use slowfast_game::reduced::solve_reduced;
use slowfast_game::riccati::solve_full;
use slowfast_game::{fixture_s1, ToleranceConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = fixture_s1();
    let tol = ToleranceConfig::default();
    let red = solve_reduced(&spec, &tol)?;
    let x0 = [1.0, 1.0];
    let n_paths: usize = std::env::args()
        .nth(1)
        .map(|s| s.parse())
        .transpose()?
        .unwrap_or(20_000);
    let mut points = Vec::new();
    for eps in [1e-1, 3e-2, 1e-2] {
        let full = solve_full(&spec, eps, &tol, None)?;
        // A fine step keeps the Euler bias well below the O(eps) gap.
        let cfg = SimConfig::new(eps / 50.0, n_paths, 11);
        let g = approx_gap(&spec, eps, &full, &red, &x0, &cfg)?;
        println!(
            "eps = {eps:.0e}: J_exact = {:.5} ± {:.5}, J_approx = {:.5}, gap = {:+.6} ± {:.6}",
            g.exact.0, g.exact.1, g.approximate.0, g.gap, g.gap_stderr
        );
        points.push((eps, g.gap.abs()));
    }
    let fit = fit_rate(&points)?;
    println!("slope of |gap|: {:.3}", fit.slope);
    Ok(())
}
