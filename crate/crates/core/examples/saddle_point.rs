//! Perturbs each player's exact feedback gain by random constant matrices and
//! checks the saddle inequality on common Brownian paths.

use slowfast_game::game::{saddle_check, Player, SimConfig};
use slowfast_game::riccati::solve_full;
use slowfast_game::{fixture_s1, ToleranceConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = fixture_s1();
    let eps = 0.1;
    let full = solve_full(&spec, eps, &ToleranceConfig::default(), None)?;
    let cfg = SimConfig::new(2.5e-4, 4000, 5);
    let report = saddle_check(&spec, eps, &full, &[1.0, 1.0], 20, &[0.1, 0.5, 1.0], &cfg)?;
    println!(
        "J(saddle) = {:.5} ± {:.5}",
        report.saddle.0, report.saddle.1
    );
    for rho in [0.1, 0.5, 1.0] {
        for player in [Player::Maximizer, Player::Minimizer] {
            let group: Vec<_> = report
                .perturbations
                .iter()
                .filter(|p| p.rho == rho && p.player == player)
                .collect();
            let worst = group
                .iter()
                .map(|p| p.gap / p.gap_stderr)
                .fold(f64::NAN, |a, b| match player {
                    Player::Minimizer => a.min(b),
                    Player::Maximizer => a.max(b),
                });
            let resid = group
                .iter()
                .filter_map(|p| p.completion_residual)
                .map(|(m, se)| (m / se).abs())
                .fold(0.0, f64::max);
            println!(
                "rho = {rho}, {player:?}: most adverse gap/stderr {worst:+.2}, worst completion residual {resid:.2} stderr"
            );
        }
    }
    println!(
        "violations: {}, completion mismatches: {}",
        report.violations, report.completion_mismatches
    );
    Ok(())
}
