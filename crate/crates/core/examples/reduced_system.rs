//! The `eps = 0` problem: stabilising ARE root for the fast block, the
//! reduced Riccati equation for the slow block, and the limiting value.

use slowfast_game::game::limiting_value;
use slowfast_game::reduced::{solve_reduced, verify_reduced_system};
use slowfast_game::{fixture_s1, ToleranceConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = fixture_s1();
    let red = solve_reduced(&spec, &ToleranceConfig::default())?;
    println!(
        "P22bar = {:.12} (sqrt(2) - 1 = {:.12})",
        red.p22bar[(0, 0)],
        2f64.sqrt() - 1.0
    );
    println!(
        "S = A22 + Delta2 P22bar = {:.12}, margin gamma = {:.6}",
        red.s[(0, 0)],
        red.gamma
    );
    println!(
        "Atilde = {:.6}, M = {:.6}, N = {:.6}, Lambda = {:.6}",
        red.coeffs.atilde[(0, 0)],
        red.coeffs.m[(0, 0)],
        red.coeffs.n[(0, 0)],
        red.coeffs.lambda[(0, 0)]
    );
    for t in [0.0, 0.5, 1.0, 1.5, 2.0] {
        println!(
            "t = {t:.1}: P11bar = {:.6}, P12bar = {:.6}",
            red.p11bar(t)[(0, 0)],
            red.p12bar_at(t, &spec)[(0, 0)]
        );
    }
    let (r_dre, r_g1, r_g2) = verify_reduced_system(&red, &spec);
    println!("residuals: DRE {r_dre:.1e}, off-diagonal {r_g1:.1e}, ARE {r_g2:.1e}");
    println!(
        "limiting value at x0 = (1, 1): {:.6}",
        limiting_value(&red, &spec, &[1.0, 1.0])?
    );
    Ok(())
}
