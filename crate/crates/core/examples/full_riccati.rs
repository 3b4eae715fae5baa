//! Solves the full block Riccati system at a few values of `eps` and prints
//! the initial blocks, the assembled residual and the closed-form value.

use slowfast_game::game::closed_form_value;
use slowfast_game::riccati::{riccati_residual, solve_full};
use slowfast_game::{fixture_s1, ToleranceConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = fixture_s1();
    let tol = ToleranceConfig::default();
    for eps in [1.0, 0.1, 0.01, 0.001] {
        let sol = solve_full(&spec, eps, &tol, None)?;
        let b = sol.eval(0.0)?;
        println!(
            "eps = {eps:<6} steps {:>5}  P11(0) = {:.6}  P12(0) = {:.6}  P22(0) = {:.6}  residual {:.1e}  V = {:.6}",
            sol.n_steps(),
            b.p11[(0, 0)],
            b.p12[(0, 0)],
            b.p22[(0, 0)],
            riccati_residual(&sol, &spec)?,
            closed_form_value(&sol, &spec, &[1.0, 1.0])?
        );
    }
    Ok(())
}
