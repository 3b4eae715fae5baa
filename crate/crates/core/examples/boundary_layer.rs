//! Integrates the boundary-layer system in stretched time and compares the
//! trajectory with its certified decay envelopes.

use slowfast_game::boundary::solve_boundary_layer;
use slowfast_game::reduced::solve_reduced;
use slowfast_game::{fixture_s1, ToleranceConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = fixture_s1();
    let tol = ToleranceConfig::default();
    let red = solve_reduced(&spec, &tol)?;
    let bl = solve_boundary_layer(&spec, &red, None, 20.0, &tol)?;
    println!(
        "gamma = {:.6}, delta = {:.6}, q2 = {:.6}, k1 = {:.4}, k2 = {:.4}",
        bl.gamma, bl.delta, bl.q2, bl.k1, bl.k2
    );
    println!(
        "{:>6} {:>12} {:>12} {:>12} {:>12}",
        "tau", "|P12hat|", "env12", "|P22hat|", "env22"
    );
    for tau in [0.0, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0] {
        let (p12, p22) = bl.eval(tau);
        println!(
            "{tau:>6.1} {:>12.3e} {:>12.3e} {:>12.3e} {:>12.3e}",
            p12.norm(),
            bl.envelope12(tau),
            p22.norm(),
            bl.envelope22(tau)
        );
    }
    println!(
        "envelope violations: {}, |P22hat| monotone: {}",
        bl.envelope_violations(0.0),
        bl.p22_monotone(tol.abs)
    );
    Ok(())
}
