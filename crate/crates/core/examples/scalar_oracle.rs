//! Scalar games: solvability predicates, the closed-form reduced Riccati
//! solution, and the numerical solver checked against it.

use slowfast_game::linalg::Mat;
use slowfast_game::reduced::{reduced_coefficients, solve_reduced_dre};
use slowfast_game::scalar::{
    scalar_are_roots, scalar_conditions, scalar_dre_oracle, ScalarCoefficients,
};
use slowfast_game::{fixture_s1, GameSpec, ToleranceConfig};

fn report(name: &str, spec: &GameSpec) -> Result<(), Box<dyn std::error::Error>> {
    let cond = scalar_conditions(spec)?;
    let c = ScalarCoefficients::from_spec(spec)?;
    println!(
        "{name}: Atilde^2 - MN >= 0: {}, Atilde - sqrt|.| <= 0: {}, Delta2 Q2 < 0: {}, escape time-to-go {:?}",
        cond.cond_dre_a,
        cond.cond_dre_b,
        cond.cond_are,
        c.escape_time_to_go()
    );
    if let Ok((lo, hi)) = scalar_are_roots(spec) {
        println!("  ARE roots {lo:.6} and {hi:.6}");
    }
    let coeffs = reduced_coefficients(spec, &Mat::zeros(1, 1))?;
    match solve_reduced_dre(spec, &coeffs, &ToleranceConfig::new(1e-11, 1e-13)?) {
        Ok(dre) => {
            let worst = dre
                .grid
                .iter()
                .map(|&t| Ok((dre.eval(t)[(0, 0)] - scalar_dre_oracle(spec, &c, t)?).abs()))
                .collect::<Result<Vec<f64>, slowfast_game::Error>>()?
                .into_iter()
                .fold(0.0, f64::max);
            println!(
                "  P11bar(0) = {:.10}, max deviation from closed form {worst:.1e}",
                dre.eval(0.0)[(0, 0)]
            );
        }
        Err(e) => println!("  solver: {e}"),
    }
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    report("fixture", &fixture_s1())?;
    // Both predicates fail: the reduced equation escapes in finite time.
    let escaping = GameSpec::scalar(
        [1.0, 0.0, 0.0, -1.0],
        [1.0, 0.0, 0.0, 1.0],
        [1.0, 1.0],
        [1.5, 1.0],
        1.0,
    );
    report("escaping", &escaping)?;
    Ok(())
}
