//! Sweeps `eps` on the reference fixture and prints errors and fitted rates.

use slowfast_game::asymptotics::{run_sweep, SweepSettings, DEFAULT_EPS_SWEEP, SERIES};
use slowfast_game::{fixture_s1, ToleranceConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = fixture_s1();
    let settings = SweepSettings {
        tol: ToleranceConfig::default(),
        delta: None,
        x0: vec![1.0, 1.0],
    };
    let sweep = run_sweep(&spec, &DEFAULT_EPS_SWEEP, &settings)?;
    print!("{}", sweep.to_csv());
    for name in &SERIES[..SERIES.len() - 1] {
        match sweep.fit(name) {
            Some(Ok(fit)) => println!(
                "{name:>14}: slope {:.3} (r² {:.4})",
                fit.slope, fit.r_squared
            ),
            _ => println!("{name:>14}: no fit"),
        }
    }
    Ok(())
}
