//! Writes the scalar reference fixture and its coupled variant as spec JSON,
//! ready for the `slowfast` CLI.

use slowfast_game::fixture_s1;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args().nth(1).unwrap_or_else(|| ".".into());
    std::fs::create_dir_all(&dir)?;
    let base = fixture_s1();
    let mut coupled = base.clone();
    coupled.b21[(0, 0)] = 0.5;
    for (name, spec) in [("s1.json", base), ("s1_coupled.json", coupled)] {
        let path = std::path::Path::new(&dir).join(name);
        std::fs::write(&path, spec.to_json_string()? + "\n")?;
        println!("wrote {}", path.display());
    }
    Ok(())
}
