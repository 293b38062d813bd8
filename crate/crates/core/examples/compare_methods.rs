//! Train and score all eight classifier variants on the default benchmark.
//! Pass a directory to keep `compare.csv` and `compare.txt`.

use lowshot::experiment::{cmd_compare, ExperimentConfig};

fn main() -> lowshot::Result<()> {
    let output_dir = std::env::args()
        .nth(1)
        .map(Into::into)
        .unwrap_or_else(|| std::env::temp_dir().join("lowshot-compare"));
    let cfg = ExperimentConfig {
        output_dir,
        ..ExperimentConfig::default()
    };
    let start = std::time::Instant::now();
    cmd_compare(&cfg, &mut std::io::stdout())?;
    println!("\n{:.1?} (written to {})", start.elapsed(), cfg.output_dir.display());
    Ok(())
}
