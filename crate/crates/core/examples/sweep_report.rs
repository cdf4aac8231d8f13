//! A small test-case-I sweep from an inline config, written to `sweep_out/`.

use std::path::Path;

use unsat_poro::runner::{emit_report, parse_config, report_table, run_sweep};

const CONFIG: &str = r#"
schema = 1
scenario = "test1"
output_dir = "sweep_out"

[grid]
nx = 10
ny = 10

[sweep]
schemes = ["Newton", "FS-MP", "FSL"]
depths = [0, 3]
alphas = [0.5, 1.0]
"#;

fn main() -> unsat_poro::Result<()> {
    let cfg = parse_config(CONFIG)?;
    let report = run_sweep(&cfg)?;
    print!("{}", report_table(&report));
    let dir = std::env::args()
        .nth(1)
        .unwrap_or_else(|| cfg.output_dir.display().to_string());
    for f in emit_report(&report, Path::new(&dir))? {
        println!("wrote {}", f.display());
    }
    Ok(())
}
