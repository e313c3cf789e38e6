//! The full acceptance suite at default resolution. One line per criterion
//! goes to stdout (run with `--nocapture` to watch it); the test fails if
//! any criterion fails.

use rotmcf::acceptance::{run_criterion, COUNT};
use rotmcf::ExperimentConfig;

#[test]
fn acceptance_criteria() {
    let work = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig { output_dir: work.path().join("out"), ..ExperimentConfig::default() };
    let mut failed = Vec::new();
    for id in 1..=COUNT {
        let r = run_criterion(id, &cfg, &work.path().join("determinism"));
        println!("{}", r.line());
        if !r.passed {
            failed.push(id);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
