//! Writes the bundled fixture trees and demonstrations to a directory
//! (default `fixtures/`).

use std::fs;
use std::path::PathBuf;

use tree_motion::fixtures::{conflicting_demos, CONFLICTING_ARM, STABILITY_ARM};

fn main() -> tree_motion::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "fixtures".into()));
    fs::create_dir_all(&dir)?;
    fs::write(dir.join("stability_arm.json"), STABILITY_ARM.trim_start())?;
    fs::write(dir.join("conflicting_arm.json"), CONFLICTING_ARM.trim_start())?;
    for (i, tr) in conflicting_demos().trajectories.iter().enumerate() {
        tr.write_csv(fs::File::create(dir.join(format!("conflicting_demo_{i}.csv")))?, None)?;
    }
    println!("wrote fixtures to {}", dir.display());
    Ok(())
}
