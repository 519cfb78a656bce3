//! Regenerates the synthetic one-year recording shipped in `data/`.

use std::fs::File;
use std::path::PathBuf;

use gridfreq::reproduce::{
    synthetic_extrema, write_extrema_csv, SYNTHETIC_SAMPLES, SYNTHETIC_SEED,
};

fn main() -> std::io::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| {
            PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/synthetic_2021_900s.csv")
        });
    let e = synthetic_extrema(SYNTHETIC_SEED, SYNTHETIC_SAMPLES);
    write_extrema_csv(&e, File::create(&path)?)?;
    eprintln!("wrote {} rows to {}", e.len(), path.display());
    Ok(())
}
