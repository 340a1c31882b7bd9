//! Writes the synthetic benchmark week to `data/week/`.
//!
//! ```text
//! cargo run --example synthetic_data -- data/week
//! ```

use std::path::PathBuf;

use volterra_dispatch::io::write_series;
use volterra_dispatch::synthetic::{
    base_generation, noisy_forecast, weekly_load, NOISE_LEVEL, NOISE_SEED,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(
        std::env::args()
            .nth(1)
            .unwrap_or_else(|| "data/week".into()),
    );
    std::fs::create_dir_all(&dir)?;
    let load = weekly_load();
    write_series(&dir.join("load.csv"), &load)?;
    write_series(&dir.join("base.csv"), &base_generation(&load))?;
    write_series(
        &dir.join("forecast.csv"),
        &noisy_forecast(&load, NOISE_LEVEL, NOISE_SEED)?,
    )?;
    Ok(())
}
