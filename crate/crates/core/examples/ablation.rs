//! Paired runs on the synthetic benchmark: the hybrid model, the all-4D
//! stand-in, opacity resets and a threshold sweep. Prints the CSV table.
//!
//! cargo run --release --example ablation -- [matrix.toml]

use hybrid_gs::eval::{run_ablation, standard_variants, AblationMatrix, DataSource};
use hybrid_gs::io::SyntheticSpec;
use hybrid_gs::train::TrainConfig;

fn main() -> hybrid_gs::Result<()> {
    let matrix = match std::env::args().nth(1) {
        Some(path) => AblationMatrix::load(path)?,
        None => AblationMatrix {
            seed: 7,
            held_out: 0,
            data: DataSource::Synthetic(SyntheticSpec::default()),
            base: TrainConfig::default(),
            variants: standard_variants(&[0.2, 0.3, 0.4]),
        },
    };
    let table = run_ablation(&matrix)?;
    print!("{}", table.to_csv());
    Ok(())
}
