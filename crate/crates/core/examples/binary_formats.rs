//! Write and read back the ACTE embedding format and the ACTS shift format,
//! then show how a damaged file is reported.
//!
//!     cargo run --example binary_formats

use act::embedding::{decode_binary, encode_binary, EmbeddingMatrix};
use act::shift::{decode_characterization, encode_characterization, fit_shift, Provenance, ShiftOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random(rng: &mut ChaCha8Rng, rows: usize, dim: usize) -> EmbeddingMatrix {
    let ids = (0..rows).map(|i| format!("item-{i}")).collect();
    let data = (0..rows * dim).map(|_| rng.random_range(-1.0f32..1.0)).collect();
    EmbeddingMatrix::new(dim, ids, data).expect("valid shape")
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let abstract_side = random(&mut rng, 40, 16);
    let concrete_side = random(&mut rng, 40, 16);

    let bytes = encode_binary(&abstract_side);
    println!(
        "ACTE: {} rows x {} dims -> {} bytes",
        abstract_side.len(),
        abstract_side.dim(),
        bytes.len()
    );
    assert_eq!(decode_binary(&bytes)?, abstract_side);

    let fit = fit_shift(
        &concrete_side,
        &abstract_side,
        ShiftOptions {
            k: 6,
            ..Default::default()
        },
        Provenance {
            source: "random".into(),
            encoder: "example".into(),
            created_unix: 1_700_000_000,
            ..Default::default()
        },
    )?;
    let acts = encode_characterization(&fit.characterization);
    println!("ACTS: k={} -> {} bytes", fit.characterization.k(), acts.len());
    let back = decode_characterization(&acts)?;
    assert_eq!(encode_characterization(&back), acts);
    println!("provenance survives: {:?}", back.provenance);

    let mut damaged = bytes.clone();
    damaged[0] = b'X';
    println!("bad magic: {}", decode_binary(&damaged).unwrap_err());
    println!(
        "truncated: {}",
        decode_characterization(&acts[..acts.len() / 2]).unwrap_err()
    );
    Ok(())
}
