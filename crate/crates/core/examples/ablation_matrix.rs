//! k and standardization-mode ablation on a planted-offset model.
//!
//! Items have latents z; images and concrete texts are z plus small noise,
//! abstract texts add a component in a fixed 8-dimensional subspace and a
//! fixed offset. The table reports H@1 and the mean cosine between each
//! query and its own image, for the unshifted queries and for the shift at
//! several k in both stats modes.
//!
//!     cargo run --release --example ablation_matrix

use act::corpus::{Query, QuerySet};
use act::embedding::EmbeddingMatrix;
use act::retrieval::{build_gallery, evaluate, RetrievalGallery};
use act::shift::{apply_shift, fit_shift, Provenance, ShiftOptions, StatsMode};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

const DIM: usize = 64;
const SUBSPACE: usize = 8;
const FIT: usize = 400;
const ITEMS: usize = 500;
const LATENT_STD: f64 = 0.1;

struct World {
    abstract_text: Vec<Vec<f64>>,
    concrete_text: Vec<Vec<f64>>,
    image: Vec<Vec<f64>>,
}

fn world(seed: u64) -> World {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let std_normal = Normal::new(0.0, 1.0).expect("valid");
    let mut draw = |n: usize, scale: f64| -> Vec<f64> { (0..n).map(|_| std_normal.sample(&mut rng) * scale).collect() };
    let basis = DMatrix::from_vec(DIM, SUBSPACE, draw(DIM * SUBSPACE, 1.0)).qr().q();
    let offset = {
        let v = draw(DIM, 1.0);
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.into_iter().map(|x| x / n).collect::<Vec<_>>()
    };
    let mut w = World {
        abstract_text: Vec::new(),
        concrete_text: Vec::new(),
        image: Vec::new(),
    };
    for _ in 0..ITEMS {
        let z = draw(DIM, LATENT_STD);
        let u = draw(SUBSPACE, 0.5);
        let planted = &basis * nalgebra::DVector::from_vec(u);
        let noisy = |extra: &[f64], noise: Vec<f64>| -> Vec<f64> {
            (0..DIM)
                .map(|d| z[d] + extra.get(d).copied().unwrap_or(0.0) + noise[d])
                .collect()
        };
        w.image.push(noisy(&[], draw(DIM, 0.05)));
        w.concrete_text.push(noisy(&[], draw(DIM, 0.05)));
        let shift: Vec<f64> = (0..DIM).map(|d| planted[d] + offset[d]).collect();
        w.abstract_text.push(noisy(&shift, draw(DIM, 0.05)));
    }
    w
}

fn matrix(prefix: &str, rows: &[Vec<f64>]) -> EmbeddingMatrix {
    let ids = (0..rows.len()).map(|i| format!("{prefix}{i}")).collect();
    let data: Vec<f64> = rows.iter().flatten().copied().collect();
    EmbeddingMatrix::from_f64_rows(DIM, ids, &data).expect("finite rows")
}

fn mean_own_cosine(queries: &EmbeddingMatrix, gallery: &RetrievalGallery) -> f64 {
    let total: f64 = (0..queries.len())
        .map(|i| gallery.scores(queries.row(i)).expect("same dim")[FIT + i])
        .sum();
    total / queries.len() as f64
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let w = world(1);
    let gallery = build_gallery(&matrix("img", &w.image))?;
    let pairs_a = matrix("item", &w.abstract_text[..FIT]);
    let pairs_c = matrix("item", &w.concrete_text[..FIT]);
    let queries = QuerySet::new(
        (FIT..ITEMS)
            .map(|i| Query {
                id: format!("q{i}"),
                text: String::new(),
                relevant_image_ids: vec![format!("img{i}")],
            })
            .collect(),
    )?;
    let held_out = {
        let data: Vec<f64> = w.abstract_text[FIT..].iter().flatten().copied().collect();
        EmbeddingMatrix::from_f64_rows(DIM, queries.ids(), &data)?
    };

    let row = |label: String, q: &EmbeddingMatrix| -> Result<(), Box<dyn std::error::Error>> {
        let report = evaluate(q, &queries, &gallery, &[1, 10])?;
        println!(
            "{label:<22} H@1 {:.2}  H@10 {:.2}  own-image cosine {:.3}",
            report.at(1).expect("k=1").hit_rate,
            report.at(10).expect("k=10").hit_rate,
            mean_own_cosine(q, &gallery)
        );
        Ok(())
    };
    row("unshifted".into(), &held_out)?;
    for k in [1, 4, 8, 16, DIM] {
        let fit = fit_shift(
            &pairs_c,
            &pairs_a,
            ShiftOptions {
                k,
                ..Default::default()
            },
            Provenance::default(),
        )?;
        for mode in [StatsMode::Batch, StatsMode::Fallback] {
            let shifted = apply_shift(&held_out, &fit.characterization, mode)?;
            row(format!("k={k:<3} {mode:?}"), &shifted)?;
        }
    }
    Ok(())
}
