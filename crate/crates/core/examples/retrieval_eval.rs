//! Rank a random gallery and score the rankings with R@K and H@K.
//!
//!     cargo run --example retrieval_eval

use act::corpus::{Query, QuerySet};
use act::embedding::EmbeddingMatrix;
use act::retrieval::{build_gallery, evaluate, topk};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const DIM: usize = 24;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let images: Vec<Vec<f32>> = (0..200)
        .map(|_| (0..DIM).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let image_ids: Vec<String> = (0..images.len()).map(|i| format!("img{i:03}")).collect();
    let gallery = build_gallery(&EmbeddingMatrix::from_rows(image_ids.clone(), images.clone())?)?;

    // each query is a noisy copy of its target image; the noise level grows
    // with the query index, so later queries are harder
    let mut rows = Vec::new();
    let mut queries = Vec::new();
    for q in 0..50 {
        let target = q * 4;
        let noise = 0.1 + q as f32 * 0.05;
        rows.push(
            images[target]
                .iter()
                .map(|x| x + rng.random_range(-noise..noise))
                .collect(),
        );
        queries.push(Query {
            id: format!("q{q:02}"),
            text: String::new(),
            relevant_image_ids: vec![image_ids[target].clone(), image_ids[target + 1].clone()],
        });
    }
    let queries = QuerySet::new(queries)?;
    let vectors = EmbeddingMatrix::from_rows(queries.ids(), rows)?;

    let best = topk("q00", vectors.row(0), &gallery, 3)?;
    for (id, score) in best.ranked_ids.iter().zip(&best.scores) {
        println!("q00 -> {id} {score:.4}");
    }

    let report = evaluate(&vectors, &queries, &gallery, &[1, 5, 10, 50])?;
    println!("\n{}", report.to_csv());
    let worst = report.per_query.iter().max_by_key(|d| d.best_rank).expect("queries");
    println!(
        "hardest query {} has its first relevant image at rank {}",
        worst.query_id, worst.best_rank
    );
    Ok(())
}
