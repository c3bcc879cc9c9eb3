//! Fit a shift on paired descriptions and move a query batch with it.
//!
//! Uses the synthetic embedder, so the numbers only show the mechanics.
//!
//!     cargo run --example fit_and_apply_shift

use act::corpus::{Query, QuerySet};
use act::pipeline::{infer, AcDatabase, AcPair, AcProvenance};
use act::providers::SyntheticEmbedder;
use act::shift::{ShiftOptions, StatsMode};

fn pair(id: &str, abstract_text: &str, concrete_text: &str) -> AcPair {
    AcPair {
        item_id: id.into(),
        abstract_text: abstract_text.into(),
        concrete_text: concrete_text.into(),
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let db = AcDatabase::new(
        vec![
            pair(
                "a",
                "A sleek dress for evenings out.",
                "A black sleeveless dress, knee length.",
            ),
            pair(
                "b",
                "Relaxed shirt with a cool vibe.",
                "A blue cotton shirt with rolled sleeves.",
            ),
            pair(
                "c",
                "Timeless coat, effortlessly chic.",
                "A camel wool coat with notch lapels.",
            ),
            pair(
                "d",
                "Playful skirt for sunny days.",
                "A yellow pleated skirt with daisies.",
            ),
            pair("e", "Cozy sweater for slow mornings.", "A cream cable-knit sweater."),
            pair(
                "f",
                "Sporty shorts with attitude.",
                "Green nylon shorts with a drawstring.",
            ),
        ],
        AcProvenance {
            dataset: "demo".into(),
            ..Default::default()
        },
    )?;
    let embedder = SyntheticEmbedder::new(0, 32);

    // asking for more components than the data supports clamps k to rows - 1
    let fit = act::pipeline::prepare(
        &db,
        &embedder,
        ShiftOptions {
            k: 8,
            ..Default::default()
        },
        0,
    )?;
    let ch = &fit.characterization;
    println!("dim {}  k {}  pairs {}", ch.dim(), ch.k(), ch.provenance.pair_count);
    println!("encoder {}", ch.provenance.encoder);
    for (i, r) in ch.explained_variance_ratio.iter().enumerate() {
        println!("  component {i}: {:.3} of delta variance", r);
    }

    let queries = QuerySet::new(vec![
        Query {
            id: "q1".into(),
            text: "an elegant look for a gala".into(),
            relevant_image_ids: vec!["img-a".into()],
        },
        Query {
            id: "q2".into(),
            text: "something laid-back for the weekend".into(),
            relevant_image_ids: vec!["img-b".into()],
        },
    ])?;
    for mode in [StatsMode::Batch, StatsMode::Fallback] {
        let (shifted, _) = infer(&queries, ch, &embedder, None, mode)?;
        let before = embedder.embed_one(&queries.queries[0].text);
        let moved: f32 = shifted
            .row(0)
            .iter()
            .zip(&before)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f32>()
            .sqrt();
        println!("{mode:?}: q1 moved by {moved:.3}");
    }
    Ok(())
}
