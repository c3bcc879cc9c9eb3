//! Concreteness analyses over the bundled fixture corpus: adjective
//! frequencies, the max-|MCC| histogram and grouped oracle precision.
//!
//!     cargo run --example lexicon_analysis

use std::collections::HashSet;
use std::path::Path;

use act::analysis::{
    classified_attributes, frequency_stats, group_precision, histogram_csv, load_lexicon, tag_dataset, AttributeStudy,
    Category, HeuristicTagger,
};
use act::corpus::load_dataset;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let dataset = load_dataset(fixtures.join("dataset.jsonl"))?;
    let lexicon = load_lexicon(fixtures.join("lexicon.tsv"), Some(&fixtures.join("overrides.tsv")), 3.0)?;
    let adjectives: HashSet<String> = std::fs::read_to_string(fixtures.join("adjectives.txt"))?
        .lines()
        .map(str::to_string)
        .collect();
    let tagger = HeuristicTagger::new(&lexicon, adjectives)?;

    print!("{}", frequency_stats(&dataset, &lexicon, &tagger)?.to_csv());

    let tagged = tag_dataset(&dataset, &tagger)?;
    let attributes = classified_attributes(&tagged, &lexicon);
    for (id, occ) in attributes.iter().take(3) {
        let shown: Vec<String> = occ
            .iter()
            .filter(|o| o.category != Category::Unknown)
            .map(|o| format!("{} ({})", o.key, o.category))
            .collect();
        println!("{id}: {}", shown.join(", "));
    }

    let study = AttributeStudy::new(&attributes, 200)?;
    let phi: Vec<f64> = study.phi()?.iter().map(|e| e.phi).collect();
    println!("\nmax |MCC| histogram (non-empty bins)");
    for line in histogram_csv(&phi).lines().filter(|l| !l.ends_with(",0")) {
        println!("  {line}");
    }

    println!("\noracle precision by attribute count and mixture");
    for cell in group_precision(&study.presence, &study.categories(), 5)? {
        println!(
            "  {} attrs, {}: {} rows, precision {:.3}",
            cell.attr_count, cell.label, cell.rows, cell.mean_precision
        );
    }
    Ok(())
}
