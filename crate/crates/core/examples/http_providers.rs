//! The whole pipeline over HTTP: caption, embed, fit, rewrite, shift.
//!
//! A throwaway in-process server plays all three providers, so this runs
//! offline. Point the configs at real services to use actual models.
//!
//!     cargo run --example http_providers

use act::corpus::{derive_queryset, Dataset, Item};
use act::pipeline::{build_ac_database, infer, prepare};
use act::providers::{
    HttpCaptioner, HttpEmbedder, HttpRewriter, PromptTemplate, ProviderConfig, SyntheticEmbedder, TemplateName,
};
use act::shift::{ShiftOptions, StatsMode};
use serde_json::{json, Value};

fn serve() -> String {
    let server = tiny_http::Server::http("127.0.0.1:0").expect("bind");
    let url = format!("http://{}", server.server_addr().to_ip().expect("ip address"));
    std::thread::spawn(move || {
        let embedder = SyntheticEmbedder::new(5, 48);
        for mut req in server.incoming_requests() {
            let mut body = String::new();
            req.as_reader().read_to_string(&mut body).expect("body");
            let v: Value = serde_json::from_str(&body).expect("json body");
            let reply = match req.url() {
                "/embed" => {
                    let texts = v["texts"].as_array().expect("texts");
                    let vectors: Vec<Vec<f32>> = texts
                        .iter()
                        .map(|t| embedder.embed_one(t.as_str().unwrap_or_default()))
                        .collect();
                    json!({ "dim": 48, "vectors": vectors })
                }
                "/caption" => json!({ "text": format!("a photo of {}", v["image"].as_str().unwrap_or("?")) }),
                "/generate" => json!({ "text": format!("plain {}", v["text"].as_str().unwrap_or("?")) }),
                _ => json!({ "error": "unknown route" }),
            };
            let _ = req.respond(tiny_http::Response::from_string(reply.to_string()));
        }
    });
    url
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let url = serve();
    let config = ProviderConfig {
        max_concurrent_requests: 2,
        request_batch_size: 4,
        ..ProviderConfig::with_endpoint(url)
    };

    let descriptions = [
        ("dress", "Effortless and romantic."),
        ("shirt", "Crisp, smart and understated."),
        ("jacket", "Bold with an edgy attitude."),
        ("skirt", "Breezy and carefree."),
        ("coat", "Refined and polished."),
        ("boots", "Rugged, made to last."),
        ("scarf", "Soft and snug."),
        ("blazer", "Sharp for the office."),
    ];
    let dataset = Dataset::new(
        "demo",
        descriptions
            .iter()
            .enumerate()
            .map(|(i, (class, text))| Item {
                id: format!("item{i}"),
                class_label: class.to_string(),
                abstract_description: text.to_string(),
                image_ids: vec![format!("img{i}.jpg")],
            })
            .collect(),
    )?;

    let captioner = HttpCaptioner::new(config.clone(), PromptTemplate::caption_pv())?;
    let (db, run) = build_ac_database(&dataset, &captioner, 0)?;
    println!(
        "captioned {}/{} items",
        run.items_total - run.items_failed,
        run.items_total
    );
    println!("  {} -> {}", db.pairs()[0].abstract_text, db.pairs()[0].concrete_text);

    let embedder = HttpEmbedder::new(config.clone())?;
    let fit = prepare(
        &db,
        &embedder,
        ShiftOptions {
            k: 4,
            ..Default::default()
        },
        0,
    )?;
    println!(
        "fitted k={} in the space of {}",
        fit.characterization.k(),
        fit.characterization.provenance.encoder
    );

    let rewriter = HttpRewriter::new(config, PromptTemplate::builtin(TemplateName::RephrasePr))?;
    let queries = derive_queryset(&dataset)?;
    let (shifted, rewrite) = infer(
        &queries,
        &fit.characterization,
        &embedder,
        Some(&rewriter),
        StatsMode::Batch,
    )?;
    let rewrite = rewrite.expect("rewriter given");
    println!(
        "rewrote {} queries ({} failed), shifted {} vectors of dim {}",
        rewrite.items_total,
        rewrite.items_failed,
        shifted.len(),
        shifted.dim()
    );
    Ok(())
}
