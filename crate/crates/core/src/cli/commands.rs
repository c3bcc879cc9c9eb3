use std::collections::HashSet;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use super::config::{resolve, CliConfig, EmbedderKind, FlagOverrides, Settings};
use super::*;
use crate::analysis::{
    classified_attributes, frequency_stats, group_csv, group_precision, histogram_csv, load_lexicon, load_tagged,
    phi_csv, tag_dataset, AttributeStudy, ConcretenessLexicon, HeuristicTagger, LabelMapping, PreTagged, Tagger,
};
use crate::corpus::{encode_queryset, load_dataset, load_queryset, Dataset, Query, QuerySet};
use crate::embedding::{
    align_pairs, encode_jsonl, load_matrix, read_jsonl, save_matrix, EmbeddingKind, EmbeddingMatrix,
};
use crate::pipeline::{
    build_ac_database, embed_matrix, encode_ac_database, infer, load_ac_database, prepare, rewrite_queries,
};
use crate::providers::{
    CachedCaptioner, CachedRewriter, Captioner, HttpCaptioner, HttpEmbedder, HttpRewriter, PromptTemplate, Rewriter,
    SyntheticEmbedder, TextCache, TextEmbedder,
};
use crate::retrieval::{build_gallery, emit_report, evaluate, topk, DEFAULT_KS};
use crate::shift::{
    apply_shift, encode_characterization, fit_shift, load_characterization, Provenance, ShiftOptions, DEFAULT_EPSILON,
    DEFAULT_K,
};

struct Context {
    settings: Settings,
}

pub(super) fn dispatch(cli: Cli) -> Result<(), CliError> {
    let g = cli.global;
    let file = match &g.config {
        Some(p) => CliConfig::load(p)?,
        None => CliConfig::default(),
    };
    let flags = FlagOverrides {
        synthetic: g.synthetic,
        seed: g.seed,
        synthetic_dim: g.synthetic_dim,
        embed_url: g.embed_url,
        caption_url: g.caption_url,
        generate_url: g.generate_url,
        auth: g.auth,
        cache_dir: g.cache_dir,
    };
    let ctx = Context {
        settings: resolve(file, |k| std::env::var(k).ok(), flags),
    };
    match cli.command {
        Command::Analyze(a) => ctx.analyze(a),
        Command::Caption(a) => ctx.caption(a),
        Command::FitShift(a) => ctx.fit_shift(a),
        Command::Rephrase(a) => ctx.rephrase(a),
        Command::ApplyShift(a) => ctx.apply_shift(a),
        Command::Retrieve(a) => retrieve(a),
        Command::Evaluate(a) => ctx.evaluate(a),
    }
}

fn is_stdout(path: &Path) -> bool {
    path.as_os_str() == "-"
}

fn write_out(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if is_stdout(path) {
        let mut out = std::io::stdout().lock();
        return match out.write_all(bytes).and_then(|_| out.flush()) {
            Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
                Err(CliError::internal(format!("cannot write stdout: {e}")))
            }
            _ => Ok(()),
        };
    }
    std::fs::write(path, bytes).map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))
}

fn write_matrix(matrix: &EmbeddingMatrix, kind: EmbeddingKind, path: &Path) -> Result<(), CliError> {
    if is_stdout(path) {
        return write_out(path, encode_jsonl(matrix, kind).as_bytes());
    }
    Ok(save_matrix(matrix, kind, path)?)
}

/// Loads the only kind in the file, or `preferred` when it holds several.
fn load_kind(path: &Path, preferred: EmbeddingKind) -> Result<EmbeddingMatrix, CliError> {
    match load_matrix(path, None) {
        Err(crate::embedding::EmbeddingError::AmbiguousKind(_)) => Ok(load_matrix(path, Some(preferred))?),
        other => Ok(other?),
    }
}

/// Re-keys image embeddings by the item whose first image they are.
fn images_by_item(images: &EmbeddingMatrix, dataset: &Dataset) -> Result<EmbeddingMatrix, CliError> {
    let index = images.index();
    let mut ids = Vec::new();
    let mut rows = Vec::new();
    for item in &dataset.items {
        match index.get(item.caption_image()) {
            Some(&r) => {
                ids.push(item.id.clone());
                rows.push(images.row(r).to_vec());
            }
            None => log::warn!("no embedding for image {} of item {}", item.caption_image(), item.id),
        }
    }
    if ids.is_empty() {
        return Err(CliError::input("no dataset item has an embedded first image"));
    }
    Ok(EmbeddingMatrix::from_rows(ids, rows)?)
}

fn read_word_list(path: &Path) -> Result<HashSet<String>, CliError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect())
}

fn created_at(flag: Option<u64>) -> u64 {
    flag.unwrap_or(0)
}

#[derive(Serialize)]
struct Scored<'a> {
    id: &'a str,
    score: f64,
}

#[derive(Serialize)]
struct RankedRecord<'a> {
    query_id: &'a str,
    ranked: Vec<Scored<'a>>,
}

fn retrieve(a: RetrieveArgs) -> Result<(), CliError> {
    let queries = load_kind(&a.query_embeddings, EmbeddingKind::Query)?;
    let gallery = build_gallery(&load_kind(&a.gallery, EmbeddingKind::Image)?)?;
    let results = (0..queries.len())
        .into_par_iter()
        .map(|i| topk(&queries.ids()[i], queries.row(i), &gallery, a.k))
        .collect::<Result<Vec<_>, _>>()?;
    let mut out = String::new();
    for r in &results {
        let record = RankedRecord {
            query_id: &r.query_id,
            ranked: r
                .ranked_ids
                .iter()
                .zip(&r.scores)
                .map(|(id, &score)| Scored { id, score })
                .collect(),
        };
        out.push_str(&serde_json::to_string(&record).expect("serializes"));
        out.push('\n');
    }
    write_out(&a.out, out.as_bytes())
}

impl Context {
    fn embedder(&self) -> Result<Box<dyn TextEmbedder>, CliError> {
        match self.settings.embedder {
            EmbedderKind::Synthetic => {
                let s = &self.settings.synthetic;
                if s.dim == 0 {
                    return Err(CliError::input("synthetic dim must be positive"));
                }
                Ok(Box::new(SyntheticEmbedder::new(s.seed, s.dim)))
            }
            EmbedderKind::Http => {
                let cfg = self.settings.embed.clone().ok_or_else(|| {
                    CliError::input("no embedding provider: pass --embed-url, set ACT_EMBED_URL, or use --synthetic")
                })?;
                Ok(Box::new(HttpEmbedder::new(cfg)?))
            }
        }
    }

    fn cache(&self) -> Option<TextCache> {
        self.settings.cache_dir.as_ref().map(TextCache::new)
    }

    fn captioner(&self, max_tokens: Option<u32>) -> Result<Box<dyn Captioner>, CliError> {
        let cfg = self
            .settings
            .caption
            .clone()
            .ok_or_else(|| CliError::input("no caption provider: pass --caption-url or set ACT_CAPTION_URL"))?;
        let mut template = PromptTemplate::caption_pv();
        if let Some(n) = max_tokens {
            template = template.with_max_output_tokens(n);
        }
        let http = HttpCaptioner::new(cfg, template)?;
        Ok(match self.cache() {
            Some(c) => Box::new(CachedCaptioner::new(http, c)),
            None => Box::new(http),
        })
    }

    fn rewriter(&self, name: TemplateName, max_tokens: Option<u32>) -> Result<Box<dyn Rewriter>, CliError> {
        let cfg =
            self.settings.generate.clone().ok_or_else(|| {
                CliError::input("no generation provider: pass --generate-url or set ACT_GENERATE_URL")
            })?;
        let mut template = PromptTemplate::builtin(name);
        if let Some(n) = max_tokens {
            template = template.with_max_output_tokens(n);
        }
        let http = HttpRewriter::new(cfg, template)?;
        Ok(match self.cache() {
            Some(c) => Box::new(CachedRewriter::new(http, c)),
            None => Box::new(http),
        })
    }

    fn shift_options(&self, k: Option<usize>, epsilon: Option<f64>) -> ShiftOptions {
        ShiftOptions {
            k: k.or(self.settings.k).unwrap_or(DEFAULT_K),
            epsilon: epsilon.or(self.settings.epsilon).unwrap_or(DEFAULT_EPSILON),
        }
    }

    fn analyze(&self, cmd: AnalyzeCommand) -> Result<(), CliError> {
        let common = match &cmd {
            AnalyzeCommand::Stats(c) => c,
            AnalyzeCommand::Mcc { common, .. } | AnalyzeCommand::Oracle { common, .. } => common,
        };
        let dataset = load_dataset(&common.dataset)?;
        let lexicon = load_lexicon(&common.lexicon, common.overrides.as_deref(), common.threshold)?;
        let tagger: Box<dyn Tagger + '_> = match &common.tagged {
            Some(p) => {
                let mapping = match &common.label_map {
                    Some(m) => {
                        let json = std::fs::read_to_string(m)
                            .map_err(|e| CliError::input(format!("cannot read {}: {e}", m.display())))?;
                        LabelMapping::default().with_overrides_json(&json)?
                    }
                    None => LabelMapping::default(),
                };
                Box::new(PreTagged::new(load_tagged(p, &mapping)?))
            }
            None => {
                let adjectives = match &common.adjectives {
                    Some(p) => read_word_list(p)?,
                    None => default_adjectives(&lexicon),
                };
                Box::new(HeuristicTagger::new(&lexicon, adjectives)?)
            }
        };
        let csv = match &cmd {
            AnalyzeCommand::Stats(_) => frequency_stats(&dataset, &lexicon, tagger.as_ref())?.to_csv(),
            AnalyzeCommand::Mcc { top, phi_out, .. } => {
                let study = attribute_study(&dataset, &lexicon, tagger.as_ref(), *top)?;
                let entries = study.phi()?;
                if let Some(p) = phi_out {
                    write_out(p, phi_csv(&entries).as_bytes())?;
                }
                let values: Vec<f64> = entries.iter().map(|e| e.phi).collect();
                histogram_csv(&values)
            }
            AnalyzeCommand::Oracle { top, max_attrs, .. } => {
                let study = attribute_study(&dataset, &lexicon, tagger.as_ref(), *top)?;
                group_csv(&group_precision(&study.presence, &study.categories(), *max_attrs)?)
            }
        };
        write_out(&common.out, csv.as_bytes())
    }

    fn caption(&self, a: CaptionArgs) -> Result<(), CliError> {
        let dataset = load_dataset(&a.dataset)?;
        let captioner = self.captioner(a.max_tokens)?;
        let (db, run) = build_ac_database(&dataset, captioner.as_ref(), created_at(a.created_at))?;
        if run.items_failed > 0 {
            log::warn!("{} of {} items failed to caption", run.items_failed, run.items_total);
        }
        write_out(&a.out, encode_ac_database(&db).as_bytes())
    }

    fn fit_shift(&self, a: FitShiftArgs) -> Result<(), CliError> {
        let options = self.shift_options(a.k, a.epsilon);
        let created = created_at(a.created_at);
        let fit = if let Some(pairs) = &a.pairs {
            let db = load_ac_database(pairs)?;
            let embedder = self.embedder()?;
            let mut fit = prepare(&db, embedder.as_ref(), options, created)?;
            if let Some(s) = &a.source {
                fit.characterization.provenance.source = s.clone();
            }
            fit
        } else {
            let concrete_kind: EmbeddingKind = a.concrete_kind.parse().map_err(CliError::input)?;
            let (abstract_side, concrete_side, source_path) = match (&a.embeddings, &a.abstract_path, &a.concrete) {
                (Some(e), _, _) => {
                    let mut by_kind = read_jsonl(e)?;
                    let mut take = |k: EmbeddingKind| {
                        by_kind
                            .remove(&k)
                            .ok_or_else(|| CliError::input(format!("{} holds no `{k}` records", e.display())))
                    };
                    (take(EmbeddingKind::Abstract)?, take(concrete_kind)?, e)
                }
                (None, Some(ap), Some(cp)) => (
                    load_kind(ap, EmbeddingKind::Abstract)?,
                    load_kind(cp, concrete_kind)?,
                    ap,
                ),
                _ => {
                    return Err(CliError::input(
                        "give --pairs, --embeddings, or --abstract with --concrete",
                    ))
                }
            };
            let concrete_side = if concrete_kind == EmbeddingKind::Image {
                let path = a
                    .dataset
                    .as_ref()
                    .ok_or_else(|| CliError::input("--concrete-kind image needs --dataset"))?;
                images_by_item(&concrete_side, &load_dataset(path)?)?
            } else {
                concrete_side
            };
            let aligned = align_pairs(&abstract_side, &concrete_side)?;
            if aligned.dropped() > 0 {
                log::warn!(
                    "dropped {} abstract and {} concrete rows without a partner",
                    aligned.dropped_abstract,
                    aligned.dropped_concrete
                );
            }
            let source = a.source.clone().unwrap_or_else(|| {
                source_path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default()
            });
            let provenance = Provenance {
                source,
                pair_count: aligned.abstract_side.len() as u64,
                encoder: a.encoder.clone().unwrap_or_default(),
                created_unix: created,
            };
            fit_shift(&aligned.concrete_side, &aligned.abstract_side, options, provenance)?
        };
        log::info!(
            "fitted k={} on {} pairs, explained variance {:.4}",
            fit.characterization.k(),
            fit.characterization.provenance.pair_count,
            fit.characterization.explained_variance_ratio.iter().sum::<f64>()
        );
        write_out(&a.out, &encode_characterization(&fit.characterization))
    }

    fn rephrase(&self, a: RephraseArgs) -> Result<(), CliError> {
        let queries = load_queryset(&a.queries)?;
        let rewriter = self.rewriter(a.template, a.max_tokens)?;
        let (texts, run) = rewrite_queries(&queries, rewriter.as_ref());
        if run.items_failed > 0 {
            log::warn!(
                "{} of {} rewrites failed; originals kept",
                run.items_failed,
                run.items_total
            );
        }
        let rewritten = QuerySet::new(
            queries
                .queries
                .into_iter()
                .zip(texts)
                .map(|(q, text)| Query { text, ..q })
                .collect(),
        )?;
        write_out(&a.out, encode_queryset(&rewritten).as_bytes())
    }

    fn apply_shift(&self, a: ApplyShiftArgs) -> Result<(), CliError> {
        let mode = a.stats_mode.or(self.settings.stats_mode).unwrap_or_default();
        let shift = a.shift.as_ref().map(load_characterization).transpose()?;
        let out = if let Some(path) = &a.query_embeddings {
            let embedded = load_kind(path, EmbeddingKind::Query)?;
            match &shift {
                Some(ch) => apply_shift(&embedded, ch, mode)?,
                None => embedded,
            }
        } else {
            let path = a.queries.as_ref().expect("clap requires queries or query embeddings");
            let queries = load_queryset(path)?;
            let embedder = self.embedder()?;
            let rewriter = a.rewrite.map(|t| self.rewriter(t, a.max_tokens)).transpose()?;
            match &shift {
                Some(ch) => {
                    let (m, run) = infer(&queries, ch, embedder.as_ref(), rewriter.as_deref(), mode)?;
                    if let Some(run) = run.filter(|r| r.items_failed > 0) {
                        log::warn!(
                            "{} of {} rewrites failed; originals kept",
                            run.items_failed,
                            run.items_total
                        );
                    }
                    m
                }
                None => {
                    let texts = match rewriter.as_deref() {
                        Some(r) => rewrite_queries(&queries, r).0,
                        None => queries.texts(),
                    };
                    embed_matrix(queries.ids(), &texts, embedder.as_ref())?
                }
            }
        };
        write_matrix(&out, EmbeddingKind::Query, &a.out)
    }

    fn evaluate(&self, a: EvaluateArgs) -> Result<(), CliError> {
        let ks =
            a.ks.clone()
                .or_else(|| self.settings.ks.clone())
                .unwrap_or_else(|| DEFAULT_KS.to_vec());
        let vectors = load_kind(&a.query_embeddings, EmbeddingKind::Query)?;
        let queries = load_queryset(&a.queries)?;
        let gallery = build_gallery(&load_kind(&a.gallery, EmbeddingKind::Image)?)?;
        let mut report = evaluate(&vectors, &queries, &gallery, &ks)?;
        report.config.labels.extend(a.labels);
        if is_stdout(&a.out) {
            let body = match a.format {
                ReportFormat::Json => report.to_json(),
                ReportFormat::Csv => report.to_csv(),
            };
            return write_out(&a.out, body.as_bytes());
        }
        emit_report(&report, &a.out, a.format).map_err(|e| CliError::input(e.to_string()))?;
        Ok(())
    }
}

fn default_adjectives(lexicon: &ConcretenessLexicon) -> HashSet<String> {
    log::warn!("no --adjectives list given; treating every lexicon word as an adjective candidate");
    lexicon
        .rated_words()
        .chain(lexicon.override_words())
        .map(str::to_string)
        .collect()
}

fn attribute_study(
    dataset: &Dataset,
    lexicon: &ConcretenessLexicon,
    tagger: &dyn Tagger,
    top: usize,
) -> Result<AttributeStudy, CliError> {
    let tagged = tag_dataset(dataset, tagger)?;
    Ok(AttributeStudy::new(&classified_attributes(&tagged, lexicon), top)?)
}
