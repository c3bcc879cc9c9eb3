use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::template::PromptTemplate;
use super::{bounded_map, check_vectors, Captioner, ProviderConfig, ProviderError, Rewriter, TextEmbedder};

/// JSON-over-POST client with per-request retries.
#[derive(Debug, Clone)]
pub struct HttpTransport {
    config: ProviderConfig,
    agent: ureq::Agent,
}

enum Attempt {
    Retry(ProviderError),
    Fail(ProviderError),
}

impl HttpTransport {
    pub fn new(config: ProviderConfig) -> Result<Self, ProviderError> {
        config.validate()?;
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(config.timeout_ms)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self { config, agent })
    }

    pub fn config(&self) -> &ProviderConfig {
        &self.config
    }

    fn url(&self, path: &str) -> String {
        format!("{}/{}", self.config.endpoint_url.trim_end_matches('/'), path)
    }

    /// POSTs `body` to `path`; transport failures, 5xx and 429 are retried
    /// with exponential backoff, other statuses fail at once.
    pub fn post<Req: Serialize, Resp: DeserializeOwned>(&self, path: &str, body: &Req) -> Result<Resp, ProviderError> {
        let url = self.url(path);
        let payload = serde_json::to_vec(body).expect("request serializes");
        let mut attempt = 0u32;
        loop {
            match self.try_once(&url, &payload) {
                Ok(resp) => return Ok(resp),
                Err(Attempt::Fail(e)) => return Err(e),
                Err(Attempt::Retry(e)) => {
                    if attempt >= self.config.max_retries {
                        return Err(e);
                    }
                    let wait = self.config.retry_backoff_ms.saturating_mul(1 << attempt.min(16));
                    log::debug!("{url}: {e}; retry {} in {wait} ms", attempt + 1);
                    std::thread::sleep(Duration::from_millis(wait));
                    attempt += 1;
                }
            }
        }
    }

    fn try_once<Resp: DeserializeOwned>(&self, url: &str, payload: &[u8]) -> Result<Resp, Attempt> {
        let mut req = self.agent.post(url).header("Content-Type", "application/json");
        if let Some(auth) = &self.config.auth_header {
            req = req.header("Authorization", auth);
        }
        let mut resp = match req.send(payload) {
            Ok(r) => r,
            Err(ureq::Error::Timeout(_)) => {
                return Err(Attempt::Retry(ProviderError::Timeout {
                    endpoint: url.to_string(),
                    timeout_ms: self.config.timeout_ms,
                }))
            }
            Err(e) => {
                return Err(Attempt::Retry(ProviderError::Unavailable {
                    endpoint: url.to_string(),
                    message: e.to_string(),
                }))
            }
        };
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().map_err(|e| {
            Attempt::Retry(ProviderError::Unavailable {
                endpoint: url.to_string(),
                message: format!("reading body: {e}"),
            })
        })?;
        if !(200..300).contains(&status) {
            let err = ProviderError::Unavailable {
                endpoint: url.to_string(),
                message: format!("HTTP {status}: {}", server_message(&text)),
            };
            return Err(if status >= 500 || status == 429 {
                Attempt::Retry(err)
            } else {
                Attempt::Fail(err)
            });
        }
        serde_json::from_str(&text).map_err(|e| {
            Attempt::Fail(ProviderError::BadResponse {
                endpoint: url.to_string(),
                message: e.to_string(),
            })
        })
    }
}

/// The `error` or `message` field of a JSON error body, else the raw text.
fn server_message(body: &str) -> String {
    serde_json::from_str::<serde_json::Value>(body)
        .ok()
        .and_then(|v| {
            ["error", "message", "detail"]
                .iter()
                .find_map(|k| v.get(k).and_then(|m| m.as_str()).map(str::to_string))
        })
        .unwrap_or_else(|| body.trim().to_string())
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [String],
}

#[derive(Deserialize)]
struct EmbedResponse {
    dim: usize,
    vectors: Vec<Vec<f32>>,
}

#[derive(Serialize)]
struct CaptionRequest<'a> {
    image: &'a str,
    prompt: &'a str,
    max_tokens: u32,
}

#[derive(Serialize)]
struct ExamplePair<'a> {
    input: &'a str,
    output: &'a str,
}

#[derive(Serialize)]
struct GenerateRequest<'a> {
    prompt: &'a str,
    examples: Vec<ExamplePair<'a>>,
    text: &'a str,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct TextResponse {
    text: String,
}

/// `POST /embed`.
#[derive(Debug, Clone)]
pub struct HttpEmbedder {
    transport: HttpTransport,
}

impl HttpEmbedder {
    pub fn new(config: ProviderConfig) -> Result<Self, ProviderError> {
        Ok(Self {
            transport: HttpTransport::new(config)?,
        })
    }
}

impl TextEmbedder for HttpEmbedder {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, ProviderError> {
        if texts.is_empty() {
            return Err(ProviderError::EmptyInput);
        }
        let config = self.transport.config();
        let endpoint = self.transport.url("embed");
        let batches: Vec<&[String]> = texts.chunks(config.request_batch_size).collect();
        let results = bounded_map(&batches, config.max_concurrent_requests, |batch| {
            let resp: EmbedResponse = self.transport.post("embed", &EmbedRequest { texts: batch })?;
            if resp.vectors.len() != batch.len() {
                return Err(ProviderError::BadResponse {
                    endpoint: endpoint.clone(),
                    message: format!("{} vectors for {} texts", resp.vectors.len(), batch.len()),
                });
            }
            check_vectors(&endpoint, &resp.vectors, None)?;
            Ok((resp.dim, resp.vectors))
        });
        let mut out = Vec::with_capacity(texts.len());
        let mut dim = None;
        for r in results {
            let (declared, vectors) = r?;
            let offset = out.len();
            let expected = *dim.get_or_insert(declared);
            check_vectors(&endpoint, &vectors, Some(expected)).map_err(|e| match e {
                ProviderError::DimInconsistent { index, expected, found } => ProviderError::DimInconsistent {
                    index: index + offset,
                    expected,
                    found,
                },
                other => other,
            })?;
            out.extend(vectors);
        }
        Ok(out)
    }

    fn identity(&self) -> String {
        format!("http:{}", self.transport.config().endpoint_url)
    }
}

/// `POST /caption` with the captioning template.
#[derive(Debug, Clone)]
pub struct HttpCaptioner {
    transport: HttpTransport,
    template: PromptTemplate,
}

impl HttpCaptioner {
    pub fn new(config: ProviderConfig, template: PromptTemplate) -> Result<Self, ProviderError> {
        Ok(Self {
            transport: HttpTransport::new(config)?,
            template,
        })
    }
}

impl Captioner for HttpCaptioner {
    fn caption(&self, image_ref: &str, class_label: &str) -> Result<String, ProviderError> {
        let prompt = self.template.render(class_label);
        let resp: TextResponse = self.transport.post(
            "caption",
            &CaptionRequest {
                image: image_ref,
                prompt: &prompt,
                max_tokens: self.template.max_output_tokens,
            },
        )?;
        let text = resp.text.trim();
        if text.is_empty() {
            return Err(ProviderError::EmptyCaption(image_ref.to_string()));
        }
        Ok(text.to_string())
    }

    fn identity(&self) -> String {
        format!("{}|{}", self.transport.config().endpoint_url, self.template.name)
    }

    fn concurrency(&self) -> usize {
        self.transport.config().max_concurrent_requests
    }
}

/// `POST /generate` with a rewriting template and its demonstrations.
#[derive(Debug, Clone)]
pub struct HttpRewriter {
    transport: HttpTransport,
    template: PromptTemplate,
}

impl HttpRewriter {
    pub fn new(config: ProviderConfig, template: PromptTemplate) -> Result<Self, ProviderError> {
        Ok(Self {
            transport: HttpTransport::new(config)?,
            template,
        })
    }
}

impl Rewriter for HttpRewriter {
    fn rephrase(&self, text: &str) -> Result<String, ProviderError> {
        if text.trim().is_empty() {
            return Err(ProviderError::EmptyInput);
        }
        let resp: TextResponse = self.transport.post(
            "generate",
            &GenerateRequest {
                prompt: &self.template.system_text,
                examples: self
                    .template
                    .in_context_examples
                    .iter()
                    .map(|(input, output)| ExamplePair { input, output })
                    .collect(),
                text,
                max_tokens: self.template.max_output_tokens,
            },
        )?;
        let out = resp.text.trim();
        if out.is_empty() {
            return Err(ProviderError::EmptyRewrite);
        }
        Ok(out.to_string())
    }

    fn identity(&self) -> String {
        format!("{}|{}", self.transport.config().endpoint_url, self.template.name)
    }

    fn concurrency(&self) -> usize {
        self.transport.config().max_concurrent_requests
    }
}
