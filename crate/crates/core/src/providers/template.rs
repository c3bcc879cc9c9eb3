use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub const CLASS_PLACEHOLDER: &str = "<class>";
pub const DEFAULT_MAX_OUTPUT_TOKENS: u32 = 77;

const CAPTION_PV: &str = include_str!("../../prompts/caption_pv.txt");
const REPHRASE_PR: &str = include_str!("../../prompts/rephrase_pr.txt");
const REPHRASE_PR_FACAD: &str = include_str!("../../prompts/rephrase_pr_facad.txt");
const REPHRASE_EXAMPLES: &str = include_str!("../../prompts/rephrase_examples.jsonl");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateName {
    CaptionPv,
    RephrasePr,
    RephrasePrFacad,
}

impl TemplateName {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::CaptionPv => "caption_pv",
            Self::RephrasePr => "rephrase_pr",
            Self::RephrasePrFacad => "rephrase_pr_facad",
        }
    }
}

impl fmt::Display for TemplateName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TemplateName {
    type Err = String;

    /// Accepts the full names and the short CLI forms `pr` / `pr-facad`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "caption_pv" | "pv" => Ok(Self::CaptionPv),
            "rephrase_pr" | "pr" => Ok(Self::RephrasePr),
            "rephrase_pr_facad" | "pr-facad" | "pr_facad" => Ok(Self::RephrasePrFacad),
            other => Err(format!("unknown template `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub name: TemplateName,
    pub system_text: String,
    pub in_context_examples: Vec<(String, String)>,
    pub max_output_tokens: u32,
}

#[derive(Deserialize)]
struct Example {
    input: String,
    output: String,
}

impl PromptTemplate {
    pub fn builtin(name: TemplateName) -> Self {
        match name {
            TemplateName::CaptionPv => Self::caption_pv(),
            TemplateName::RephrasePr => Self::rephrase_pr(),
            TemplateName::RephrasePrFacad => Self::rephrase_pr_facad(),
        }
    }

    /// Captioning prompt; `<class>` is replaced by the item's class label.
    pub fn caption_pv() -> Self {
        Self {
            name: TemplateName::CaptionPv,
            system_text: CAPTION_PV.trim().to_string(),
            in_context_examples: Vec::new(),
            max_output_tokens: DEFAULT_MAX_OUTPUT_TOKENS,
        }
    }

    /// Rewriting prompt with four demonstration pairs.
    pub fn rephrase_pr() -> Self {
        let in_context_examples = REPHRASE_EXAMPLES
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                let e: Example = serde_json::from_str(l).expect("bundled examples are valid JSON");
                (e.input, e.output)
            })
            .collect();
        Self {
            name: TemplateName::RephrasePr,
            system_text: REPHRASE_PR.trim().to_string(),
            in_context_examples,
            max_output_tokens: DEFAULT_MAX_OUTPUT_TOKENS,
        }
    }

    /// Rewriting prompt for short, loosely written descriptions; no
    /// demonstrations, since those shorten text and this prompt keeps length.
    pub fn rephrase_pr_facad() -> Self {
        Self {
            name: TemplateName::RephrasePrFacad,
            system_text: REPHRASE_PR_FACAD.trim().to_string(),
            in_context_examples: Vec::new(),
            max_output_tokens: DEFAULT_MAX_OUTPUT_TOKENS,
        }
    }

    pub fn with_max_output_tokens(mut self, n: u32) -> Self {
        self.max_output_tokens = n.max(1);
        self
    }

    /// The prompt text with `<class>` substituted.
    pub fn render(&self, class_label: &str) -> String {
        self.system_text.replace(CLASS_PLACEHOLDER, class_label)
    }
}
