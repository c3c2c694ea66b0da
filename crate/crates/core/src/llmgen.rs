//! Input-generator synthesis through a chat-completions endpoint.
//!
//! A prompt shows a few worked examples (task, ground truth, reasoning
//! about complexity, generator) and then the target task, ending where the
//! model should start reasoning. Completions are recorded to a JSONL
//! transcript and can be replayed without network access. Model output is
//! only ever parsed here, never executed.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, OnceLock};
use std::time::Duration;

use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model::Task;

pub const DEFAULT_TEMPLATE: &str = include_str!("../assets/sas_template.toml");
pub const BASE_URL_ENV: &str = "DPE_LLM_BASE_URL";
pub const API_KEY_ENV: &str = "DPE_LLM_API_KEY";
pub const MODEL_ENV: &str = "DPE_LLM_MODEL";

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("template: {0}")]
    Template(String),
    #[error("no endpoint configured: set {BASE_URL_ENV} or replay a transcript")]
    NotConfigured,
    #[error("request failed after {attempts} attempts: {last}")]
    Transport { attempts: u32, last: String },
    #[error("endpoint rejected the request ({status}): {body}")]
    Rejected { status: u16, body: String },
    #[error("malformed completion response: {0}")]
    Response(String),
    #[error("transcript has no response for request {key} sample {index}")]
    ReplayMiss { key: String, index: usize },
    #[error("transcript {path}: {message}")]
    Transcript { path: PathBuf, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FewShotPair {
    pub instruction: String,
    pub ground_truth: String,
    pub chain_of_thought: String,
    pub generator: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sampling {
    pub temperature: f64,
    pub n: usize,
    pub max_tokens: u32,
}

impl Default for Sampling {
    fn default() -> Self {
        Sampling {
            temperature: 0.8,
            n: 16,
            max_tokens: 2048,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Template {
    pub language: String,
    pub entry_point: String,
    pub system: String,
    pub preamble: String,
    pub instruction_header: String,
    pub ground_truth_header: String,
    pub cot_header: String,
    pub generator_header: String,
    pub sampling: Sampling,
    #[serde(default)]
    pub fewshot: Vec<FewShotPair>,
}

impl Template {
    pub fn parse(text: &str) -> Result<Self, LlmError> {
        let t: Template = toml::from_str(text).map_err(|e| LlmError::Template(e.to_string()))?;
        if t.fewshot.is_empty() {
            return Err(LlmError::Template("at least one [[fewshot]] pair is required".into()));
        }
        if !(t.sampling.temperature >= 0.0) {
            return Err(LlmError::Template("temperature must be >= 0".into()));
        }
        Ok(t)
    }

    pub fn load(path: &Path) -> Result<Self, LlmError> {
        let text = fs::read_to_string(path)
            .map_err(|e| LlmError::Template(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn default_template() -> Self {
        Self::parse(DEFAULT_TEMPLATE).expect("bundled template parses")
    }

    fn fence(&self, code: &str) -> String {
        format!("```{}\n{}\n```\n", self.language, code.trim_matches('\n'))
    }

    fn task_blocks(&self, instruction: &str, ground_truth: &str) -> String {
        format!(
            "{}\n{}\n\n{}\n{}",
            self.instruction_header,
            instruction.trim_matches('\n'),
            self.ground_truth_header,
            self.fence(ground_truth)
        )
    }
}

/// A fully assembled prompt plus its sampling parameters.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SasPrompt {
    pub system: String,
    pub instruction_block: String,
    pub ground_truth_block: String,
    pub fewshot_pairs: Vec<FewShotPair>,
    pub sampling: Sampling,
    pub entry_point: String,
    /// The user message: examples, then the target task, ending with the
    /// chain-of-thoughts header.
    pub text: String,
}

pub fn build_prompt(task: &Task, template: &Template) -> Result<SasPrompt, LlmError> {
    if template.fewshot.is_empty() {
        return Err(LlmError::Template("no few-shot pairs".into()));
    }
    let mut text = String::new();
    text.push_str(template.preamble.trim_matches('\n'));
    text.push_str("\n\n");
    for pair in &template.fewshot {
        text.push_str(&template.task_blocks(&pair.instruction, &pair.ground_truth));
        text.push('\n');
        text.push_str(&format!(
            "{}\n{}\n\n{}\n{}\n",
            template.cot_header,
            pair.chain_of_thought.trim_matches('\n'),
            template.generator_header,
            template.fence(&pair.generator)
        ));
    }
    text.push_str(&template.task_blocks(&task.instruction, &task.ground_truth));
    text.push('\n');
    text.push_str(&template.cot_header);
    text.push('\n');
    Ok(SasPrompt {
        system: template.system.clone(),
        instruction_block: task.instruction.clone(),
        ground_truth_block: task.ground_truth.clone(),
        fewshot_pairs: template.fewshot.clone(),
        sampling: template.sampling.clone(),
        entry_point: template.entry_point.clone(),
        text,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorCandidate {
    pub raw_completion: String,
    pub extracted_code: String,
    pub parse_ok: bool,
}

fn fenced_blocks() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?ms)^[ \t]*```[^\n]*\n(.*?)^[ \t]*```").expect("valid regex"))
}

/// Picks the last fenced code block that defines `entry_point`.
pub fn extract_generator(completion: &str, entry_point: &str) -> GeneratorCandidate {
    let def = Regex::new(&format!(r"(?m)^\s*def\s+{}\b", regex::escape(entry_point)))
        .expect("valid regex");
    let code = fenced_blocks()
        .captures_iter(completion)
        .filter_map(|c| c.get(1).map(|m| m.as_str()))
        .filter(|body| def.is_match(body))
        .last();
    GeneratorCandidate {
        raw_completion: completion.to_string(),
        extracted_code: code.unwrap_or("").to_string(),
        parse_ok: code.is_some(),
    }
}

/// An OpenAI-compatible chat-completions endpoint.
#[derive(Debug, Clone)]
pub struct Endpoint {
    pub base_url: String,
    pub api_key: Option<String>,
    pub model: String,
    pub timeout: Duration,
}

impl Endpoint {
    /// Reads `DPE_LLM_BASE_URL`, `DPE_LLM_API_KEY` and `DPE_LLM_MODEL`.
    pub fn from_env() -> Result<Self, LlmError> {
        let base_url = std::env::var(BASE_URL_ENV).map_err(|_| LlmError::NotConfigured)?;
        Ok(Endpoint {
            base_url,
            api_key: std::env::var(API_KEY_ENV).ok(),
            model: std::env::var(MODEL_ENV).unwrap_or_else(|_| "default".into()),
            timeout: Duration::from_secs(300),
        })
    }

    fn url(&self) -> String {
        format!("{}/chat/completions", self.base_url.trim_end_matches('/'))
    }
}

/// Builds the request body for one sample.
pub fn chat_request(prompt: &SasPrompt, model: &str, temperature: f64) -> serde_json::Value {
    serde_json::json!({
        "model": model,
        "messages": [
            {"role": "system", "content": prompt.system},
            {"role": "user", "content": prompt.text},
        ],
        "temperature": temperature,
        "max_tokens": prompt.sampling.max_tokens,
        "n": 1,
    })
}

/// Transcript key: SHA-256 of the canonical request JSON.
pub fn request_key(request: &serde_json::Value) -> String {
    hex::encode(Sha256::digest(request.to_string().as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub key: String,
    pub sample_index: usize,
    pub request: serde_json::Value,
    pub response: String,
}

pub fn read_transcript(path: &Path) -> Result<Vec<TranscriptEntry>, LlmError> {
    let err = |message: String| LlmError::Transcript {
        path: path.to_path_buf(),
        message,
    };
    let file = fs::File::open(path).map_err(|e| err(e.to_string()))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| err(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| err(format!("line {}: {e}", i + 1)))?);
    }
    Ok(out)
}

enum Mode {
    Live {
        endpoint: Endpoint,
        client: reqwest::blocking::Client,
        record: Option<(PathBuf, Mutex<fs::File>)>,
    },
    Replay {
        model: String,
        entries: std::collections::HashMap<(String, usize), String>,
    },
}

/// Draws generator samples live or from a transcript.
pub struct GeneratorSampler {
    mode: Mode,
    pub retries: u32,
    pub backoff: Duration,
}

impl GeneratorSampler {
    pub fn live(endpoint: Endpoint, record_to: Option<&Path>) -> Result<Self, LlmError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(endpoint.timeout)
            .build()
            .map_err(|e| LlmError::Transport {
                attempts: 0,
                last: e.to_string(),
            })?;
        let record = match record_to {
            None => None,
            Some(p) => {
                let f = fs::OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(p)
                    .map_err(|e| LlmError::Transcript {
                        path: p.to_path_buf(),
                        message: e.to_string(),
                    })?;
                Some((p.to_path_buf(), Mutex::new(f)))
            }
        };
        Ok(GeneratorSampler {
            mode: Mode::Live {
                endpoint,
                client,
                record,
            },
            retries: 3,
            backoff: Duration::from_millis(500),
        })
    }

    /// Serves completions from a transcript; `model` must match the one used
    /// when recording, since it is part of the request key.
    pub fn replay(path: &Path, model: &str) -> Result<Self, LlmError> {
        let entries = read_transcript(path)?
            .into_iter()
            .map(|e| ((e.key, e.sample_index), e.response))
            .collect();
        Ok(GeneratorSampler {
            mode: Mode::Replay {
                model: model.to_string(),
                entries,
            },
            retries: 0,
            backoff: Duration::ZERO,
        })
    }

    fn model(&self) -> &str {
        match &self.mode {
            Mode::Live { endpoint, .. } => &endpoint.model,
            Mode::Replay { model, .. } => model,
        }
    }

    /// Draws `n` samples (one request each) and extracts generators.
    pub fn sample_generators(
        &self,
        prompt: &SasPrompt,
        n: usize,
        temperature: f64,
    ) -> Result<Vec<GeneratorCandidate>, LlmError> {
        let request = chat_request(prompt, self.model(), temperature);
        let key = request_key(&request);
        (0..n)
            .map(|index| {
                let text = self.completion(&request, &key, index)?;
                Ok(extract_generator(&text, &prompt.entry_point))
            })
            .collect()
    }

    fn completion(
        &self,
        request: &serde_json::Value,
        key: &str,
        index: usize,
    ) -> Result<String, LlmError> {
        match &self.mode {
            Mode::Replay { entries, .. } => entries
                .get(&(key.to_string(), index))
                .cloned()
                .ok_or_else(|| LlmError::ReplayMiss {
                    key: key.to_string(),
                    index,
                }),
            Mode::Live {
                endpoint,
                client,
                record,
            } => {
                let text = self.post_with_retry(client, endpoint, request)?;
                if let Some((path, file)) = record {
                    let entry = TranscriptEntry {
                        key: key.to_string(),
                        sample_index: index,
                        request: request.clone(),
                        response: text.clone(),
                    };
                    let line = serde_json::to_string(&entry).expect("entry serializes");
                    let mut f = file.lock().unwrap_or_else(|p| p.into_inner());
                    writeln!(f, "{line}").map_err(|e| LlmError::Transcript {
                        path: path.clone(),
                        message: e.to_string(),
                    })?;
                }
                Ok(text)
            }
        }
    }

    fn post_with_retry(
        &self,
        client: &reqwest::blocking::Client,
        endpoint: &Endpoint,
        request: &serde_json::Value,
    ) -> Result<String, LlmError> {
        let mut last = String::new();
        for attempt in 0..=self.retries {
            if attempt > 0 {
                std::thread::sleep(self.backoff * 2u32.pow(attempt - 1));
            }
            let mut rb = client.post(endpoint.url()).json(request);
            if let Some(key) = &endpoint.api_key {
                rb = rb.bearer_auth(key);
            }
            match rb.send() {
                Err(e) => last = e.to_string(),
                Ok(resp) => {
                    let status = resp.status();
                    let body = resp.text().unwrap_or_default();
                    if status.is_success() {
                        return parse_completion(&body);
                    }
                    if status.is_server_error() || status.as_u16() == 429 {
                        last = format!("HTTP {status}");
                        continue;
                    }
                    return Err(LlmError::Rejected {
                        status: status.as_u16(),
                        body,
                    });
                }
            }
            log::warn!("completion request attempt {} failed: {last}", attempt + 1);
        }
        Err(LlmError::Transport {
            attempts: self.retries + 1,
            last,
        })
    }
}

fn parse_completion(body: &str) -> Result<String, LlmError> {
    let v: serde_json::Value =
        serde_json::from_str(body).map_err(|e| LlmError::Response(e.to_string()))?;
    v.pointer("/choices/0/message/content")
        .and_then(serde_json::Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| LlmError::Response("no choices[0].message.content".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::value::Args;

    fn task(id: &str, instruction: &str, gt: &str) -> Task {
        Task {
            task_id: id.into(),
            instruction: instruction.into(),
            entry_point: "f".into(),
            ground_truth: gt.into(),
            correctness_tests: vec![],
            perf_input: None::<Args>,
            references: None,
        }
    }

    #[test]
    fn prompt_ends_with_ground_truth_then_cot_header() {
        let t = Template::default_template();
        assert_eq!(t.fewshot.len(), 2);
        let p = build_prompt(&task("a", "Sort the list.", "def f(xs):\n    return sorted(xs)"), &t).unwrap();
        let tail = format!("def f(xs):\n    return sorted(xs)\n```\n\n{}\n", t.cot_header);
        assert!(p.text.ends_with(&tail), "{}", p.text);
        // Few-shot examples come first.
        let first_example = p.text.find("has_close_elements").unwrap();
        assert!(first_example < p.text.find("Sort the list.").unwrap());
    }

    #[test]
    fn prompts_differ_only_in_the_task_blocks() {
        let t = Template::default_template();
        let a = build_prompt(&task("a", "AAA", "def f(): return 111"), &t).unwrap();
        let b = build_prompt(&task("b", "BBB", "def f(): return 222"), &t).unwrap();
        assert_ne!(a.text, b.text);
        let swapped = a.text.replace("AAA", "BBB").replace("return 111", "return 222");
        assert_eq!(swapped, b.text);
    }

    #[test]
    fn template_without_examples_is_rejected() {
        let stripped: String = DEFAULT_TEMPLATE
            .split("[[fewshot]]")
            .next()
            .unwrap()
            .to_string();
        assert!(matches!(Template::parse(&stripped), Err(LlmError::Template(_))));
    }

    #[test]
    fn extraction_rules() {
        let none = extract_generator("I think it is O(n).", "perf_input_gen");
        assert!(!none.parse_ok);
        let two = "```python\ndef helper():\n    pass\n```\nthen\n```python\ndef perf_input_gen(scale):\n    return [1]\n```\nand\n```python\ndef perf_input_gen(scale):\n    return [2]\n```\n```\nprint('x')\n```\n";
        let c = extract_generator(two, "perf_input_gen");
        assert!(c.parse_ok);
        assert!(c.extracted_code.contains("[2]"), "{}", c.extracted_code);
        let wrong_name = extract_generator("```\ndef perf_input_generator(s): pass\n```\n", "perf_input_gen");
        assert!(!wrong_name.parse_ok);
    }

    #[test]
    fn request_keys_are_stable() {
        let t = Template::default_template();
        let p = build_prompt(&task("a", "x", "y"), &t).unwrap();
        let k1 = request_key(&chat_request(&p, "m", 0.8));
        let k2 = request_key(&chat_request(&p, "m", 0.8));
        assert_eq!(k1, k2);
        assert_ne!(k1, request_key(&chat_request(&p, "m", 0.7)));
    }
}
