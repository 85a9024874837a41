//! The generate, check, repair loop.
//!
//! Cycle 0 sends the generation prompt. Every later cycle sends the previous
//! query together with the issues the checker found in it. The loop stops at
//! the first query that passes or after `limit` repairs, in which case the
//! outcome is an explicit unknown rather than an unchecked query.

use std::sync::Mutex;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rules::CheckReport;
use crate::sparql::strip_code_fences;
use crate::validate::Validator;

pub const DEFAULT_CYCLE_LIMIT: usize = 3;

/// Fed back in place of violations when a response does not parse.
pub const PARSE_FAILURE_ISSUE: &str =
    "the previous response was not a parsable SPARQL SELECT query";

const GENERATION_TEMPLATE: &str = "Given the OWL model described in the following TTL file:\n{ontology}\nWrite a SPARQL query that answers the question.\nDo not explain the query.  Return just the query,\nso it can be run verbatim from your response.\nHere's the question: {question}";

const REPAIR_TEMPLATE: &str =
    "We have a query {query} with some issues outlined here {issues}\nPlease re-write it.";

pub fn build_generation_prompt(question: &str, ontology_ttl: &str) -> String {
    // Substitute the question last so ontology text cannot inject a slot.
    let (head, tail) = GENERATION_TEMPLATE.split_once("{question}").expect("slot");
    let head = head.replacen("{ontology}", ontology_ttl, 1);
    format!("{head}{question}{tail}")
}

pub fn build_repair_prompt(query: &str, issues: &[&str]) -> String {
    let (before, after) = REPAIR_TEMPLATE.split_once("{query}").expect("slot");
    let after = after.replacen("{issues}", &issues.join("\n"), 1);
    format!("{before}{query}{after}")
}

#[derive(Error, Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum EndpointError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("unexpected response: {0}")]
    InvalidResponse(String),
    #[error("no scripted responses")]
    Exhausted,
}

/// Anything that turns a prompt into a completion.
pub trait RewriterEndpoint: Send + Sync {
    fn generate(&self, prompt: &str) -> Result<String, EndpointError>;

    fn describe(&self) -> String {
        "endpoint".to_string()
    }
}

impl<E: RewriterEndpoint + ?Sized> RewriterEndpoint for &E {
    fn generate(&self, prompt: &str) -> Result<String, EndpointError> {
        (**self).generate(prompt)
    }

    fn describe(&self) -> String {
        (**self).describe()
    }
}

impl<E: RewriterEndpoint + ?Sized> RewriterEndpoint for Box<E> {
    fn generate(&self, prompt: &str) -> Result<String, EndpointError> {
        (**self).generate(prompt)
    }

    fn describe(&self) -> String {
        (**self).describe()
    }
}

/// Replays fixed responses in order, repeating the last one, and records
/// every prompt it receives.
#[derive(Debug, Default)]
pub struct ScriptedMock {
    responses: Vec<String>,
    prompts: Mutex<Vec<String>>,
}

impl ScriptedMock {
    pub fn new<S: Into<String>>(responses: impl IntoIterator<Item = S>) -> Self {
        ScriptedMock {
            responses: responses.into_iter().map(Into::into).collect(),
            prompts: Mutex::new(Vec::new()),
        }
    }

    /// Responses separated by lines consisting of `---`.
    pub fn from_text(text: &str) -> Self {
        let mut responses = vec![String::new()];
        for line in text.lines() {
            if line.trim() == "---" {
                responses.push(String::new());
            } else {
                let current = responses.last_mut().unwrap();
                current.push_str(line);
                current.push('\n');
            }
        }
        let responses = responses
            .into_iter()
            .map(|r| r.trim().to_string())
            .filter(|r| !r.is_empty());
        Self::new(responses)
    }

    pub fn prompts(&self) -> Vec<String> {
        self.prompts.lock().unwrap().clone()
    }

    pub fn calls(&self) -> usize {
        self.prompts.lock().unwrap().len()
    }
}

impl RewriterEndpoint for ScriptedMock {
    fn generate(&self, prompt: &str) -> Result<String, EndpointError> {
        let mut prompts = self.prompts.lock().unwrap();
        let index = prompts.len();
        prompts.push(prompt.to_string());
        let last = self
            .responses
            .len()
            .checked_sub(1)
            .ok_or(EndpointError::Exhausted)?;
        Ok(self.responses[index.min(last)].clone())
    }

    fn describe(&self) -> String {
        format!("scripted mock ({} responses)", self.responses.len())
    }
}

/// Spaces calls to `inner` at least `min_interval` apart, across threads.
#[derive(Debug)]
pub struct RateLimited<E> {
    inner: E,
    min_interval: Duration,
    next_slot: Mutex<Option<Instant>>,
}

impl<E> RateLimited<E> {
    pub fn new(inner: E, min_interval: Duration) -> Self {
        RateLimited {
            inner,
            min_interval,
            next_slot: Mutex::new(None),
        }
    }

    pub fn inner(&self) -> &E {
        &self.inner
    }
}

impl<E: RewriterEndpoint> RewriterEndpoint for RateLimited<E> {
    fn generate(&self, prompt: &str) -> Result<String, EndpointError> {
        let wait = {
            let mut slot = self.next_slot.lock().unwrap();
            let now = Instant::now();
            let start = slot.map_or(now, |s| s.max(now));
            *slot = Some(start + self.min_interval);
            start - now
        };
        if !wait.is_zero() {
            std::thread::sleep(wait);
        }
        self.inner.generate(prompt)
    }

    fn describe(&self) -> String {
        self.inner.describe()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "repairs")]
pub enum Outcome {
    ValidatedFirstTime,
    ValidatedAfterRepair(usize),
    Unknown,
}

impl Outcome {
    pub fn is_validated(self) -> bool {
        !matches!(self, Outcome::Unknown)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CycleRecord {
    pub prompt_sent: String,
    pub raw_response: String,
    /// The response with any code fence removed, when it parsed.
    pub parsed_query: Option<String>,
    pub parse_error: Option<String>,
    pub report: Option<CheckReport>,
    pub notices: Vec<String>,
    /// Milliseconds since the Unix epoch when the prompt was sent.
    pub timestamp_ms: u64,
    pub latency_ms: u64,
}

impl CycleRecord {
    pub fn passed(&self) -> bool {
        self.report.as_ref().is_some_and(|r| r.passed)
    }

    /// Issue lines to feed back after this cycle.
    pub fn issues(&self) -> Vec<&str> {
        match &self.report {
            Some(report) => report.messages(),
            None => vec![PARSE_FAILURE_ISSUE],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepairSession {
    pub question: String,
    pub ontology_ref: String,
    pub cycle_limit: usize,
    pub cycles: Vec<CycleRecord>,
    pub outcome: Outcome,
    pub error: Option<String>,
}

impl RepairSession {
    /// The validated query; never present for an unknown outcome.
    pub fn final_query(&self) -> Option<&str> {
        if !self.outcome.is_validated() {
            return None;
        }
        self.cycles.last()?.parsed_query.as_deref()
    }

    /// Every report produced, in cycle order.
    pub fn reports(&self) -> impl Iterator<Item = &CheckReport> {
        self.cycles.iter().filter_map(|c| c.report.as_ref())
    }
}

/// Everything a session needs besides the question and the endpoint.
#[derive(Clone, Debug)]
pub struct Repairer {
    pub validator: Validator,
    /// Ontology text as pasted into the generation prompt.
    pub ontology_text: String,
    pub ontology_ref: String,
    pub limit: usize,
}

impl Repairer {
    pub fn new(
        validator: Validator,
        ontology_text: impl Into<String>,
        ontology_ref: impl Into<String>,
    ) -> Self {
        Repairer {
            validator,
            ontology_text: ontology_text.into(),
            ontology_ref: ontology_ref.into(),
            limit: DEFAULT_CYCLE_LIMIT,
        }
    }

    pub fn with_limit(mut self, limit: usize) -> Self {
        self.limit = limit;
        self
    }

    pub fn run(&self, question: &str, endpoint: &dyn RewriterEndpoint) -> RepairSession {
        let mut session = RepairSession {
            question: question.to_string(),
            ontology_ref: self.ontology_ref.clone(),
            cycle_limit: self.limit,
            cycles: Vec::new(),
            outcome: Outcome::Unknown,
            error: None,
        };
        let mut prompt = build_generation_prompt(question, &self.ontology_text);
        for cycle in 0..=self.limit {
            let timestamp_ms = SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_millis() as u64);
            let started = Instant::now();
            let response = match endpoint.generate(&prompt) {
                Ok(r) => r,
                Err(e) => {
                    session.error = Some(format!("cycle {cycle}: {e}"));
                    return session;
                }
            };
            let latency_ms = started.elapsed().as_millis() as u64;
            let record = self.evaluate(prompt, response, timestamp_ms, latency_ms);
            let passed = record.passed();
            let next = (!passed && cycle < self.limit).then(|| {
                let query = record
                    .parsed_query
                    .clone()
                    .unwrap_or_else(|| strip_code_fences(&record.raw_response).to_string());
                build_repair_prompt(&query, &record.issues())
            });
            session.cycles.push(record);
            if passed {
                session.outcome = match cycle {
                    0 => Outcome::ValidatedFirstTime,
                    n => Outcome::ValidatedAfterRepair(n),
                };
                return session;
            }
            match next {
                Some(p) => prompt = p,
                None => break,
            }
        }
        session
    }

    fn evaluate(
        &self,
        prompt: String,
        response: String,
        timestamp_ms: u64,
        latency_ms: u64,
    ) -> CycleRecord {
        let mut record = CycleRecord {
            prompt_sent: prompt,
            raw_response: response,
            parsed_query: None,
            parse_error: None,
            report: None,
            notices: Vec::new(),
            timestamp_ms,
            latency_ms,
        };
        match self.validator.check_query(&record.raw_response) {
            Ok(validation) => {
                record.parsed_query = Some(strip_code_fences(&record.raw_response).to_string());
                record.notices = validation.notices();
                record.report = Some(validation.report);
            }
            Err(e) => record.parse_error = Some(e.to_string()),
        }
        record
    }
}

pub fn run_session(
    question: &str,
    repairer: &Repairer,
    endpoint: &dyn RewriterEndpoint,
) -> RepairSession {
    repairer.run(question, endpoint)
}
