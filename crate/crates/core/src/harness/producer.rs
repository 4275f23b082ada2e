//! Plan producers: the built-in optimal synthesizer, external commands and
//! HTTP model endpoints.

use std::fs;
use std::io::Read;
use std::process::{Command, Stdio};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use wait_timeout::ChildExt;

use crate::graphrw::{emit_graph_plan, translate_plan};
use crate::pddl::{emit_plan, ProblemDoc, DOMAIN_PDDL};
use crate::planner::synthesize_optimal_plan;

use super::prompt::Representation;
use super::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProducerKind {
    BuiltinOptimal,
    ExternalCommand,
    HttpEndpoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HttpAdapter {
    /// `{"model", "prompt", ...params}` in, `{"text", "thinking_tokens"?}` out.
    #[default]
    Generic,
    /// `generateContent`-style bodies; tokens from `usageMetadata.thoughtsTokenCount`.
    Gemini,
}

fn default_timeout() -> u64 {
    60
}
fn default_retries() -> u32 {
    2
}
fn default_parallelism() -> usize {
    1
}
fn default_backoff() -> u64 {
    500
}

/// Declarative producer description. Secrets are referenced by environment
/// variable name only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProducerConfig {
    pub kind: ProducerKind,
    #[serde(default)]
    pub id: Option<String>,
    /// argv; `{domain}`, `{problem}`, `{prompt}` and `{timeout}` are
    /// substituted. Without any path placeholder the domain and problem paths
    /// are appended.
    #[serde(default)]
    pub command: Option<Vec<String>>,
    #[serde(default)]
    pub url: Option<String>,
    #[serde(default)]
    pub model: Option<String>,
    #[serde(default)]
    pub adapter: HttpAdapter,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_backoff")]
    pub backoff_ms: u64,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default)]
    pub credential_env: Option<String>,
    /// Passed through to the endpoint untouched (temperature etc.).
    #[serde(default)]
    pub params: Option<Value>,
}

impl ProducerConfig {
    pub fn builtin() -> ProducerConfig {
        ProducerConfig {
            kind: ProducerKind::BuiltinOptimal,
            id: None,
            command: None,
            url: None,
            model: None,
            adapter: HttpAdapter::Generic,
            timeout_secs: default_timeout(),
            max_retries: default_retries(),
            backoff_ms: default_backoff(),
            parallelism: default_parallelism(),
            credential_env: None,
            params: None,
        }
    }

    pub fn producer_id(&self) -> String {
        if let Some(id) = &self.id {
            return id.clone();
        }
        match self.kind {
            ProducerKind::BuiltinOptimal => "builtin_optimal".into(),
            ProducerKind::ExternalCommand => {
                let prog = self.command.as_ref().and_then(|c| c.first()).map(String::as_str).unwrap_or("command");
                format!("command:{prog}")
            }
            ProducerKind::HttpEndpoint => format!("http:{}", self.model.as_deref().unwrap_or("endpoint")),
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let cfg = |m: &str| Err(HarnessError::Config(m.to_string()));
        if self.parallelism == 0 {
            return cfg("parallelism must be at least 1");
        }
        if self.timeout_secs == 0 {
            return cfg("timeout_secs must be positive");
        }
        match self.kind {
            ProducerKind::BuiltinOptimal => Ok(()),
            ProducerKind::ExternalCommand => match &self.command {
                Some(c) if !c.is_empty() => Ok(()),
                _ => cfg("external_command needs a non-empty `command`"),
            },
            ProducerKind::HttpEndpoint => {
                if self.url.is_none() {
                    return cfg("http_endpoint needs a `url`");
                }
                if let Some(var) = &self.credential_env {
                    if std::env::var_os(var).is_none() {
                        return Err(HarnessError::Config(format!("environment variable `{var}` is not set")));
                    }
                }
                Ok(())
            }
        }
    }
}

/// What a producer sees for one instance.
pub struct Task<'a> {
    pub problem: &'a ProblemDoc,
    pub problem_text: &'a str,
    pub prompt: &'a str,
    pub representation: Representation,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProducerOutput {
    pub text: String,
    pub thinking_tokens: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProducerError {
    #[error("timed out after {0} s")]
    Timeout(u64),
    #[error("transport: {0}")]
    Transport(String),
    #[error("{0}")]
    Failed(String),
}

impl ProducerError {
    fn retryable(&self) -> bool {
        matches!(self, ProducerError::Transport(_))
    }
}

pub trait Producer: Sync {
    fn id(&self) -> String;
    /// Builtin output is trusted to be well-formed and parsed strictly.
    fn strict_output(&self) -> bool {
        false
    }
    fn produce(&self, task: &Task<'_>) -> Result<ProducerOutput, ProducerError>;
}

pub fn make_producer(config: &ProducerConfig) -> Result<Box<dyn Producer>, HarnessError> {
    config.validate()?;
    Ok(match config.kind {
        ProducerKind::BuiltinOptimal => Box::new(BuiltinOptimal),
        ProducerKind::ExternalCommand => Box::new(ExternalCommand { config: config.clone() }),
        ProducerKind::HttpEndpoint => Box::new(HttpEndpoint::new(config.clone())),
    })
}

/// Returns the synthesized optimal plan in the requested representation.
pub struct BuiltinOptimal;

impl Producer for BuiltinOptimal {
    fn id(&self) -> String {
        "builtin_optimal".into()
    }

    fn strict_output(&self) -> bool {
        true
    }

    fn produce(&self, task: &Task<'_>) -> Result<ProducerOutput, ProducerError> {
        let plan = synthesize_optimal_plan(task.problem).map_err(|e| ProducerError::Failed(e.to_string()))?;
        let text = match task.representation {
            Representation::Blocksworld => emit_plan(&plan),
            Representation::Graph => emit_graph_plan(&translate_plan(&plan)),
        };
        Ok(ProducerOutput { text, thinking_tokens: None })
    }
}

/// Retries transport failures with exponential backoff.
fn with_retries<F>(max_retries: u32, backoff_ms: u64, mut call: F) -> Result<ProducerOutput, ProducerError>
where
    F: FnMut() -> Result<ProducerOutput, ProducerError>,
{
    let mut attempt = 0;
    loop {
        match call() {
            Err(e) if e.retryable() && attempt < max_retries => {
                thread::sleep(Duration::from_millis(backoff_ms.saturating_mul(1 << attempt.min(16))));
                attempt += 1;
            }
            other => return other,
        }
    }
}

/// Runs a planner binary on files; the plan is read from stdout.
pub struct ExternalCommand {
    config: ProducerConfig,
}

impl ExternalCommand {
    fn run_once(&self, task: &Task<'_>) -> Result<ProducerOutput, ProducerError> {
        let failed = |m: String| ProducerError::Failed(m);
        let dir = tempfile::tempdir().map_err(|e| failed(e.to_string()))?;
        let domain = dir.path().join("domain.pddl");
        let problem = dir.path().join("problem.pddl");
        let prompt = dir.path().join("prompt.txt");
        fs::write(&domain, DOMAIN_PDDL).map_err(|e| failed(e.to_string()))?;
        fs::write(&problem, task.problem_text).map_err(|e| failed(e.to_string()))?;
        fs::write(&prompt, task.prompt).map_err(|e| failed(e.to_string()))?;

        let argv = self.config.command.as_deref().unwrap_or_default();
        let timeout = self.config.timeout_secs.to_string();
        let mut placeholder = false;
        let mut args: Vec<String> = argv[1..]
            .iter()
            .map(|a| {
                placeholder |= a.contains("{domain}") || a.contains("{problem}") || a.contains("{prompt}");
                a.replace("{domain}", &domain.to_string_lossy())
                    .replace("{problem}", &problem.to_string_lossy())
                    .replace("{prompt}", &prompt.to_string_lossy())
                    .replace("{timeout}", &timeout)
            })
            .collect();
        if !placeholder {
            args.push(domain.to_string_lossy().into_owned());
            args.push(problem.to_string_lossy().into_owned());
        }

        // stdout goes to a file so a chatty child can never block on a full pipe
        let mut stdout = tempfile::tempfile().map_err(|e| failed(e.to_string()))?;
        let mut child = Command::new(&argv[0])
            .args(&args)
            .current_dir(dir.path())
            .env("PSTAR_TIME_BUDGET", &timeout)
            .stdin(Stdio::null())
            .stdout(stdout.try_clone().map_err(|e| failed(e.to_string()))?)
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| failed(format!("cannot start `{}`: {e}", argv[0])))?;
        let status = match child
            .wait_timeout(Duration::from_secs(self.config.timeout_secs))
            .map_err(|e| failed(e.to_string()))?
        {
            Some(status) => status,
            None => {
                let _ = child.kill();
                let _ = child.wait();
                return Err(ProducerError::Timeout(self.config.timeout_secs));
            }
        };
        if !status.success() {
            return Err(failed(format!("command exited with {status}")));
        }
        use std::io::Seek;
        stdout.rewind().map_err(|e| failed(e.to_string()))?;
        let mut text = String::new();
        stdout.read_to_string(&mut text).map_err(|e| failed(format!("unreadable output: {e}")))?;
        Ok(ProducerOutput { text, thinking_tokens: None })
    }
}

impl Producer for ExternalCommand {
    fn id(&self) -> String {
        self.config.producer_id()
    }

    fn produce(&self, task: &Task<'_>) -> Result<ProducerOutput, ProducerError> {
        self.run_once(task)
    }
}

/// Posts the prompt to a model endpoint.
pub struct HttpEndpoint {
    config: ProducerConfig,
    agent: ureq::Agent,
}

impl HttpEndpoint {
    pub fn new(config: ProducerConfig) -> HttpEndpoint {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        HttpEndpoint { config, agent }
    }

    fn request_body(&self, prompt: &str) -> Value {
        let mut body = match self.config.adapter {
            HttpAdapter::Generic => json!({ "prompt": prompt }),
            HttpAdapter::Gemini => json!({ "contents": [{ "role": "user", "parts": [{ "text": prompt }] }] }),
        };
        if let Some(model) = &self.config.model {
            if self.config.adapter == HttpAdapter::Generic {
                body["model"] = json!(model);
            }
        }
        if let Some(Value::Object(params)) = &self.config.params {
            let target = match self.config.adapter {
                HttpAdapter::Generic => &mut body,
                HttpAdapter::Gemini => {
                    body["generationConfig"] = json!({});
                    &mut body["generationConfig"]
                }
            };
            for (k, v) in params {
                target[k] = v.clone();
            }
        }
        body
    }

    fn call_once(&self, prompt: &str) -> Result<ProducerOutput, ProducerError> {
        let url = self.config.url.as_deref().unwrap_or_default();
        let mut req = self.agent.post(url).header("Content-Type", "application/json");
        if let Some(var) = &self.config.credential_env {
            let secret = std::env::var(var)
                .map_err(|_| ProducerError::Failed(format!("environment variable `{var}` is not set")))?;
            req = match self.config.adapter {
                HttpAdapter::Generic => req.header("Authorization", &format!("Bearer {secret}")),
                HttpAdapter::Gemini => req.header("x-goog-api-key", &secret),
            };
        }
        let mut resp = req.send_json(self.request_body(prompt)).map_err(|e| match e {
            ureq::Error::Timeout(_) => ProducerError::Timeout(self.config.timeout_secs),
            other => ProducerError::Transport(other.to_string()),
        })?;
        let status = resp.status().as_u16();
        if status == 429 || status >= 500 {
            return Err(ProducerError::Transport(format!("HTTP {status}")));
        }
        if status >= 400 {
            return Err(ProducerError::Failed(format!("HTTP {status}")));
        }
        let body: Value = resp
            .body_mut()
            .read_json()
            .map_err(|e| ProducerError::Failed(format!("bad response body: {e}")))?;
        parse_response(self.config.adapter, &body)
    }
}

/// Reads `(text, thinking tokens)` out of a response body. A missing token
/// count stays `None`; it is never reported as zero.
pub fn parse_response(adapter: HttpAdapter, body: &Value) -> Result<ProducerOutput, ProducerError> {
    let missing = |what: &str| ProducerError::Failed(format!("response has no {what}"));
    match adapter {
        HttpAdapter::Generic => {
            let text = body.get("text").and_then(Value::as_str).ok_or_else(|| missing("`text`"))?;
            Ok(ProducerOutput {
                text: text.to_string(),
                thinking_tokens: body.get("thinking_tokens").and_then(Value::as_u64),
            })
        }
        HttpAdapter::Gemini => {
            let parts = body
                .pointer("/candidates/0/content/parts")
                .and_then(Value::as_array)
                .ok_or_else(|| missing("candidate parts"))?;
            let text: String = parts
                .iter()
                .filter(|p| !p.get("thought").and_then(Value::as_bool).unwrap_or(false))
                .filter_map(|p| p.get("text").and_then(Value::as_str))
                .collect();
            Ok(ProducerOutput {
                text,
                thinking_tokens: body.pointer("/usageMetadata/thoughtsTokenCount").and_then(Value::as_u64),
            })
        }
    }
}

impl Producer for HttpEndpoint {
    fn id(&self) -> String {
        self.config.producer_id()
    }

    fn produce(&self, task: &Task<'_>) -> Result<ProducerOutput, ProducerError> {
        with_retries(self.config.max_retries, self.config.backoff_ms, || self.call_once(task.prompt))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::cell::Cell;

    #[test]
    fn config_validation() {
        assert!(ProducerConfig::builtin().validate().is_ok());
        let mut c = ProducerConfig::builtin();
        c.kind = ProducerKind::ExternalCommand;
        assert!(matches!(c.validate(), Err(HarnessError::Config(_))));
        c.kind = ProducerKind::HttpEndpoint;
        c.url = Some("http://127.0.0.1:9".into());
        c.credential_env = Some("PSTAR_TEST_SURELY_UNSET_VAR".into());
        assert!(c.validate().is_err());
    }

    #[test]
    fn retries_only_transport_errors() {
        let calls = Cell::new(0);
        let out = with_retries(3, 0, || {
            calls.set(calls.get() + 1);
            Err(ProducerError::Transport("down".into()))
        });
        assert!(out.is_err());
        assert_eq!(calls.get(), 4);
        calls.set(0);
        let _ = with_retries(3, 0, || {
            calls.set(calls.get() + 1);
            Err(ProducerError::Failed("bad".into()))
        });
        assert_eq!(calls.get(), 1);
    }

    #[test]
    fn gemini_response_parsing() {
        let body = json!({
            "candidates": [{ "content": { "parts": [
                { "text": "thinking...", "thought": true },
                { "text": "(pick-up b1)" }
            ]}}],
            "usageMetadata": { "thoughtsTokenCount": 1234 }
        });
        let out = parse_response(HttpAdapter::Gemini, &body).unwrap();
        assert_eq!(out.text, "(pick-up b1)");
        assert_eq!(out.thinking_tokens, Some(1234));
        let no_tokens = json!({ "text": "x" });
        assert_eq!(parse_response(HttpAdapter::Generic, &no_tokens).unwrap().thinking_tokens, None);
        assert!(parse_response(HttpAdapter::Gemini, &no_tokens).is_err());
    }

    #[test]
    fn request_bodies() {
        let mut c = ProducerConfig::builtin();
        c.kind = ProducerKind::HttpEndpoint;
        c.url = Some("http://localhost".into());
        c.model = Some("m".into());
        c.params = Some(json!({ "temperature": 0.0 }));
        let generic = HttpEndpoint::new(c.clone()).request_body("hi");
        assert_eq!(generic, json!({ "prompt": "hi", "model": "m", "temperature": 0.0 }));
        c.adapter = HttpAdapter::Gemini;
        let gemini = HttpEndpoint::new(c).request_body("hi");
        assert_eq!(gemini["generationConfig"]["temperature"], json!(0.0));
        assert_eq!(gemini["contents"][0]["parts"][0]["text"], json!("hi"));
    }
}
