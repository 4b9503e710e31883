use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const TOKEN_ENV: &str = "MOLGRAPH_BACKEND_TOKEN";

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum BackendError {
    #[error("rate limited")]
    RateLimited,
    #[error("backend returned status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("unexpected backend response: {0}")]
    BadResponse(String),
}

impl BackendError {
    /// Rate limits, transport failures and 5xx responses are worth another try.
    pub fn is_retryable(&self) -> bool {
        match self {
            BackendError::RateLimited | BackendError::Transport(_) => true,
            BackendError::Status { status, .. } => *status >= 500,
            BackendError::BadResponse(_) => false,
        }
    }
}

/// A text-completion service.
pub trait GenerationBackend: Sync {
    fn name(&self) -> &str;
    fn complete(&self, prompt: &str) -> Result<String, BackendError>;
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StubMode {
    /// Two complete turns about the prompt's last SMILES.
    #[default]
    TwoTurn,
    /// One complete turn followed by an unanswered question.
    Dangling,
}

/// Deterministic offline backend. Its answers quote the molecule from the
/// prompt's final context block and the prompt length, so different
/// exemplar draws give different bytes.
#[derive(Clone, Debug, Default)]
pub struct StubBackend {
    pub mode: StubMode,
}

impl StubBackend {
    pub fn new(mode: StubMode) -> Self {
        StubBackend { mode }
    }
}

fn last_smiles(prompt: &str) -> &str {
    prompt
        .lines()
        .rev()
        .find_map(|l| l.strip_prefix("Molecule SMILES: "))
        .unwrap_or("")
        .trim()
}

impl GenerationBackend for StubBackend {
    fn name(&self) -> &str {
        "stub"
    }

    fn complete(&self, prompt: &str) -> Result<String, BackendError> {
        let smiles = last_smiles(prompt);
        let first = format!(
            "Question:\nWhat is the SMILES string of the molecule?\n===\nAnswer:\nThe SMILES string is {smiles}."
        );
        Ok(match self.mode {
            StubMode::TwoTurn => format!(
                "{first}\n===\nQuestion:\nHow long was the prompt?\n===\nAnswer:\nThe prompt had {} characters.",
                prompt.chars().count()
            ),
            StubMode::Dangling => format!("{first}\n===\nQuestion:\nWhich functional groups does it contain?"),
        })
    }
}

#[derive(Serialize)]
struct HttpRequest<'a> {
    prompt: &'a str,
}

#[derive(Deserialize)]
struct HttpResponse {
    completion: String,
}

/// POSTs `{"prompt": ...}` to an endpoint and reads `{"completion": ...}`.
/// Sends a bearer token when one is configured.
pub struct HttpBackend {
    endpoint: String,
    token: Option<String>,
    agent: ureq::Agent,
}

impl HttpBackend {
    pub fn new(endpoint: impl Into<String>, token: Option<String>, timeout: Duration) -> Self {
        HttpBackend { endpoint: endpoint.into(), token, agent: ureq::AgentBuilder::new().timeout(timeout).build() }
    }

    /// Token from `MOLGRAPH_BACKEND_TOKEN`, 60 s timeout.
    pub fn from_env(endpoint: impl Into<String>) -> Self {
        Self::new(endpoint, std::env::var(TOKEN_ENV).ok().filter(|t| !t.is_empty()), Duration::from_secs(60))
    }
}

impl GenerationBackend for HttpBackend {
    fn name(&self) -> &str {
        "http"
    }

    fn complete(&self, prompt: &str) -> Result<String, BackendError> {
        let mut req = self.agent.post(&self.endpoint);
        if let Some(t) = &self.token {
            req = req.set("Authorization", &format!("Bearer {t}"));
        }
        match req.send_json(HttpRequest { prompt }) {
            Ok(resp) => {
                let body: HttpResponse = resp.into_json().map_err(|e| BackendError::BadResponse(e.to_string()))?;
                Ok(body.completion)
            }
            Err(ureq::Error::Status(429, _)) => Err(BackendError::RateLimited),
            Err(ureq::Error::Status(status, resp)) => {
                Err(BackendError::Status { status, body: resp.into_string().unwrap_or_default() })
            }
            Err(ureq::Error::Transport(t)) => Err(BackendError::Transport(t.to_string())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stub_quotes_last_context() {
        let out = StubBackend::default().complete("Molecule SMILES: CC\n\nMolecule SMILES: CCO\nConversation:\n").unwrap();
        assert!(out.contains("is CCO."));
        let d = StubBackend::new(StubMode::Dangling).complete("x").unwrap();
        assert!(d.ends_with("contain?"));
    }

    #[test]
    fn retry_classes() {
        assert!(BackendError::RateLimited.is_retryable());
        assert!(BackendError::Status { status: 503, body: String::new() }.is_retryable());
        assert!(!BackendError::Status { status: 401, body: String::new() }.is_retryable());
    }
}
