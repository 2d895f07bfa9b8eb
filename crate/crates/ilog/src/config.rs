use std::collections::BTreeMap;
use std::path::Path;

use ilog_core::context::ParticipantId;
use ilog_core::schedule::Actor;
use serde::{Deserialize, Serialize};

use crate::format::{load_config, FormatError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoleKind {
    Researcher,
    Participant,
    Platform,
}

/// One bearer token and the principal it authenticates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenEntry {
    pub token: String,
    pub principal: String,
    pub role: RoleKind,
    /// Required for participant tokens, rejected otherwise.
    #[serde(default)]
    pub participant: Option<ParticipantId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Principal {
    pub id: String,
    pub role: Actor,
}

/// Service configuration file (TOML):
///
/// ```toml
/// poll_timeout_ms = 25000
///
/// [[tokens]]
/// token = "researcher-secret"
/// principal = "alice"
/// role = "researcher"
///
/// [[tokens]]
/// token = "p000-secret"
/// principal = "p000"
/// role = "participant"
/// participant = "p000"
/// ```
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServiceConfig {
    #[serde(default)]
    pub tokens: Vec<TokenEntry>,
    /// Longest a stream request waits for new records.
    #[serde(default = "default_poll_timeout")]
    pub poll_timeout_ms: u64,
}

fn default_poll_timeout() -> u64 {
    25_000
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self { tokens: Vec::new(), poll_timeout_ms: default_poll_timeout() }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("token for {0:?}: {1}")]
    Token(String, &'static str),
}

impl ServiceConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let c: ServiceConfig = load_config(path)?;
        c.principals()?;
        Ok(c)
    }

    pub fn principals(&self) -> Result<BTreeMap<String, Principal>, ConfigError> {
        let mut out = BTreeMap::new();
        for t in &self.tokens {
            let role = match (t.role, &t.participant) {
                (RoleKind::Participant, Some(p)) => Actor::Participant(p.clone()),
                (RoleKind::Participant, None) => return Err(ConfigError::Token(t.principal.clone(), "participant id missing")),
                (_, Some(_)) => return Err(ConfigError::Token(t.principal.clone(), "only participant tokens name a participant")),
                (RoleKind::Researcher, None) => Actor::Researcher,
                (RoleKind::Platform, None) => Actor::Platform,
            };
            if t.token.is_empty() {
                return Err(ConfigError::Token(t.principal.clone(), "empty token"));
            }
            if out.insert(t.token.clone(), Principal { id: t.principal.clone(), role }).is_some() {
                return Err(ConfigError::Token(t.principal.clone(), "token listed twice"));
            }
        }
        Ok(out)
    }
}
