//! Single-use human approval tokens gating every state-changing tool.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Ten virtual minutes.
pub const DEFAULT_TOKEN_TTL_MS: u64 = 10 * 60 * 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApprovalState {
    Pending,
    Approved,
    Denied,
    Expired,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Approve,
    Deny,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApprovalToken {
    pub token: String,
    pub action_summary: String,
    pub state: ApprovalState,
    pub requested_at: u64,
    pub expires_at: u64,
    pub consumed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ApprovalError {
    #[error("approval token required")]
    Missing,
    #[error("unknown approval token '{0}'")]
    Unknown(String),
    #[error("approval token '{0}' is unapproved ({1:?})")]
    Unapproved(String, ApprovalState),
    #[error("approval token '{0}' has expired")]
    Expired(String),
    #[error("approval token '{0}' was already consumed")]
    Consumed(String),
    #[error("approval token '{0}' was already resolved as {1:?}")]
    AlreadyResolved(String, ApprovalState),
}

pub struct Approvals {
    tokens: BTreeMap<String, ApprovalToken>,
    ttl_ms: u64,
    next_id: u64,
}

impl Default for Approvals {
    fn default() -> Self {
        Self::new(DEFAULT_TOKEN_TTL_MS)
    }
}

impl Approvals {
    pub fn new(ttl_ms: u64) -> Self {
        Self {
            tokens: BTreeMap::new(),
            ttl_ms,
            next_id: 0,
        }
    }

    pub fn request(&mut self, action_summary: &str, now_ms: u64) -> ApprovalToken {
        self.next_id += 1;
        let token = ApprovalToken {
            token: format!("apv-{:04}", self.next_id),
            action_summary: action_summary.to_owned(),
            state: ApprovalState::Pending,
            requested_at: now_ms,
            expires_at: now_ms + self.ttl_ms,
            consumed: false,
        };
        self.tokens.insert(token.token.clone(), token.clone());
        token
    }

    pub fn get(&self, token: &str) -> Option<&ApprovalToken> {
        self.tokens.get(token)
    }

    pub fn pending(&self) -> impl Iterator<Item = &ApprovalToken> {
        self.tokens.values().filter(|t| t.state == ApprovalState::Pending)
    }

    pub fn all(&self) -> impl Iterator<Item = &ApprovalToken> {
        self.tokens.values()
    }

    /// Operator decision. Repeating the same decision on an unconsumed token is a no-op.
    pub fn resolve(
        &mut self,
        token: &str,
        decision: Decision,
        now_ms: u64,
    ) -> Result<ApprovalToken, ApprovalError> {
        self.expire(now_ms);
        let entry = self
            .tokens
            .get_mut(token)
            .ok_or_else(|| ApprovalError::Unknown(token.to_owned()))?;
        if entry.consumed {
            return Err(ApprovalError::Consumed(token.to_owned()));
        }
        let wanted = match decision {
            Decision::Approve => ApprovalState::Approved,
            Decision::Deny => ApprovalState::Denied,
        };
        match entry.state {
            ApprovalState::Pending => {
                entry.state = wanted;
                Ok(entry.clone())
            }
            ApprovalState::Expired => Err(ApprovalError::Expired(token.to_owned())),
            state if state == wanted => Ok(entry.clone()),
            state => Err(ApprovalError::AlreadyResolved(token.to_owned(), state)),
        }
    }

    /// Checks the token would be accepted, without consuming it.
    pub fn check(&self, token: Option<&str>, now_ms: u64) -> Result<(), ApprovalError> {
        let token = token.ok_or(ApprovalError::Missing)?;
        let entry = self
            .tokens
            .get(token)
            .ok_or_else(|| ApprovalError::Unknown(token.to_owned()))?;
        if entry.consumed {
            return Err(ApprovalError::Consumed(token.to_owned()));
        }
        if entry.state == ApprovalState::Expired || now_ms >= entry.expires_at {
            return Err(ApprovalError::Expired(token.to_owned()));
        }
        if entry.state != ApprovalState::Approved {
            return Err(ApprovalError::Unapproved(token.to_owned(), entry.state));
        }
        Ok(())
    }

    pub fn consume(&mut self, token: Option<&str>, now_ms: u64) -> Result<(), ApprovalError> {
        self.check(token, now_ms)?;
        let entry = self.tokens.get_mut(token.expect("checked")).expect("checked");
        entry.consumed = true;
        Ok(())
    }

    /// Expires pending and unused approved tokens past their deadline.
    pub fn expire(&mut self, now_ms: u64) -> usize {
        let mut n = 0;
        for t in self.tokens.values_mut() {
            let open = t.state == ApprovalState::Pending || (t.state == ApprovalState::Approved && !t.consumed);
            if open && now_ms >= t.expires_at {
                t.state = ApprovalState::Expired;
                n += 1;
            }
        }
        n
    }
}
