use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Mutex;

use lettre::message::Mailbox;
use lettre::transport::smtp::authentication::Credentials;
use lettre::{SmtpTransport, Transport};
use serde::{Deserialize, Serialize};

use super::OutboundMessage;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MailError {
    #[error("mail gateway unavailable: {0}")]
    Unavailable(String),
    #[error("message rejected: {0}")]
    Rejected(String),
}

/// Anything that can hand a message to a mail system.
pub trait MailGateway: Send + Sync {
    fn send(&self, message: &OutboundMessage) -> Result<(), MailError>;
}

/// In-process sink that records deliveries in order. Can be switched
/// offline to exercise retries.
#[derive(Debug, Default)]
pub struct CaptureSink {
    delivered: Mutex<Vec<OutboundMessage>>,
    offline: AtomicBool,
}

impl CaptureSink {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn messages(&self) -> Vec<OutboundMessage> {
        self.delivered.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }

    pub fn len(&self) -> usize {
        self.delivered.lock().unwrap_or_else(|e| e.into_inner()).len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn set_offline(&self, offline: bool) {
        self.offline.store(offline, Ordering::SeqCst);
    }
}

impl MailGateway for CaptureSink {
    fn send(&self, message: &OutboundMessage) -> Result<(), MailError> {
        if self.offline.load(Ordering::SeqCst) {
            return Err(MailError::Unavailable("capture sink is offline".into()));
        }
        self.delivered
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .push(message.clone());
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SmtpSecurity {
    /// Plain connection; only for local relays.
    None,
    #[default]
    StartTls,
    Tls,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SmtpSettings {
    pub host: String,
    #[serde(default)]
    pub port: Option<u16>,
    #[serde(default)]
    pub username: Option<String>,
    #[serde(default)]
    pub password: Option<String>,
    pub from: String,
    #[serde(default)]
    pub security: SmtpSecurity,
}

pub struct SmtpGateway {
    transport: SmtpTransport,
    from: Mailbox,
}

impl std::fmt::Debug for SmtpGateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SmtpGateway").field("from", &self.from).finish_non_exhaustive()
    }
}

impl SmtpGateway {
    pub fn new(settings: &SmtpSettings) -> Result<Self, MailError> {
        let from: Mailbox = settings
            .from
            .parse()
            .map_err(|e| MailError::Rejected(format!("invalid sender address: {e}")))?;
        let unavailable = |e: lettre::transport::smtp::Error| MailError::Unavailable(e.to_string());
        let mut builder = match settings.security {
            SmtpSecurity::None => SmtpTransport::builder_dangerous(&settings.host),
            SmtpSecurity::StartTls => SmtpTransport::starttls_relay(&settings.host).map_err(unavailable)?,
            SmtpSecurity::Tls => SmtpTransport::relay(&settings.host).map_err(unavailable)?,
        };
        if let Some(port) = settings.port {
            builder = builder.port(port);
        }
        if let (Some(user), Some(pass)) = (&settings.username, &settings.password) {
            builder = builder.credentials(Credentials::new(user.clone(), pass.clone()));
        }
        Ok(SmtpGateway {
            transport: builder.build(),
            from,
        })
    }
}

impl MailGateway for SmtpGateway {
    fn send(&self, message: &OutboundMessage) -> Result<(), MailError> {
        let to: Mailbox = message
            .to
            .parse()
            .map_err(|e| MailError::Rejected(format!("invalid recipient {}: {e}", message.to)))?;
        let email = lettre::Message::builder()
            .from(self.from.clone())
            .to(to)
            .subject(message.subject.clone())
            .body(message.body.clone())
            .map_err(|e| MailError::Rejected(e.to_string()))?;
        self.transport
            .send(&email)
            .map(|_| ())
            .map_err(|e| MailError::Unavailable(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::notifier::MessageKind;

    fn msg(to: &str) -> OutboundMessage {
        OutboundMessage {
            to: to.into(),
            subject: "s".into(),
            body: "b".into(),
            kind: MessageKind::Announcement,
            correlation_id: 1,
        }
    }

    #[test]
    fn capture_sink_keeps_order_and_can_fail() {
        let sink = CaptureSink::new();
        sink.send(&msg("a@x.org")).unwrap();
        sink.set_offline(true);
        assert!(matches!(sink.send(&msg("b@x.org")), Err(MailError::Unavailable(_))));
        sink.set_offline(false);
        sink.send(&msg("c@x.org")).unwrap();
        let to: Vec<String> = sink.messages().into_iter().map(|m| m.to).collect();
        assert_eq!(to, ["a@x.org", "c@x.org"]);
    }

    #[test]
    fn smtp_gateway_rejects_bad_sender() {
        let settings = SmtpSettings {
            host: "localhost".into(),
            port: Some(2525),
            username: None,
            password: None,
            from: "not an address".into(),
            security: SmtpSecurity::None,
        };
        assert!(matches!(SmtpGateway::new(&settings), Err(MailError::Rejected(_))));
    }

    #[test]
    fn unreachable_smtp_is_unavailable() {
        // Port 9 (discard) on localhost is closed in the sandbox.
        let settings = SmtpSettings {
            host: "127.0.0.1".into(),
            port: Some(9),
            username: None,
            password: None,
            from: "esem@example.org".into(),
            security: SmtpSecurity::None,
        };
        let gw = SmtpGateway::new(&settings).unwrap();
        assert!(matches!(gw.send(&msg("a@example.org")), Err(MailError::Unavailable(_))));
    }
}
