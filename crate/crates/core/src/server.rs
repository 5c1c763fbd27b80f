//! Wiring: configuration to a running HTTP service with its mail worker.

use std::future::Future;
use std::sync::Arc;
use std::time::Duration;

use axum::Router;
use tokio::net::TcpListener;
use tokio::sync::watch;

use crate::api::{router, AppState, RouterOptions, SessionStore};
use crate::certificate::{CertificateError, CertificateTemplate};
use crate::config::{Config, MailConfig};
use crate::notifier::{CaptureSink, MailError, MailGateway, Notifier, RetryPolicy, SmtpGateway};
use crate::persistence::{Store, StoreError};

/// How often the mail worker looks for retries that have become due.
const WORKER_POLL: Duration = Duration::from_secs(1);

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Certificate(#[from] CertificateError),
    #[error("mail gateway: {0}")]
    Mail(#[from] MailError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub enum Mail {
    Capture(Arc<CaptureSink>),
    Gateway(Arc<dyn MailGateway>),
}

pub struct ServiceSettings {
    pub session_ttl: Duration,
    pub retry: RetryPolicy,
    pub template: CertificateTemplate,
    pub options: RouterOptions,
}

impl Default for ServiceSettings {
    fn default() -> Self {
        let config = Config::default();
        ServiceSettings {
            session_ttl: config.session_ttl,
            retry: config.retry,
            template: CertificateTemplate::default(),
            options: RouterOptions::default(),
        }
    }
}

pub struct Service {
    pub state: AppState,
    options: RouterOptions,
}

impl Service {
    pub fn new(store: Arc<Store>, mail: Mail, settings: ServiceSettings) -> Self {
        let (gateway, capture): (Arc<dyn MailGateway>, _) = match mail {
            Mail::Capture(sink) => (sink.clone(), Some(sink)),
            Mail::Gateway(g) => (g, None),
        };
        let notifier = Arc::new(Notifier::new(store.clone(), gateway, settings.retry));
        Service {
            state: AppState {
                store,
                sessions: Arc::new(SessionStore::new(settings.session_ttl)),
                notifier,
                template: Arc::new(settings.template),
                capture: capture.filter(|_| settings.options.inspection),
            },
            options: settings.options,
        }
    }

    /// Opens the configured database; it must already be initialized.
    pub fn from_config(config: &Config) -> Result<Self, ServiceError> {
        let store = Arc::new(Store::open(config.store_config())?);
        let template = match &config.certificate_template {
            Some(path) => CertificateTemplate::load(path)?,
            None => CertificateTemplate::default(),
        };
        let mail = match &config.mail {
            MailConfig::Capture => Mail::Capture(Arc::new(CaptureSink::new())),
            MailConfig::Smtp(settings) => Mail::Gateway(Arc::new(SmtpGateway::new(settings)?)),
        };
        Ok(Service::new(
            store,
            mail,
            ServiceSettings {
                session_ttl: config.session_ttl,
                retry: config.retry,
                template,
                options: RouterOptions {
                    ui_dir: config.ui_dir.clone(),
                    inspection: config.inspection,
                },
            },
        ))
    }

    pub fn router(&self) -> Router {
        router(self.state.clone(), self.options.clone())
    }

    /// Starts the mail worker; it stops once `shutdown` carries `true`.
    pub fn spawn_worker(&self, shutdown: watch::Receiver<bool>) -> tokio::task::JoinHandle<()> {
        self.state.notifier.clone().spawn(WORKER_POLL, shutdown)
    }

    /// Serves until `signal` resolves, then lets in-flight requests finish
    /// and stops the mail worker.
    pub async fn serve(
        self,
        listener: TcpListener,
        signal: impl Future<Output = ()> + Send + 'static,
    ) -> Result<(), ServiceError> {
        let (stop, stopped) = watch::channel(false);
        let worker = self.spawn_worker(stopped);
        let app = self.router();
        let result = axum::serve(listener, app).with_graceful_shutdown(signal).await;
        let _ = stop.send(true);
        if let Err(e) = worker.await {
            tracing::error!(error = %e, "mail worker ended abnormally");
        }
        result.map_err(ServiceError::from)
    }
}
