//! `esem`: operator tool for the seminar service.
//!
//! Exit codes: 0 success, 1 unexpected failure, 2 invalid arguments or
//! input, 3 I/O or missing files, 4 conflict with existing state.

use std::io::{IsTerminal, Read, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use esem_core::config::{Config, ConfigError};
use esem_core::domain::{AccessLevel, UserDraft};
use esem_core::persistence::{Store, StoreError};
use esem_core::seed::{seed, Profile};
use esem_core::server::{Service, ServiceError};

#[derive(Parser)]
#[command(name = "esem", version, about = "Seminar management service")]
struct Cli {
    /// Configuration file. Defaults apply when neither this nor ESEM_CONFIG is set.
    #[arg(long, global = true, env = "ESEM_CONFIG")]
    config: Option<PathBuf>,
    /// Database file, overriding the configuration.
    #[arg(long, global = true)]
    db: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Create an empty database.
    Init {
        /// Replace an existing database.
        #[arg(long)]
        force: bool,
    },
    /// Create an administrator account.
    CreateAdmin {
        username: String,
        email: String,
        /// Read the password from the first line of this file instead of prompting.
        #[arg(long)]
        password_file: Option<PathBuf>,
    },
    /// Load sample data into an empty database (profiles: demo, contention).
    Seed { profile: Profile },
    /// Run the HTTP service until interrupted.
    Serve {
        #[arg(long)]
        listen: Option<SocketAddr>,
    },
    /// Write a logical dump of the database.
    Export {
        /// Output file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Load a logical dump into an empty database, creating it if needed.
    Import {
        /// Input file; standard input when omitted.
        #[arg(long = "in")]
        input: Option<PathBuf>,
    },
}

#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }

    fn io(context: &str, path: &Path, e: std::io::Error) -> Self {
        Failure::new(3, format!("{context} {}: {e}", path.display()))
    }
}

impl From<StoreError> for Failure {
    fn from(e: StoreError) -> Self {
        let code = match &e {
            StoreError::AlreadyExists(_) | StoreError::Conflict(_) | StoreError::Duplicate { .. } => 4,
            StoreError::Io(_) | StoreError::NotFound { .. } => 3,
            StoreError::Validation(_) | StoreError::Import { .. } | StoreError::SchemaMismatch { .. } => 2,
            _ => 1,
        };
        let message = match &e {
            StoreError::Validation(details) => details
                .iter()
                .map(|v| format!("{}: {}", v.field, v.message))
                .collect::<Vec<_>>()
                .join("; "),
            other => other.to_string(),
        };
        Failure::new(code, message)
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        let code = if matches!(e, ConfigError::Read { .. }) { 3 } else { 2 };
        Failure::new(code, e.to_string())
    }
}

impl From<ServiceError> for Failure {
    fn from(e: ServiceError) -> Self {
        match e {
            ServiceError::Store(e) => e.into(),
            ServiceError::Io(e) => Failure::new(3, e.to_string()),
            other => Failure::new(2, other.to_string()),
        }
    }
}

fn load_config(cli: &Cli) -> Result<Config, Failure> {
    let mut config = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(db) = &cli.db {
        config.database = db.clone();
    }
    Ok(config)
}

fn read_password(file: Option<&Path>) -> Result<String, Failure> {
    let raw = match file {
        Some(path) => std::fs::read_to_string(path).map_err(|e| Failure::io("cannot read", path, e))?,
        None if std::io::stdin().is_terminal() => {
            let first = rpassword::prompt_password("Password: ").map_err(|e| Failure::new(3, e.to_string()))?;
            let again = rpassword::prompt_password("Repeat password: ").map_err(|e| Failure::new(3, e.to_string()))?;
            if first != again {
                return Err(Failure::new(2, "passwords do not match"));
            }
            first
        }
        None => {
            let mut line = String::new();
            std::io::stdin()
                .read_line(&mut line)
                .map_err(|e| Failure::new(3, e.to_string()))?;
            line
        }
    };
    Ok(raw.lines().next().unwrap_or_default().to_string())
}

async fn shutdown_signal() {
    #[cfg(unix)]
    {
        use tokio::signal::unix::{signal, SignalKind};
        match signal(SignalKind::terminate()) {
            Ok(mut term) => {
                tokio::select! {
                    _ = tokio::signal::ctrl_c() => {}
                    _ = term.recv() => {}
                }
            }
            Err(_) => {
                let _ = tokio::signal::ctrl_c().await;
            }
        }
    }
    #[cfg(not(unix))]
    {
        let _ = tokio::signal::ctrl_c().await;
    }
    tracing::info!("shutting down");
}

fn run(cli: Cli) -> Result<(), Failure> {
    let config = load_config(&cli)?;
    match cli.command {
        Command::Init { force } => {
            Store::init(config.store_config(), force)?;
            println!("initialized {}", config.database.display());
        }
        Command::CreateAdmin {
            username,
            email,
            password_file,
        } => {
            let store = Store::open(config.store_config())?;
            let password = read_password(password_file.as_deref())?;
            let user = store.create_user(&UserDraft {
                username,
                password: Some(password),
                access_level: AccessLevel::Admin.code(),
                email,
                ..Default::default()
            })?;
            println!("created administrator {} (id {})", user.username, user.id);
        }
        Command::Seed { profile } => {
            let store = Store::open(config.store_config())?;
            let summary = seed(&store, profile)?;
            println!(
                "seeded {profile}: {} users, {} seminars, {} enrollments",
                summary.users, summary.seminars, summary.enrollments
            );
        }
        Command::Serve { listen } => {
            let addr = listen.unwrap_or(config.listen);
            let runtime = tokio::runtime::Runtime::new().map_err(|e| Failure::new(1, e.to_string()))?;
            runtime.block_on(async {
                let service = Service::from_config(&config)?;
                let listener = tokio::net::TcpListener::bind(addr)
                    .await
                    .map_err(|e| Failure::new(3, format!("cannot listen on {addr}: {e}")))?;
                tracing::info!(addr = %listener.local_addr().unwrap_or(addr), "listening");
                service.serve(listener, shutdown_signal()).await?;
                Ok::<_, Failure>(())
            })?;
        }
        Command::Export { out } => {
            let store = Store::open(config.store_config())?;
            let dump = store.export_logical()?;
            match out {
                Some(path) => std::fs::write(&path, dump).map_err(|e| Failure::io("cannot write", &path, e))?,
                None => std::io::stdout()
                    .write_all(dump.as_bytes())
                    .map_err(|e| Failure::new(3, e.to_string()))?,
            }
        }
        Command::Import { input } => {
            let dump = match input {
                Some(path) => std::fs::read_to_string(&path).map_err(|e| Failure::io("cannot read", &path, e))?,
                None => {
                    let mut text = String::new();
                    std::io::stdin()
                        .read_to_string(&mut text)
                        .map_err(|e| Failure::new(3, e.to_string()))?;
                    text
                }
            };
            let store = if config.database.exists() {
                Store::open(config.store_config())?
            } else {
                Store::init(config.store_config(), false)?
            };
            store.import_logical(&dump)?;
            eprintln!("imported into {}", config.database.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("esem: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
