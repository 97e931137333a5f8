use std::net::SocketAddr;
use std::path::PathBuf;
use std::time::Duration;

use ivispar_service::{serve, AppState, ServiceConfig};

use super::load_templates;
use crate::{Context, Failure};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Listen address. Default 127.0.0.1:8080.
    #[arg(long)]
    pub addr: Option<String>,
    /// Seconds of inactivity before a session expires. Default 1800.
    #[arg(long, value_name = "SECS")]
    pub idle_timeout: Option<u64>,
    /// Maximum actions per session. Default 20.
    #[arg(long)]
    pub step_cap: Option<u32>,
    /// Past steps shown in each observation. Default 2.
    #[arg(long)]
    pub context_window: Option<usize>,
    /// Directory with the prompt template files. Default: built-in templates.
    #[arg(long)]
    pub templates: Option<PathBuf>,
}

pub fn run(ctx: &Context, args: Args) -> Result<(), Failure> {
    let cfg = &ctx.config.serve;
    let addr: SocketAddr = args
        .addr
        .as_deref()
        .or(cfg.addr.as_deref())
        .unwrap_or("127.0.0.1:8080")
        .parse()
        .map_err(|e| Failure::usage(format!("--addr: {e}")))?;
    let mut config = ServiceConfig::new(&ctx.data_dir);
    config.idle_timeout = Duration::from_secs(args.idle_timeout.or(cfg.idle_timeout).unwrap_or(1800));
    if let Some(cap) = args.step_cap.or(cfg.step_cap) {
        config.engine.step_cap = cap;
    }
    if let Some(window) = args.context_window.or(cfg.context_window) {
        config.engine.context_window = window;
    }
    config.engine.validate().map_err(|e| Failure::usage(e.to_string()))?;
    config.templates = load_templates(args.templates.as_deref())?;

    let state = AppState::open(config).map_err(|e| Failure::format(e.to_string()))?;
    let runtime = tokio::runtime::Runtime::new().map_err(|e| Failure::usage(e.to_string()))?;
    runtime
        .block_on(serve(state, addr))
        .map_err(|e| Failure::usage(format!("{addr}: {e}")))
}
