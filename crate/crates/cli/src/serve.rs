use std::net::SocketAddr;
use std::path::PathBuf;
use std::time::Duration;

use anyhow::{bail, Context};
use clap::{Args, ValueEnum};
use plr_core::gateway::mock::{serve, FixtureTable, ServerOptions};
use plr_core::gateway::MockRules;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MockMode {
    /// Table lookups from --fixture; unlisted keys get (0.5, 0.5).
    Fixture,
    /// Caption-hash judging and Jaccard verification.
    Hash,
    /// Same rules as `hash`.
    Jaccard,
}

#[derive(Debug, Clone, Args)]
#[command(after_long_help = "\
Routes: POST /judge {video_path, start_s, end_s, caption} -> {p_yes, p_no}
        POST /verify {question, reference, answer} -> {p_correct, p_incorrect}
Fixture file: {\"judge\": [{video_path, start_s, end_s, caption, p_yes, p_no}],
               \"verify\": [{question, reference, answer, p_correct, p_incorrect}]}
The bound address is printed to stderr as `listening on http://HOST:PORT`.")]
pub struct ServeArgs {
    /// Port to bind; 0 picks a free one.
    #[arg(long, default_value_t = 8000)]
    pub port: u16,
    /// Interface to bind.
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, value_enum, default_value_t = MockMode::Hash)]
    pub mode: MockMode,
    /// Fixture table JSON, required in fixture mode.
    #[arg(long)]
    pub fixture: Option<PathBuf>,
    /// Answer 503 once this many requests are in flight.
    #[arg(long)]
    pub max_in_flight: Option<usize>,
    /// Added latency per request in milliseconds.
    #[arg(long, default_value_t = 0)]
    pub delay_ms: u64,
}

pub fn rules_for(mode: MockMode, fixture: Option<&std::path::Path>) -> anyhow::Result<MockRules> {
    match mode {
        MockMode::Fixture => {
            let Some(path) = fixture else {
                bail!("--fixture is required in fixture mode");
            };
            let table = FixtureTable::load(path).map_err(anyhow::Error::msg)?;
            MockRules::fixture(table).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
        }
        MockMode::Hash | MockMode::Jaccard => Ok(MockRules::rules()),
    }
}

pub fn run(args: ServeArgs) -> anyhow::Result<()> {
    let rules = rules_for(args.mode, args.fixture.as_deref())?;
    let addr: SocketAddr = format!("{}:{}", args.host, args.port)
        .parse()
        .with_context(|| format!("bad address {}:{}", args.host, args.port))?;
    let options = ServerOptions {
        max_in_flight: args.max_in_flight,
        delay: Duration::from_millis(args.delay_ms),
    };
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()?
        .block_on(async move {
            let listener = tokio::net::TcpListener::bind(addr)
                .await
                .with_context(|| format!("cannot bind {addr}"))?;
            eprintln!("listening on http://{}", listener.local_addr()?);
            tokio::select! {
                r = serve(listener, rules, options) => r.context("server stopped"),
                _ = tokio::signal::ctrl_c() => Ok(()),
            }
        })
}
