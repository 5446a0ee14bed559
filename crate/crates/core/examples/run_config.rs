//! Runs a command from a TOML configuration the same way the command-line tool does.
//!
//! `cargo run --example run_config -- crates/core/config/example.toml`

use roughvol::cli::{execute, Command};
use roughvol::config::RunConfig;

fn main() -> roughvol::Result<()> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/config/example.toml").into());
    let mut cfg = RunConfig::load(path.as_ref())?;
    cfg.output.dir = std::env::temp_dir().join("roughvol-example");
    print!("{}", execute(&Command::Params, &cfg)?);
    cfg.mc.n_paths = 20_000;
    print!("{}", execute(&Command::Price, &cfg)?);
    Ok(())
}
