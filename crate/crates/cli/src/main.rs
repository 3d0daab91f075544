mod args;
mod commands;
mod manifest;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use commands::Usage;

fn run(cli: &Cli) -> anyhow::Result<()> {
    match &cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Sample(a) => commands::sample(a),
        Command::Register(a) => commands::register(a),
        Command::Bench(a) => commands::bench(a),
        Command::Ablate(a) => commands::ablate(a),
    }
}

/// One line: `error: kind=<kind> msg=<message>`.
fn report(err: &anyhow::Error) {
    let kind = err
        .chain()
        .find_map(|e| {
            e.downcast_ref::<Usage>()
                .map(|u| u.0.kind())
                .or_else(|| e.downcast_ref::<fastmac_core::Error>().map(|e| e.kind()))
                .or_else(|| e.downcast_ref::<std::io::Error>().map(|_| "io"))
        })
        .unwrap_or("runtime");
    let msg = format!("{err:#}").replace('\n', " ");
    eprintln!("error: kind={kind} msg={msg}");
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cli.threads {
        if t == 0 {
            eprintln!("error: kind=usage msg=--threads must be at least 1");
            return ExitCode::from(2);
        }
        pool = pool.num_threads(t);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: kind=runtime msg={e}");
            return ExitCode::from(1);
        }
    };

    match pool.install(|| run(&cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report(&e);
            if e.is::<Usage>() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
