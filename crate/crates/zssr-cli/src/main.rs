//! Command-line front end for the zssr-core library.

mod commands;
mod config;

use clap::{Parser, Subcommand};

use crate::commands::{DegradeArgs, EvalArgs, MakeKernelArgs, ResizeArgs, SrArgs};
use crate::config::AppError;

#[derive(Debug, Parser)]
#[command(
    name = "zssr",
    version,
    about = "Zero-shot single-image super-resolution"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Super-resolve one image by training on the image itself.
    Sr(SrArgs),
    /// Write a Gaussian downscaling kernel file.
    MakeKernel(MakeKernelArgs),
    /// Downscale ground-truth images and emit a manifest.
    Degrade(DegradeArgs),
    /// Score images: one pair, or a whole manifest.
    Eval(EvalArgs),
    /// Plain bicubic resize.
    Resize(ResizeArgs),
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version land here too; only real parse errors exit 1.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };

    let result = match &cli.command {
        Command::Sr(args) => commands::cmd_sr(args),
        Command::MakeKernel(args) => commands::cmd_make_kernel(args),
        Command::Degrade(args) => commands::cmd_degrade(args),
        Command::Eval(args) => commands::cmd_eval(args),
        Command::Resize(args) => commands::cmd_resize(args),
    };

    match result {
        Ok(()) => {}
        Err(AppError::Usage(msg)) => {
            eprintln!("error: {msg}");
            std::process::exit(1);
        }
        Err(AppError::Runtime(e)) => {
            eprintln!("error: {e}");
            std::process::exit(2);
        }
    }
}
