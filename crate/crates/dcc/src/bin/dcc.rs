use clap::Parser;

fn main() -> anyhow::Result<()> {
    dcc::cli::run(dcc::cli::Cli::parse())
}
