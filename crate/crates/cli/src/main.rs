use clap::Parser;

fn main() -> anyhow::Result<()> {
    extcontrol_cli::run(extcontrol_cli::Cli::parse())
}
