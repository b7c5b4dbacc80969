use clap::Parser;

#[derive(Parser)]
#[command(name = "gfpkit", version, about = "guarded fixpoint logic toolkit")]
struct Cli {}

fn main() {
    let _cli = Cli::parse();
}
