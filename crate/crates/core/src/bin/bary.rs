use clap::Parser;

fn main() {
    let args = hbary::cli::Args::parse();
    let code = hbary::cli::run(args, &mut std::io::stdout().lock(), &mut std::io::stderr().lock());
    std::process::exit(code);
}
