use clap::Parser;

fn main() {
    let cli = parabolic_rg::cli::Cli::parse();
    let result = parabolic_rg::cli::run(&cli);
    if let Err(e) = &result {
        eprintln!("error: {e}");
    }
    std::process::exit(parabolic_rg::cli::exit_code(&result));
}
