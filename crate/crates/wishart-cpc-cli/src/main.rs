fn main() {
    std::process::exit(wishart_cpc_cli::run_cli(std::env::args_os()));
}
