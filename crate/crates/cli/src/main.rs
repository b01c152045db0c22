fn main() {
    std::process::exit(rangelens_cli::run_cli(std::env::args_os()));
}
