fn main() {
    std::process::exit(ampsep::cli::run_cli(std::env::args_os()));
}
