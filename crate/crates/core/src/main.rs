fn main() {
    std::process::exit(qfilter::cli::run_cli(std::env::args_os()));
}
