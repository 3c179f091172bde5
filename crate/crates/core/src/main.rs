fn main() {
    std::process::exit(edgeplace::cli::run_from_args(std::env::args_os()));
}
