fn main() {
    std::process::exit(oracle_gap::cli::main_with_args(std::env::args_os()));
}
