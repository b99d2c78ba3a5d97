fn main() {
    std::process::exit(stablefront::cli::run_command(std::env::args_os()));
}
