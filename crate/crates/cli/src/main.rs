fn main() {
    std::process::exit(bqn_cli::run(std::env::args_os()));
}
