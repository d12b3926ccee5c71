fn main() {
    std::process::exit(evmscope::cli::run(std::env::args_os()));
}
