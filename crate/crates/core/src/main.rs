fn main() {
    std::process::exit(rpcaf::cli::run(std::env::args_os()));
}
