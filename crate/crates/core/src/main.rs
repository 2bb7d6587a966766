fn main() {
    std::process::exit(chpdet::cli::run(std::env::args_os()));
}
