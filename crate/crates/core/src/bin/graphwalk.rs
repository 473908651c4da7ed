fn main() {
    std::process::exit(graphwalk::cli::run(std::env::args_os()));
}
