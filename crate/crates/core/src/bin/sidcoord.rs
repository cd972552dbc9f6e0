fn main() {
    std::process::exit(sid_coord::cli::run(std::env::args_os()));
}
