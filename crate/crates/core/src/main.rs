fn main() {
    std::process::exit(evrender::cli::run(std::env::args_os()));
}
