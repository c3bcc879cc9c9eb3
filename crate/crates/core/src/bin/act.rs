fn main() {
    std::process::exit(act::cli::run(std::env::args_os()));
}
