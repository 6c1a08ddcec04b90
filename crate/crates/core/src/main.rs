fn main() {
    std::process::exit(vlscene::cli::run(std::env::args_os()));
}
