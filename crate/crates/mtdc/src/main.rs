fn main() {
    std::process::exit(mtdc::cli::run(std::env::args_os()));
}
