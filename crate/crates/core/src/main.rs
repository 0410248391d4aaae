fn main() {
    std::process::exit(lanesim::cli::run(std::env::args_os()));
}
