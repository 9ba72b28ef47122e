fn main() {
    std::process::exit(gpfq::cli::run(std::env::args_os()));
}
