fn main() {
    std::process::exit(cglp::cli::run_from(std::env::args_os()));
}
