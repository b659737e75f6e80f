fn main() {
    std::process::exit(astoc::cli::run(std::env::args_os().collect()));
}
