fn main() {
    std::process::exit(qens::cli::run(std::env::args_os()));
}
