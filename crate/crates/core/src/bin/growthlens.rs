fn main() {
    std::process::exit(growthlens::cli::run(std::env::args_os()));
}
