fn main() {
    std::process::exit(geoskill::cli::run(std::env::args_os()));
}
