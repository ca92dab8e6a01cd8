fn main() {
    std::process::exit(polconv::cli::run(std::env::args_os()));
}
