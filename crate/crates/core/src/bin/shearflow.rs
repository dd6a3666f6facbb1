fn main() {
    std::process::exit(shearflow::cli::run(std::env::args_os()));
}
