fn main() {
    std::process::exit(parisian::cli::run(std::env::args_os()));
}
