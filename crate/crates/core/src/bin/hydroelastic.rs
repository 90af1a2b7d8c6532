fn main() {
    std::process::exit(hydroelastic::cli::run(std::env::args_os()));
}
