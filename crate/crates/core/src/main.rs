fn main() {
    std::process::exit(signmask::cli::run(std::env::args_os()));
}
