fn main() {
    std::process::exit(intrinsic_matern::cli::run(std::env::args_os()));
}
