fn main() {
    std::process::exit(mixkern::harness::cli::run(std::env::args_os()));
}
