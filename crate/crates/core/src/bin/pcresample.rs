fn main() {
    std::process::exit(pcresample::cli::run(std::env::args_os()));
}
