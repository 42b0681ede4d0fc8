fn main() {
    std::process::exit(edemarad::cli::run(std::env::args_os()));
}
