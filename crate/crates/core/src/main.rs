fn main() {
    std::process::exit(activenav::cli::run(std::env::args_os()));
}
