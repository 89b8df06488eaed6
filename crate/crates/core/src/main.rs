fn main() {
    std::process::exit(icered::cli::run_cli(std::env::args_os()));
}
