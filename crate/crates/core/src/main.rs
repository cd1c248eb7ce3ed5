fn main() {
    std::process::exit(selbias::cli::cli_main(std::env::args_os()));
}
