fn main() {
    std::process::exit(crew_cli::cli_main(std::env::args_os()));
}
