fn main() {
    std::process::exit(dragkit_cli::cli_main(std::env::args_os()));
}
