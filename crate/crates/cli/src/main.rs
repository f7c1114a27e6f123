fn main() {
    std::process::exit(webenv_cli::cli::run(std::env::args_os()));
}
