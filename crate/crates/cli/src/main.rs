fn main() {
    std::process::exit(udat_cli::run(std::env::args_os()));
}
