fn main() {
    std::process::exit(heis_cli::run(std::env::args_os()));
}
