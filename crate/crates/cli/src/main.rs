fn main() {
    std::process::exit(twinlight_cli::run(std::env::args_os()));
}
