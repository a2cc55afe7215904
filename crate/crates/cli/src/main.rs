fn main() {
    std::process::exit(betagas_cli::run_cli(std::env::args_os()));
}
