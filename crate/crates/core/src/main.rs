fn main() {
    std::process::exit(moisture_oed::harness::run_cli(std::env::args_os()));
}
