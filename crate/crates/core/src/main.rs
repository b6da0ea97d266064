fn main() {
    std::process::exit(ctcount::run_cli(std::env::args_os()));
}
