fn main() {
    std::process::exit(sepmp::run_cli(std::env::args_os()));
}
