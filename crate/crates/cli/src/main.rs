fn main() {
    std::process::exit(cdpath_cli::run_cli(std::env::args_os()));
}
