fn main() {
    std::process::exit(damd_cli::run(std::env::args_os()));
}
