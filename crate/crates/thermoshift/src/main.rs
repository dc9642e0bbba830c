fn main() {
    std::process::exit(thermoshift::cli::run(std::env::args_os()));
}
