fn main() {
    std::process::exit(isac_lab::run_command(std::env::args_os()));
}
