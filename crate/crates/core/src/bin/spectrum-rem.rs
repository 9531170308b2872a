fn main() {
    std::process::exit(spectrum_rem::cli::main_from_args(std::env::args_os()));
}
