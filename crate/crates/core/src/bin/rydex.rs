fn main() {
    std::process::exit(rydex::cli::main_with_args(std::env::args_os()));
}
