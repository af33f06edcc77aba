fn main() {
    std::process::exit(zigzag_dirac::cli::main_with_args(std::env::args_os()));
}
