fn main() {
    std::process::exit(larc_core::cli::main_with_args(std::env::args_os()));
}
