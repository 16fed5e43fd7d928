fn main() {
    std::process::exit(injective_mps::cli::main_with_args(std::env::args_os()));
}
