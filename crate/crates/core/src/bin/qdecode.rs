fn main() {
    std::process::exit(qdecode::cli::main_with_args(std::env::args_os()));
}
