fn main() {
    std::process::exit(apst::cli::main_with_args(std::env::args_os()));
}
