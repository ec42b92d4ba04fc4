fn main() {
    std::process::exit(hxai::cli::main_with_args(std::env::args_os()));
}
