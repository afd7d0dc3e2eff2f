fn main() {
    std::process::exit(pcmeta::cli::main_with_args(std::env::args_os()));
}
