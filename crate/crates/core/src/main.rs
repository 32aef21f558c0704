fn main() {
    std::process::exit(slogette::cli::main_with(std::env::args_os()));
}
