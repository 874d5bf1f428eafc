fn main() {
    std::process::exit(ddg::cli::main_with(std::env::args_os()));
}
