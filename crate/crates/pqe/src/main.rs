fn main() {
    std::process::exit(pqe::cli::main_entry(std::env::args_os()));
}
