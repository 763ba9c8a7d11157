fn main() {
    std::process::exit(ilnrs::cli::run(std::env::args_os()));
}
