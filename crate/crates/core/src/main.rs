fn main() {
    std::process::exit(diffcop::cli::run(std::env::args_os()));
}
