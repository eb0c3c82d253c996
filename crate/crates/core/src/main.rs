fn main() {
    std::process::exit(t2fnn::cli::run(std::env::args_os()));
}
