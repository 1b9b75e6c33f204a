fn main() {
    std::process::exit(fixlab::cli::dispatch(std::env::args_os()));
}
