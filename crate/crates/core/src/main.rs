fn main() {
    std::process::exit(bayeserr::cli::run(std::env::args_os()));
}
