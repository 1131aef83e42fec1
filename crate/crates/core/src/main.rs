fn main() {
    std::process::exit(usskill::cli::run(std::env::args_os()));
}
