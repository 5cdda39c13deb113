fn main() {
    std::process::exit(trustscore::cli::run(std::env::args_os()));
}
