fn main() {
    std::process::exit(droidrepro::cli::run(std::env::args_os()));
}
