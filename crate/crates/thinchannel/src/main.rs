fn main() {
    std::process::exit(thinchannel::cli::run_from(std::env::args_os()));
}
