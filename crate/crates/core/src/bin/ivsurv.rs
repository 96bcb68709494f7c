fn main() {
    std::process::exit(ivsurv::cli::run(std::env::args_os()));
}
