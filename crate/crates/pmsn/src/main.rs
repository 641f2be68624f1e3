fn main() {
    std::process::exit(pmsn::cli::run(std::env::args_os()));
}
