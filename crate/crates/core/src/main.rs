fn main() {
    std::process::exit(ctr_nli::cli::run(std::env::args_os()));
}
