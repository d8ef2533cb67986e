fn main() {
    std::process::exit(multidiscrete::cli::run(std::env::args_os()));
}
