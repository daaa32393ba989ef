fn main() {
    std::process::exit(cmc_lab::cli::run(std::env::args_os()));
}
