fn main() {
    std::process::exit(mean_energy::cli::run(std::env::args_os()));
}
