fn main() {
    std::process::exit(latent_health::cli::main_with_args(std::env::args_os()));
}
