fn main() {
    let args: Vec<String> = std::env::args().collect();
    std::process::exit(rarefx::cli::run_command(&args));
}
