fn main() {
    let code = sharpdro_cli::run(std::env::args().collect());
    std::process::exit(code);
}
