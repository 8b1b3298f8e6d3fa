fn main() {
    let result = roadforge_cli::run(std::env::args_os());
    std::process::exit(result.exit_code);
}
