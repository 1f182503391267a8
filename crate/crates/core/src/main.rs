fn main() {
    let code = eprank::cli::run(std::env::args_os());
    std::process::exit(code);
}
