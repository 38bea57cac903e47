fn main() {
    let code = sparse_landscape::cli::run(std::env::args_os(), &mut std::io::stdout());
    std::process::exit(code);
}
