fn main() {
    std::process::exit(cellgraph::cli::run(std::env::args_os()));
}
