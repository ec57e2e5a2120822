fn main() {
    std::process::exit(heatflow_cli::run(std::env::args_os()));
}
