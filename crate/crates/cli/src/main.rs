fn main() {
    std::process::exit(texvc_cli::run(std::env::args_os()));
}
