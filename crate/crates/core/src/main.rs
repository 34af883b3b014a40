fn main() {
    std::process::exit(boxrefine::cli_io::run(std::env::args_os()));
}
