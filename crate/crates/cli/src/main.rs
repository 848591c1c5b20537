fn main() {
    std::process::exit(tagwatch_cli::run(std::env::args_os()));
}
