fn main() {
    std::process::exit(sharpmart::run(std::env::args_os()));
}
