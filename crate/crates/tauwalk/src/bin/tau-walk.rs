fn main() {
    std::process::exit(tauwalk::cli::run(std::env::args_os()));
}
