fn main() {
    std::process::exit(slotie::cli::run(std::env::args_os()));
}
