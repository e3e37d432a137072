fn main() {
    std::process::exit(botlstm::cli::run(std::env::args_os()));
}
