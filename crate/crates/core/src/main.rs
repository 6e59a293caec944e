fn main() {
    std::process::exit(glrmf::cli::run(std::env::args_os()));
}
