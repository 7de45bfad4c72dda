fn main() {
    std::process::exit(hacomp::cli::run(std::env::args_os()));
}
