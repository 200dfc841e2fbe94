fn main() {
    std::process::exit(skmix::cli::run(std::env::args()));
}
