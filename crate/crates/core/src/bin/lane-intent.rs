fn main() {
    std::process::exit(lane_intent::cli::run(std::env::args_os()));
}
