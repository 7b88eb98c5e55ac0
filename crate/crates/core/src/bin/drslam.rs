fn main() {
    std::process::exit(drslam::cli::run_cli(std::env::args_os()));
}
