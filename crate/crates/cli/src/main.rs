fn main() {
    std::process::exit(vidroute_cli::run(std::env::args_os()));
}
