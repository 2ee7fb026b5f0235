fn main() {
    std::process::exit(blinkswarm::app::main_with_args(std::env::args_os()));
}
