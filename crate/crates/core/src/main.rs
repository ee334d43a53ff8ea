fn main() {
    std::process::exit(safecomp::app::cli_main(std::env::args_os()));
}
