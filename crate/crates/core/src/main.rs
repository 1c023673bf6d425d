fn main() {
    std::process::exit(dmfnet::cli::cli_main(std::env::args_os()));
}
