fn main() {
    std::process::exit(opalab::cli::cli_main(std::env::args_os()));
}
