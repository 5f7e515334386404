fn main() {
    std::process::exit(psr_squeeze::cli::cli_main(std::env::args_os()));
}
