fn main() {
    std::process::exit(fhed::netsvc::cli::run(std::env::args_os()));
}
