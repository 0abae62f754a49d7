fn main() {
    std::process::exit(rcto::cli::main(std::env::args_os()));
}
