fn main() {
    std::process::exit(qrnn_cti::cli::run(std::env::args_os()));
}
