fn main() {
    std::process::exit(spmhd::cli::run_from_args(std::env::args_os()));
}
