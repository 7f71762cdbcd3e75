fn main() {
    std::process::exit(mch_lab::cli::dispatch(std::env::args_os()));
}
