fn main() {
    std::process::exit(conspec::cli::dispatch(std::env::args_os()));
}
