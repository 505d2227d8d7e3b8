fn main() {
    std::process::exit(ainfty_lab::cli::run(std::env::args_os()));
}
