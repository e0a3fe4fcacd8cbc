fn main() {
    std::process::exit(vortex_spectra::cli::cli(std::env::args_os()));
}
