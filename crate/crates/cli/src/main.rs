fn main() {
    std::process::exit(freqbin_lab::main_with_args(std::env::args_os()));
}
