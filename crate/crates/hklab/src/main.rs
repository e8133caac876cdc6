fn main() {
    std::process::exit(hklab::run(std::env::args_os()));
}
