fn main() {
    std::process::exit(netstress::run::main_with_args(std::env::args_os()));
}
