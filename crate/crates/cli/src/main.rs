fn main() {
    std::process::exit(intent2dag_cli::main_with(std::env::args_os()));
}
