fn main() {
    std::process::exit(stopdeck::cli::main_entry());
}
