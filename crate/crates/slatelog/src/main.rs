fn main() {
    std::process::exit(slatelog::cli::main_entry());
}
