fn main() {
    std::process::exit(fcpca::cli::main_entry());
}
