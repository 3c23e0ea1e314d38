fn main() {
    std::process::exit(turncal::cli::run());
}
