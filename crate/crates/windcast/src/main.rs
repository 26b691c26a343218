fn main() {
    std::process::exit(windcast::run())
}
