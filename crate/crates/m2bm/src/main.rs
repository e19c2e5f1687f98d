fn main() -> std::process::ExitCode {
    m2bm::cli::main()
}
