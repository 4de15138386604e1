fn main() -> std::process::ExitCode {
    tebe::cli::main()
}
