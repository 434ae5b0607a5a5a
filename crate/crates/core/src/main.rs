fn main() -> std::process::ExitCode {
    nrc::cli::main()
}
