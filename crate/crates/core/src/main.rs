fn main() -> std::process::ExitCode {
    disposition::cli::main()
}
