fn main() -> std::process::ExitCode {
    levrl::cli::main()
}
