fn main() -> std::process::ExitCode {
    edcheck::cli::main()
}
