fn main() -> std::process::ExitCode {
    microtube::cli::main()
}
