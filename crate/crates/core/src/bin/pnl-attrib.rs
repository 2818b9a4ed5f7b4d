fn main() -> std::process::ExitCode {
    pnl_attrib::cli::main_entry()
}
