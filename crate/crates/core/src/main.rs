fn main() -> std::process::ExitCode {
    dpp_lab::cli::run(std::env::args_os())
}
