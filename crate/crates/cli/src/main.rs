fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("LPOI_LOG", "warn"))
        .format_timestamp(None)
        .init();
    std::process::exit(lpoi_cli::run(std::env::args_os()));
}
