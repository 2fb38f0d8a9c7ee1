fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("FARECAST_LOG", "warn")).init();
    std::process::exit(farecast::cli::run(std::env::args_os()));
}
