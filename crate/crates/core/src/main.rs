fn main() {
    tracing_subscriber::fmt().with_max_level(tracing::Level::INFO).with_writer(std::io::stderr).init();
    std::process::exit(real::cli::run(std::env::args_os()));
}
