fn main() {
    env_logger::Builder::new().filter_level(log::LevelFilter::Info).parse_default_env().init();
    std::process::exit(lowdim_synth::cli::run(std::env::args_os()));
}
