use std::io;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DEEPLINK_LOG", "warn")).init();
    let code = deeplink::cli::run(std::env::args(), &mut io::stdout().lock(), &mut io::stderr().lock());
    std::process::exit(code);
}
