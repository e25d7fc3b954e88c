use std::io::{stderr, stdin, stdout};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let code = tabwright::cli::run(std::env::args_os(), &mut stdin().lock(), &mut stdout(), &mut stderr());
    std::process::exit(code);
}
