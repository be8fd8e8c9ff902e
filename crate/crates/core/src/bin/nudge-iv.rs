fn main() { std::process::exit(nudge_iv::cli::main()) }
