use clap::Parser;

fn main() {
    // Die quietly when a downstream pipe closes (e.g. `femtoalloc ... | head`).
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = femtoalloc::cli::Cli::parse();
    std::process::exit(femtoalloc::cli::run(cli));
}
