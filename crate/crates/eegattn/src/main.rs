use std::process::ExitCode;

fn main() -> ExitCode {
    match eegattn::cli::run(std::env::args().collect()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            if let Some(e) = err.downcast_ref::<clap::Error>() {
                // help and version land here too, with exit code 0
                let _ = e.print();
            } else {
                eprintln!("error: {err:#}");
            }
            ExitCode::from(eegattn::cli::exit_code(&err) as u8)
        }
    }
}
