use clap::Parser;

fn main() {
    let args = match edgecalc::Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            // bad flags are input errors, not numerical guards
            std::process::exit(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let code = edgecalc::run(&args, &mut std::io::stdout().lock(), &mut std::io::stderr().lock());
    std::process::exit(code);
}
