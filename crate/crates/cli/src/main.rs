fn main() {
    eprintln!("cfcb: commands are not wired up yet");
    std::process::exit(2);
}
