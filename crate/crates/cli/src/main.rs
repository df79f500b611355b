use std::path::PathBuf;

fn main() {
    println!("placeholder");
}
