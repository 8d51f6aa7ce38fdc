use std::path::Path;

fn main() {
    println!("cargo:rerun-if-changed=src/lib.rs");
    println!("cargo:rerun-if-changed=cbindgen.toml");
    let crate_dir = std::env::var("CARGO_MANIFEST_DIR").expect("manifest dir");
    let header = Path::new(&crate_dir).join("include").join("skewform.h");
    cbindgen::generate(&crate_dir)
        .expect("binding generation")
        .write_to_file(header);
}
