fn main() {
    let crate_dir = std::env::var("CARGO_MANIFEST_DIR").unwrap();
    println!("cargo:rerun-if-changed=src/lib.rs");
    println!("cargo:rerun-if-changed=cbindgen.toml");
    let config = cbindgen::Config::from_file(format!("{crate_dir}/cbindgen.toml"))
        .expect("cbindgen.toml parses");
    match cbindgen::Builder::new()
        .with_crate(&crate_dir)
        .with_config(config)
        .generate()
    {
        // Only rewrites the committed header when the interface changed.
        Ok(bindings) => {
            bindings.write_to_file(format!("{crate_dir}/include/tracklim.h"));
        }
        Err(e) => println!("cargo:warning=header generation skipped: {e}"),
    }
}
