fn main() {
    let crate_dir = std::env::var("CARGO_MANIFEST_DIR").expect("CARGO_MANIFEST_DIR");
    let out = std::path::Path::new(&crate_dir).join("include").join("binno.h");

    let config = cbindgen::Config {
        language: cbindgen::Language::C,
        include_guard: Some("BINNO_H".into()),
        cpp_compat: true,
        documentation: true,
        usize_is_size_t: true,
        style: cbindgen::Style::Both,
        enumeration: cbindgen::EnumConfig {
            rename_variants: cbindgen::RenameRule::ScreamingSnakeCase,
            prefix_with_name: true,
            ..Default::default()
        },
        ..Default::default()
    };

    cbindgen::Builder::new()
        .with_crate(&crate_dir)
        .with_config(config)
        .generate()
        .expect("Unable to generate bindings")
        .write_to_file(out);

    println!("cargo:rerun-if-changed=src/lib.rs");
}
