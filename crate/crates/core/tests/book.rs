//! The guide's Rust snippets only run if their chapter is included in lib.rs.

use std::fs;
use std::path::Path;

#[test]
fn every_chapter_with_rust_is_compiled() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    let lib = fs::read_to_string(root.join("src/lib.rs")).unwrap();
    let book = root.join("../../book/src");
    let summary = fs::read_to_string(book.join("SUMMARY.md")).unwrap();
    for entry in fs::read_dir(&book).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_str().unwrap().to_string();
        if name == "SUMMARY.md" || path.extension().is_none_or(|e| e != "md") {
            continue;
        }
        assert!(
            summary.contains(&format!("({name})")),
            "{name} is missing from SUMMARY.md"
        );
        if fs::read_to_string(&path).unwrap().contains("```rust") {
            assert!(
                lib.contains(&format!("book/src/{name}")),
                "{name} has Rust snippets but is not in the doctest list"
            );
        }
    }
}
