//! The checked-in header must declare exactly the exported functions and
//! the same status values.

use std::collections::BTreeSet;
use std::fs;
use std::path::PathBuf;

use csobench_ffi::CsoStatus;

fn read(rel: &str) -> String {
    fs::read_to_string(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(rel)).unwrap()
}

fn exported(src: &str) -> BTreeSet<String> {
    src.lines()
        .filter_map(|l| {
            let l = l.trim_start();
            let rest = l
                .strip_prefix("pub unsafe extern \"C\" fn ")
                .or_else(|| l.strip_prefix("pub extern \"C\" fn "))?;
            Some(rest.split('(').next().unwrap().to_string())
        })
        .collect()
}

fn strip_comments(text: &str) -> String {
    let mut out = String::new();
    let mut rest = text;
    while let Some(i) = rest.find("/*") {
        out.push_str(&rest[..i]);
        rest = &rest[i + rest[i..].find("*/").expect("closed comment") + 2..];
    }
    out.push_str(rest);
    out.lines()
        .map(|l| l.split("//").next().unwrap())
        .collect::<Vec<_>>()
        .join("\n")
}

fn declared(header: &str) -> BTreeSet<String> {
    strip_comments(header)
        .split(';')
        .filter_map(|decl| {
            let head = decl.split('(').next()?;
            let name = head
                .split(|c: char| c.is_whitespace() || c == '*')
                .next_back()?;
            name.starts_with("cso_").then(|| name.to_string())
        })
        .collect()
}

#[test]
fn header_matches_exports() {
    let src = exported(&read("src/lib.rs"));
    let hdr = declared(&read("include/csobench.h"));
    assert!(src.len() >= 15, "{src:?}");
    assert_eq!(src, hdr);
}

#[test]
fn status_values_match() {
    let h = read("include/csobench.h");
    for (name, v) in [
        ("Ok", CsoStatus::Ok),
        ("NullPointer", CsoStatus::NullPointer),
        ("InvalidArgument", CsoStatus::InvalidArgument),
        ("Io", CsoStatus::Io),
        ("CorruptDataset", CsoStatus::CorruptDataset),
        ("Numerical", CsoStatus::Numerical),
        ("OutputExists", CsoStatus::OutputExists),
        ("Panic", CsoStatus::Panic),
    ] {
        let line = format!("CsoStatus_{name} = {},", v as i32);
        assert!(h.contains(&line), "missing `{line}`");
    }
}

#[test]
fn settings_layout() {
    assert_eq!(std::mem::size_of::<csobench_ffi::CsoGpSettings>(), 6 * 8);
}
