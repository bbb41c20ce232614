//! Lex a C/C++ function and print its four element buckets.
//!
//! cargo run --example extract_elements -- [file.c]

use vulntype::syntax::{elements_of, lex};

const SAMPLE: &str = r#"
static int copy_name(char *dst, const char *src, size_t dstLen) {
    size_t n = strlen(src);   /* no NUL room check */
    if (n >= dstLen) {
        return -1;
    }
    memcpy(dst, src, n + 1);
    for (int i = 0; i < n; i++)
        dst[i] = toupper(dst[i]);
    return 0;
}
"#;

fn main() -> vulntype::Result<()> {
    let source = match std::env::args().nth(1) {
        Some(path) => std::fs::read_to_string(&path).expect("readable source file"),
        None => SAMPLE.to_owned(),
    };

    for t in lex(&source)?.iter().take(16) {
        println!("{:>3}  {:<14} {}", t.line, format!("{:?}", t.kind), t.text);
    }
    println!("...\n");

    let elements = elements_of(&source)?;
    println!("raw buckets:\n{}\n", elements.to_json());
    println!("with sub-tokens:\n{}", elements.with_subtokens().to_json());
    Ok(())
}
