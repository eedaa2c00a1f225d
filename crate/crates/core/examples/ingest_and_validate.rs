//! Reads a small hand-written corpus, resolves references and checks it.
//!
//!     cargo run --example ingest_and_validate

use std::io::Cursor;

use citenorm::corpus::{read_corpus, validate_corpus};

const CORPUS: &str = r#"{"id":1,"year":2008,"journal":"Phys Rev","type":"article","lang":"en","authors":3,"countries":["US","DE"],"refs":[]}
{"id":2,"year":2009,"journal":"Phys Rev","type":"article","lang":"en","authors":1,"countries":["US"],"refs":[1,9001]}
{"id":3,"year":2010,"journal":"Ann Math","type":"review","lang":"en","authors":2,"countries":["FR"],"refs":[1,2,3]}
{"id":4,"year":2010,"journal":"Ann Math","type":"letter","lang":"en","authors":1,"countries":[],"refs":[2]}
"#;

fn main() -> citenorm::Result<()> {
    let corpus = read_corpus(Cursor::new(CORPUS), None)?;
    println!("{} publications in {} journals", corpus.len(), corpus.journals().len());
    for p in corpus.publications() {
        println!(
            "  {} ({}, {}): cites {:?}, external {}, cited by {:?}",
            p.id,
            p.year,
            p.doc_type.as_str(),
            corpus.forward_index(p.id),
            p.external_reference_count(),
            corpus.reverse_index(p.id)
        );
    }
    let report = validate_corpus(&corpus);
    println!("valid: {}", report.is_valid());
    Ok(())
}
