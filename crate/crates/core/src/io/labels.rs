use std::path::Path;

use super::ArchiveError;
use crate::error::Result;

/// Class indices separated by whitespace, one per sample.
pub fn parse_labels(text: &str) -> Result<Vec<usize>> {
    text.split_whitespace()
        .enumerate()
        .map(|(i, tok)| {
            tok.parse::<usize>()
                .map_err(|_| ArchiveError::Labels(format!("entry {i} `{tok}` is not a class index")).into())
        })
        .collect()
}

pub fn read_labels(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    parse_labels(&std::fs::read_to_string(path)?)
}
