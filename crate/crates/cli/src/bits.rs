//! Bit-string files: ASCII '0'/'1' with whitespace ignored.

use std::fs;
use std::io;
use std::path::Path;

pub fn read_bits(path: &Path) -> io::Result<Vec<bool>> {
    let raw = fs::read(path)?;
    let mut bits = Vec::with_capacity(raw.len());
    for (offset, byte) in raw.iter().enumerate() {
        match byte {
            b'0' => bits.push(false),
            b'1' => bits.push(true),
            b' ' | b'\t' | b'\r' | b'\n' => {}
            other => {
                return Err(io::Error::new(
                    io::ErrorKind::InvalidData,
                    format!(
                        "{}: byte {} at offset {offset} is not '0', '1', or whitespace",
                        path.display(),
                        other
                    ),
                ));
            }
        }
    }
    Ok(bits)
}

/// Writes bits in rows of 50, the layout the raw-key fixtures use.
pub fn format_bits(bits: &[bool]) -> String {
    let mut out = String::with_capacity(bits.len() + bits.len() / 50 + 1);
    for (i, &b) in bits.iter().enumerate() {
        if i > 0 && i % 50 == 0 {
            out.push('\n');
        }
        out.push(if b { '1' } else { '0' });
    }
    if !bits.is_empty() {
        out.push('\n');
    }
    out
}
