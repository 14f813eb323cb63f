//! Symbolic rendering of coded subfiles, caches and broadcasts.
//!
//! Over GF(2) terms are joined with `⊕` (`A_1⊕A_2⊕A_3`); other fields are
//! written as weighted sums (`B_1 + 2·B_2 + 3·B_3 + 4·B_4`).

use crate::mds::GeneratorMatrix;
use crate::model::{Transmission, TransmissionRecord};

/// `A`, `B`, ... for the first 26 files, `W27`, `W28`, ... afterwards.
pub fn file_letter(file: usize) -> String {
    if (1..=26).contains(&file) {
        ((b'A' + (file - 1) as u8) as char).to_string()
    } else {
        format!("W{file}")
    }
}

/// `C_{file,position}` written as a combination of the file's subfiles.
pub fn render_coded(file: usize, position: usize, g: &GeneratorMatrix) -> String {
    let letter = file_letter(file);
    let terms: Vec<String> = (1..=g.k())
        .filter_map(|row| {
            let c = g.coefficient(row, position).value();
            match c {
                0 => None,
                1 => Some(format!("{letter}_{row}")),
                c => Some(format!("{c}·{letter}_{row}")),
            }
        })
        .collect();
    if terms.is_empty() {
        "0".to_string()
    } else {
        terms.join(separator(g))
    }
}

fn separator(g: &GeneratorMatrix) -> &'static str {
    if g.field().modulus() == 2 {
        "⊕"
    } else {
        " + "
    }
}

/// `Z_i` of virtual user `i` over `files` files.
pub fn render_cache(virtual_user: usize, files: usize, g: &GeneratorMatrix) -> String {
    (1..=files)
        .map(|n| render_coded(n, virtual_user, g))
        .collect::<Vec<_>>()
        .join(separator(g))
}

pub fn render_transmission(t: &Transmission, g: &GeneratorMatrix) -> String {
    match t.virtual_user {
        Some(position) => render_coded(t.file, position, g),
        None => format!("{} (uncoded tail)", file_letter(t.file)),
    }
}

pub fn render_record(x: &TransmissionRecord, g: &GeneratorMatrix) -> Vec<String> {
    x.entries().iter().map(|t| render_transmission(t, g)).collect()
}
