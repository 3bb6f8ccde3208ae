//! Text format for generator multisets.
//!
//! Line-oriented; `#` starts a comment line; blank lines are ignored.
//! The first significant line names the group:
//!
//! ```text
//! group xor-bits 8
//! group sl2 19
//! group symmetric 5
//! ```
//!
//! Every following line is one multiset element:
//!
//! * bit-vector groups: a string of `0`/`1` of length m, leftmost
//!   character = coordinate 0 (`01011010`),
//! * sl2 groups: four integers row-major (`1 1 0 1` = [[1,1],[0,1]]),
//! * permutation groups: the 1-based image list (`2 3 1 4 5`).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::elem::{GroupDescriptor, GroupElem, GroupKind};
use super::multiset::GeneratorMultiset;

pub fn parse_generator_file(text: &str) -> Result<GeneratorMultiset> {
    let mut lines = text
        .lines()
        .map(str::trim)
        .enumerate()
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let Some((header_no, header)) = lines.next() else {
        return Err(Error::domain("empty generator file".to_string()));
    };
    let desc = parse_header(header)
        .map_err(|e| Error::domain(format!("line {}: {e}", header_no + 1)))?;
    let mut elems = Vec::new();
    for (no, line) in lines {
        let e = parse_element(desc, line)
            .map_err(|e| Error::domain(format!("line {}: {e}", no + 1)))?;
        elems.push(e);
    }
    GeneratorMultiset::from_elems(desc, elems)
}

fn parse_header(line: &str) -> std::result::Result<GroupDescriptor, String> {
    let toks: Vec<&str> = line.split_whitespace().collect();
    let [kw, kind, param] = toks.as_slice() else {
        return Err(format!("expected `group <kind> <param>`, got `{line}`"));
    };
    if *kw != "group" {
        return Err(format!("expected keyword `group`, got `{kw}`"));
    }
    let param: u32 = param.parse().map_err(|_| format!("bad group parameter `{param}`"))?;
    let desc = match *kind {
        "xor-bits" => GroupDescriptor::xor_bits(param),
        "sl2" => GroupDescriptor::sl2(param),
        "symmetric" => GroupDescriptor::symmetric(param),
        other => return Err(format!("unknown group kind `{other}`")),
    };
    desc.map_err(|e| e.to_string())
}

fn parse_element(desc: GroupDescriptor, line: &str) -> std::result::Result<GroupElem, String> {
    match desc.kind() {
        GroupKind::XorBits => {
            let m = desc.param() as usize;
            if line.len() != m || line.bytes().any(|b| b != b'0' && b != b'1') {
                return Err(format!("expected a {m}-character bit string, got `{line}`"));
            }
            let mut bits = 0u64;
            for (i, b) in line.bytes().enumerate() {
                if b == b'1' {
                    bits |= 1 << i;
                }
            }
            Ok(GroupElem::Bits(bits))
        }
        GroupKind::Sl2 => {
            let vals: Vec<u32> = line
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| format!("bad matrix entry `{t}`")))
                .collect::<std::result::Result<_, _>>()?;
            let [a, b, c, d] = vals.as_slice() else {
                return Err(format!("expected four integers, got `{line}`"));
            };
            Ok(GroupElem::Sl2([*a, *b, *c, *d]))
        }
        GroupKind::Symmetric => {
            let vals: Vec<u8> = line
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| format!("bad image `{t}`")))
                .collect::<std::result::Result<_, _>>()?;
            if vals.len() != desc.param() as usize {
                return Err(format!(
                    "expected {} images, got {}",
                    desc.param(),
                    vals.len()
                ));
            }
            if vals.iter().any(|&v| v == 0) {
                return Err("image lists are 1-based; found a 0".to_string());
            }
            Ok(GroupElem::Perm(vals.into_iter().map(|v| v - 1).collect()))
        }
    }
}

pub fn write_generator_file(w: &mut impl Write, s: &GeneratorMultiset) -> Result<()> {
    if s.len().is_none() {
        return Err(Error::capacity(
            "weight-table multisets have no element list to serialize".to_string(),
        ));
    }
    let desc = s.descriptor();
    let kind = match desc.kind() {
        GroupKind::XorBits => "xor-bits",
        GroupKind::Sl2 => "sl2",
        GroupKind::Symmetric => "symmetric",
    };
    writeln!(w, "group {kind} {}", desc.param())?;
    for e in s.iter() {
        match e {
            GroupElem::Bits(b) => {
                let m = desc.param() as usize;
                let line: String =
                    (0..m).map(|i| if b >> i & 1 == 1 { '1' } else { '0' }).collect();
                writeln!(w, "{line}")?;
            }
            GroupElem::Sl2([a, b, c, d]) => writeln!(w, "{a} {b} {c} {d}")?,
            GroupElem::Perm(img) => {
                let line =
                    img.iter().map(|v| (v + 1).to_string()).collect::<Vec<_>>().join(" ");
                writeln!(w, "{line}")?;
            }
        }
    }
    Ok(())
}

pub fn load_generator_file(path: &Path) -> Result<GeneratorMultiset> {
    let mut text = String::new();
    BufReader::new(File::open(path)?).read_to_string(&mut text)?;
    parse_generator_file(&text)
}

pub fn save_generator_file(path: &Path, s: &GeneratorMultiset) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_generator_file(&mut w, s)?;
    w.flush()?;
    Ok(())
}
