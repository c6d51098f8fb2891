//! Line-based dataset files: `<split>.txt` holds one sample per line with
//! space-separated tokens, `<split>_labels.csv` the labels, and
//! `manifest.json` the spec, class bits and planted occurrences.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{PatternDataset, PatternSpec, Plant, Sample};
use crate::corruption::{Token, MISSING};
use crate::error::{Error, Result};

const MISSING_TEXT: &str = "<missing>";

#[derive(Serialize, Deserialize)]
struct Manifest {
    spec: PatternSpec,
    class_bits: Vec<u8>,
    plants: Vec<Plant>,
}

fn write_split(dir: &Path, name: &str, samples: &[Sample]) -> Result<()> {
    let mut text = String::new();
    let mut labels = String::from("index,label\n");
    for (i, s) in samples.iter().enumerate() {
        let words: Vec<String> =
            s.tokens.iter().map(|&t| if t == MISSING { MISSING_TEXT.to_string() } else { t.to_string() }).collect();
        text.push_str(&words.join(" "));
        text.push('\n');
        labels.push_str(&format!("{i},{}\n", s.label));
    }
    fs::write(dir.join(format!("{name}.txt")), text)?;
    fs::write(dir.join(format!("{name}_labels.csv")), labels)?;
    Ok(())
}

fn read_split(dir: &Path, name: &str) -> Result<Vec<Sample>> {
    let parse_err = |m: String| Error::InvalidParameter(format!("{name}: {m}"));
    let text = fs::read_to_string(dir.join(format!("{name}.txt")))?;
    let labels = fs::read_to_string(dir.join(format!("{name}_labels.csv")))?;
    let mut out = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let tokens = line
            .split_whitespace()
            .map(|w| if w == MISSING_TEXT { Ok(MISSING) } else { w.parse::<Token>() })
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| parse_err(format!("line {}: {e}", line_no + 1)))?;
        out.push(Sample { tokens, label: 0 });
    }
    let mut seen = 0;
    for (line_no, line) in labels.lines().enumerate().skip(1) {
        let (i, l) = line.split_once(',').ok_or_else(|| parse_err(format!("label line {}", line_no + 1)))?;
        let i: usize = i.trim().parse().map_err(|e| parse_err(format!("label line {}: {e}", line_no + 1)))?;
        let l: u8 = l.trim().parse().map_err(|e| parse_err(format!("label line {}: {e}", line_no + 1)))?;
        out.get_mut(i).ok_or_else(|| parse_err(format!("label for missing sample {i}")))?.label = l;
        seen += 1;
    }
    if seen != out.len() {
        return Err(parse_err(format!("{seen} labels for {} samples", out.len())));
    }
    Ok(out)
}

pub fn write_dataset(dataset: &PatternDataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_split(dir, "train", &dataset.train)?;
    write_split(dir, "test", &dataset.test)?;
    let m = Manifest {
        spec: dataset.spec.clone(),
        class_bits: dataset.class_bits.clone(),
        plants: dataset.manifest.clone(),
    };
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&m)?)?;
    Ok(())
}

pub fn read_dataset(dir: &Path) -> Result<PatternDataset> {
    let m: Manifest = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json"))?)?;
    Ok(PatternDataset {
        spec: m.spec,
        class_bits: m.class_bits,
        train: read_split(dir, "train")?,
        test: read_split(dir, "test")?,
        manifest: m.plants,
    })
}
