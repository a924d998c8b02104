//! Correspondence JSON: `{"width":W,"height":H,"entries":[{"dst":[x,y],"src":[x,y]},...]}`
//! with entries in row-major destination order, followed by a newline.

use dragkit_core::{Cell, Correspondence};
use serde::{Deserialize, Serialize};

use crate::error::{FormatError, Result};

#[derive(Debug, Serialize, Deserialize)]
struct CorrDoc {
    width: usize,
    height: usize,
    entries: Vec<CorrEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CorrEntry {
    dst: [usize; 2],
    src: [usize; 2],
}

pub fn corr_to_json(corr: &Correspondence) -> String {
    let doc = CorrDoc {
        width: corr.width(),
        height: corr.height(),
        entries: corr
            .iter()
            .map(|(d, s)| CorrEntry { dst: [d.x, d.y], src: [s.x, s.y] })
            .collect(),
    };
    let mut s = serde_json::to_string(&doc).expect("plain data serializes");
    s.push('\n');
    s
}

pub fn corr_from_json(text: &str) -> Result<Correspondence> {
    let bad = |m: String| FormatError::MalformedSpec(format!("correspondence JSON: {m}"));
    let doc: CorrDoc = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
    let mut corr = Correspondence::empty(doc.width, doc.height);
    let inside = |[x, y]: [usize; 2]| x < doc.width && y < doc.height;
    for e in doc.entries {
        if !inside(e.dst) || !inside(e.src) {
            return Err(bad(format!("entry {:?} -> {:?} outside the grid", e.dst, e.src)));
        }
        corr.set(Cell::new(e.dst[0], e.dst[1]), Some(Cell::new(e.src[0], e.src[1])));
    }
    Ok(corr)
}
