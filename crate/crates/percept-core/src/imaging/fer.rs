//! FER2013-format CSV parsing: `emotion,pixels,Usage` rows with 2304
//! space-separated 8-bit pixel values per 48x48 face.

use super::{GrayImage, ImagingError};

pub const FER_SIDE: usize = 48;
pub const FER_PIXELS: usize = FER_SIDE * FER_SIDE;

/// Class names in canonical index order.
pub const EMOTION_NAMES: [&str; 7] = [
    "anger", "disgust", "fear", "happy", "sad", "surprise", "neutral",
];

/// Which official split a row belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Usage {
    Training,
    PublicTest,
    PrivateTest,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FerRecord {
    pub emotion: u8,
    pub image: GrayImage,
    pub usage: Usage,
}

/// A malformed row, reported without aborting the parse.
#[derive(Debug, Clone, PartialEq)]
pub struct RowIssue {
    /// 1-based line number in the source text.
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Default)]
pub struct FerParse {
    pub records: Vec<FerRecord>,
    pub issues: Vec<RowIssue>,
}

/// Parse FER-format CSV text. Bad rows become [`RowIssue`]s and parsing
/// continues; only a missing or wrong header aborts.
pub fn parse_fer_csv(text: &str) -> Result<FerParse, ImagingError> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == "emotion,pixels,Usage" => {}
        _ => return Err(ImagingError::FerHeader),
    }

    let mut out = FerParse::default();
    for (i, line) in lines.enumerate() {
        let line_no = i + 2; // header was line 1
        if line.trim().is_empty() {
            continue;
        }
        match parse_row(line) {
            Ok(record) => out.records.push(record),
            Err(message) => out.issues.push(RowIssue {
                line: line_no,
                message,
            }),
        }
    }
    Ok(out)
}

fn parse_row(line: &str) -> Result<FerRecord, String> {
    let mut fields = line.splitn(3, ',');
    let emotion_s = fields.next().unwrap_or_default().trim();
    let pixels_s = fields.next().ok_or("missing pixels column")?;
    let usage_s = fields.next().ok_or("missing Usage column")?.trim();

    let emotion: u8 = emotion_s
        .parse()
        .map_err(|_| format!("emotion '{emotion_s}' is not an integer"))?;
    if emotion > 6 {
        return Err(format!("emotion {emotion} outside 0..=6"));
    }

    let usage = match usage_s {
        "Training" => Usage::Training,
        "PublicTest" => Usage::PublicTest,
        "PrivateTest" => Usage::PrivateTest,
        other => return Err(format!("unknown Usage '{other}'")),
    };

    let mut pixels = Vec::with_capacity(FER_PIXELS);
    for tok in pixels_s.split_ascii_whitespace() {
        let v: u16 = tok
            .parse()
            .map_err(|_| format!("pixel token '{tok}' is not an integer"))?;
        if v > 255 {
            return Err(format!("pixel value {v} exceeds 255"));
        }
        pixels.push(v as f32 / 255.0);
    }
    if pixels.len() != FER_PIXELS {
        return Err(format!("expected {FER_PIXELS} pixels, got {}", pixels.len()));
    }
    let image = GrayImage::new(FER_SIDE, FER_SIDE, pixels).expect("validated row");
    Ok(FerRecord {
        emotion,
        image,
        usage,
    })
}
