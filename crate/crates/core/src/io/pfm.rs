//! Portable Float Map (PFM) reader/writer: `Pf` grayscale and `PF` color,
//! 32-bit floats, negative scale = little-endian, rows stored bottom-up.

use std::fs;
use std::path::Path;

use super::{io_err, IoError};

/// Decoded PFM image; data is row-major top-down, channel-interleaved.
#[derive(Clone, Debug, PartialEq)]
pub struct PfmImage {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f32>,
}

fn parse_err(path: &Path, offset: usize, message: impl Into<String>) -> IoError {
    IoError::Parse {
        path: path.to_path_buf(),
        offset,
        message: message.into(),
    }
}

/// Reads one whitespace-terminated ASCII token starting at `*pos`.
fn read_token<'a>(bytes: &'a [u8], pos: &mut usize, path: &Path) -> Result<&'a str, IoError> {
    while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return Err(parse_err(path, start, "unexpected end of header"));
    }
    std::str::from_utf8(&bytes[start..*pos])
        .map_err(|_| parse_err(path, start, "non-ascii header token"))
}

pub fn read_pfm(path: &Path) -> Result<PfmImage, IoError> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    let mut pos = 0usize;
    let magic = read_token(&bytes, &mut pos, path)?;
    let channels = match magic {
        "Pf" => 1,
        "PF" => 3,
        other => {
            return Err(parse_err(path, 0, format!("bad magic `{other}`, expected Pf or PF")))
        }
    };
    let w_tok_at = pos;
    let width: usize = read_token(&bytes, &mut pos, path)?
        .parse()
        .map_err(|_| parse_err(path, w_tok_at, "bad width"))?;
    let h_tok_at = pos;
    let height: usize = read_token(&bytes, &mut pos, path)?
        .parse()
        .map_err(|_| parse_err(path, h_tok_at, "bad height"))?;
    let s_tok_at = pos;
    let scale: f64 = read_token(&bytes, &mut pos, path)?
        .parse()
        .map_err(|_| parse_err(path, s_tok_at, "bad scale"))?;
    if width == 0 || height == 0 || width.saturating_mul(height) > (1 << 30) {
        return Err(parse_err(path, w_tok_at, format!("unreasonable dimensions {width}x{height}")));
    }
    // Exactly one whitespace byte terminates the header.
    if pos >= bytes.len() {
        return Err(parse_err(path, pos, "truncated after header"));
    }
    pos += 1;

    let little_endian = scale < 0.0;
    let count = width * height * channels;
    let need = count * 4;
    if bytes.len() - pos < need {
        return Err(parse_err(
            path,
            pos,
            format!("need {need} sample bytes, found {}", bytes.len() - pos),
        ));
    }

    let mut data = vec![0.0f32; count];
    // PFM rows run bottom-to-top; flip into top-down order.
    for row in 0..height {
        let dst_row = height - 1 - row;
        for i in 0..width * channels {
            let o = pos + (row * width * channels + i) * 4;
            let raw: [u8; 4] = bytes[o..o + 4].try_into().unwrap();
            let v = if little_endian {
                f32::from_le_bytes(raw)
            } else {
                f32::from_be_bytes(raw)
            };
            data[dst_row * width * channels + i] = v;
        }
    }
    Ok(PfmImage {
        width,
        height,
        channels,
        data,
    })
}

/// Writes a little-endian PFM (`scale = -1.0`). `data` is top-down,
/// channel-interleaved; `channels` must be 1 or 3.
pub fn write_pfm(path: &Path, image: &PfmImage) -> Result<(), IoError> {
    assert!(
        image.channels == 1 || image.channels == 3,
        "pfm supports 1 or 3 channels"
    );
    assert_eq!(image.data.len(), image.width * image.height * image.channels);
    let magic = if image.channels == 1 { "Pf" } else { "PF" };
    let mut out = format!("{magic}\n{} {}\n-1.0\n", image.width, image.height).into_bytes();
    out.reserve(image.data.len() * 4);
    for row in 0..image.height {
        let src_row = image.height - 1 - row;
        let base = src_row * image.width * image.channels;
        for i in 0..image.width * image.channels {
            out.extend_from_slice(&image.data[base + i].to_le_bytes());
        }
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_is_bitwise() {
        let dir = std::env::temp_dir().join("planarkit-pfm-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("rt.pfm");
        let img = PfmImage {
            width: 5,
            height: 3,
            channels: 1,
            data: (0..15).map(|i| (i as f32) * 0.37 - 1.0).collect(),
        };
        write_pfm(&path, &img).unwrap();
        let back = read_pfm(&path).unwrap();
        assert_eq!(img, back);
    }

    #[test]
    fn truncated_file_reports_offset() {
        let dir = std::env::temp_dir().join("planarkit-pfm-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("trunc.pfm");
        std::fs::write(&path, b"Pf\n4 4\n-1.0\nxx").unwrap();
        match read_pfm(&path) {
            Err(IoError::Parse { offset, .. }) => assert_eq!(offset, 12),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn bad_magic_is_rejected() {
        let dir = std::env::temp_dir().join("planarkit-pfm-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("magic.pfm");
        std::fs::write(&path, b"P6\n1 1\n255\n...").unwrap();
        assert!(matches!(read_pfm(&path), Err(IoError::Parse { .. })));
    }
}
