//! Image files to and from [`ChannelImage`].
//!
//! Supported: 8-bit grayscale/RGB PNG, binary PGM (P5) and PPM (P6) with
//! maxval ≤ 255, and a lossless raw dump of doubles:
//!
//! ```text
//! SSDT1\n<width> <height> <channels>\n<f64 LE samples, channel-planar, row-major>
//! ```
//!
//! Signed layers (textures) are stored with the offset map
//! `byte = round(clamp(v·0.5 + 0.5, 0, 1)·255)`. Paths whose stem ends in
//! `.tex` (e.g. `v.tex.png`) select it automatically.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use image::{ColorType, DynamicImage, ImageEncoder, ImageFormat as CodecFormat};

use crate::error::{Error, Result};
use crate::grid::ChannelImage;

const RAW_MAGIC: &[u8] = b"SSDT1\n";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    Png,
    /// Binary PPM (P6), colour.
    Ppm,
    /// Binary PGM (P5), grayscale.
    Pgm,
}

impl ImageFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .unwrap_or_default();
        match ext.as_str() {
            "png" => Ok(ImageFormat::Png),
            "ppm" => Ok(ImageFormat::Ppm),
            "pgm" => Ok(ImageFormat::Pgm),
            _ => Err(Error::Format(format!(
                "cannot infer image format from '{}'",
                path.display()
            ))),
        }
    }

    pub fn from_magic(bytes: &[u8]) -> Result<Self> {
        if bytes.starts_with(b"\x89PNG\r\n\x1a\n") {
            Ok(ImageFormat::Png)
        } else if bytes.starts_with(b"P6") {
            Ok(ImageFormat::Ppm)
        } else if bytes.starts_with(b"P5") {
            Ok(ImageFormat::Pgm)
        } else {
            Err(Error::Format("unrecognized image signature".into()))
        }
    }
}

/// How samples map to bytes on write.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Encoding {
    /// `round(clamp(v, 0, 1)·255)`
    #[default]
    Direct,
    /// `round(clamp(v·0.5 + 0.5, 0, 1)·255)` for signed layers.
    SignedOffset,
}

impl Encoding {
    /// [`Encoding::SignedOffset`] for `*.tex.<ext>` paths.
    pub fn for_path(path: &Path) -> Self {
        let tex = path
            .file_stem()
            .and_then(|s| s.to_str())
            .is_some_and(|s| s.ends_with(".tex"));
        if tex {
            Encoding::SignedOffset
        } else {
            Encoding::Direct
        }
    }

    fn map(self, v: f64) -> f64 {
        match self {
            Encoding::Direct => v,
            Encoding::SignedOffset => v * 0.5 + 0.5,
        }
    }

    /// Inverse of the byte map for values that were not clamped.
    pub fn decode(self, v: f64) -> f64 {
        match self {
            Encoding::Direct => v,
            Encoding::SignedOffset => (v - 0.5) * 2.0,
        }
    }
}

pub fn read_image(path: impl AsRef<Path>) -> Result<ChannelImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_image(&bytes)
}

pub fn decode_image(bytes: &[u8]) -> Result<ChannelImage> {
    match ImageFormat::from_magic(bytes)? {
        ImageFormat::Png => decode_png(bytes),
        ImageFormat::Ppm | ImageFormat::Pgm => decode_pnm(bytes),
    }
}

fn decode_png(bytes: &[u8]) -> Result<ChannelImage> {
    let img = image::load_from_memory_with_format(bytes, CodecFormat::Png)
        .map_err(|e| Error::Decode(e.to_string()))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    match img {
        DynamicImage::ImageLuma8(buf) => ChannelImage::from_bytes(buf.as_raw(), w, h, 1),
        DynamicImage::ImageRgb8(buf) => ChannelImage::from_bytes(buf.as_raw(), w, h, 3),
        other => Err(Error::Format(format!(
            "only 8-bit gray or RGB PNG is supported, got {:?}",
            other.color()
        ))),
    }
}

/// Cursor over PNM header tokens (whitespace separated, `#` comments).
struct PnmHeader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl PnmHeader<'_> {
    fn token(&mut self) -> Result<&str> {
        loop {
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
                self.pos += 1;
            }
            if self.bytes.get(self.pos) == Some(&b'#') {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
                continue;
            }
            break;
        }
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::Decode("truncated PNM header".into()));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .map_err(|_| Error::Decode("non-ASCII PNM header".into()))
    }

    fn number(&mut self) -> Result<usize> {
        let tok = self.token()?;
        tok.parse()
            .map_err(|_| Error::Decode(format!("bad PNM header field '{tok}'")))
    }
}

fn decode_pnm(bytes: &[u8]) -> Result<ChannelImage> {
    let mut hdr = PnmHeader { bytes, pos: 0 };
    let channels = match hdr.token()? {
        "P5" => 1,
        "P6" => 3,
        other => return Err(Error::Format(format!("unsupported PNM variant {other}"))),
    };
    let width = hdr.number()?;
    let height = hdr.number()?;
    let maxval = hdr.number()?;
    if maxval == 0 || maxval > 255 {
        return Err(Error::Format(format!(
            "only 8-bit PNM is supported (maxval {maxval})"
        )));
    }
    // exactly one whitespace byte separates the header from the raster
    let start = hdr.pos + 1;
    let len = width * height * channels;
    let raster = bytes
        .get(start..start + len)
        .ok_or_else(|| Error::Decode("truncated PNM raster".into()))?;
    if maxval == 255 {
        ChannelImage::from_bytes(raster, width, height, channels)
    } else {
        let scaled: Vec<u8> = raster
            .iter()
            .map(|&b| ((b as f64 * 255.0 / maxval as f64).round()).min(255.0) as u8)
            .collect();
        ChannelImage::from_bytes(&scaled, width, height, channels)
    }
}

/// Encodes to the given format. PPM needs a colour image and PGM a
/// grayscale one; PNG follows the channel count.
pub fn encode_image(img: &ChannelImage, format: ImageFormat, encoding: Encoding) -> Result<Vec<u8>> {
    let raw = img.to_bytes_mapped(|v| encoding.map(v));
    let (w, h) = (img.width(), img.height());
    match format {
        ImageFormat::Png => {
            let color = if img.channels() == 1 {
                ColorType::L8
            } else {
                ColorType::Rgb8
            };
            let mut out = Vec::new();
            image::codecs::png::PngEncoder::new(&mut out)
                .write_image(&raw, w as u32, h as u32, color.into())
                .map_err(|e| Error::Decode(e.to_string()))?;
            Ok(out)
        }
        ImageFormat::Ppm | ImageFormat::Pgm => {
            let (magic, want) = if format == ImageFormat::Ppm {
                ("P6", 3)
            } else {
                ("P5", 1)
            };
            if img.channels() != want {
                return Err(Error::Format(format!(
                    "{magic} needs {want} channel(s), image has {}",
                    img.channels()
                )));
            }
            let mut out = format!("{magic}\n{w} {h}\n255\n").into_bytes();
            out.extend_from_slice(&raw);
            Ok(out)
        }
    }
}

/// Writes `img`, picking the format from the extension; grayscale images
/// given a `.ppm` path are written as PGM and vice versa.
pub fn write_image(path: impl AsRef<Path>, img: &ChannelImage, encoding: Encoding) -> Result<()> {
    let path = path.as_ref();
    let format = match (ImageFormat::from_path(path)?, img.channels()) {
        (ImageFormat::Ppm, 1) => ImageFormat::Pgm,
        (ImageFormat::Pgm, 3) => ImageFormat::Ppm,
        (f, _) => f,
    };
    write_image_as(path, img, format, encoding)
}

pub fn write_image_as(
    path: impl AsRef<Path>,
    img: &ChannelImage,
    format: ImageFormat,
    encoding: Encoding,
) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_image(img, format, encoding)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Lossless dump of all samples as little-endian doubles.
pub fn write_raw(path: impl AsRef<Path>, img: &ChannelImage) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let write = |out: &mut BufWriter<fs::File>| -> std::io::Result<()> {
        out.write_all(RAW_MAGIC)?;
        writeln!(out, "{} {} {}", img.width(), img.height(), img.channels())?;
        for v in img.data() {
            out.write_all(&v.to_le_bytes())?;
        }
        out.flush()
    };
    write(&mut out).map_err(|e| Error::io(path, e))
}

pub fn read_raw(path: impl AsRef<Path>) -> Result<ChannelImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let rest = bytes
        .strip_prefix(RAW_MAGIC)
        .ok_or_else(|| Error::Format("missing SSDT1 signature".into()))?;
    let nl = rest
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Decode("truncated raw header".into()))?;
    let dims: Vec<usize> = std::str::from_utf8(&rest[..nl])
        .map_err(|_| Error::Decode("non-ASCII raw header".into()))?
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| Error::Decode(format!("bad raw dimension '{t}'"))))
        .collect::<Result<_>>()?;
    let [w, h, c] = dims[..] else {
        return Err(Error::Decode("raw header needs width, height, channels".into()));
    };
    let body = &rest[nl + 1..];
    if body.len() != w * h * c * 8 {
        return Err(Error::Decode(format!(
            "raw body has {} bytes, expected {}",
            body.len(),
            w * h * c * 8
        )));
    }
    let data = body
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().expect("chunk of 8")))
        .collect();
    ChannelImage::new(w, h, c, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(rng: &mut ChaCha8Rng, w: usize, h: usize, c: usize) -> ChannelImage {
        let raw: Vec<u8> = (0..w * h * c).map(|_| rng.gen()).collect();
        ChannelImage::from_bytes(&raw, w, h, c).unwrap()
    }

    #[test]
    fn decodes_checkerboard_ppm() {
        let mut bytes = b"P6\n2 2\n255\n".to_vec();
        bytes.extend_from_slice(&[0, 0, 0, 255, 255, 255, 0, 0, 0, 255, 255, 255]);
        let img = decode_image(&bytes).unwrap();
        assert_eq!(img.channels(), 3);
        for c in 0..3 {
            assert_eq!(img.channel_slice(c), &[0.0, 1.0, 0.0, 1.0]);
        }
    }

    #[test]
    fn pnm_header_comments_and_maxval() {
        let mut bytes = b"P5 # gray\n# size next\n2 2\n255\n".to_vec();
        bytes.extend_from_slice(&[0, 64, 128, 255]);
        let img = decode_image(&bytes).unwrap();
        assert_eq!(img.to_bytes(), vec![0, 64, 128, 255]);

        let mut deep = b"P5\n2 2\n65535\n".to_vec();
        deep.extend_from_slice(&[0; 8]);
        assert!(matches!(decode_image(&deep), Err(Error::Format(_))));
        let truncated = b"P5\n2 2\n255\n\x00\x01".to_vec();
        assert!(matches!(decode_image(&truncated), Err(Error::Decode(_))));
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = read_image("/nonexistent/dir/img.png").unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn roundtrip_every_format() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for (name, c) in [("a.png", 3), ("b.png", 1), ("c.ppm", 3), ("d.pgm", 1)] {
            let img = random_image(&mut rng, 7, 5, c);
            let path = dir.path().join(name);
            write_image(&path, &img, Encoding::Direct).unwrap();
            let back = read_image(&path).unwrap();
            assert_eq!(back.channels(), c);
            assert_eq!(back.to_bytes(), img.to_bytes(), "{name}");
        }
    }

    #[test]
    fn grayscale_dispatch() {
        let img = ChannelImage::constant(3, 3, 1, 0.5).unwrap();
        let bytes = encode_image(&img, ImageFormat::Png, Encoding::Direct).unwrap();
        let decoded = image::load_from_memory(&bytes).unwrap();
        assert_eq!(decoded.color(), ColorType::L8);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.ppm");
        write_image(&path, &img, Encoding::Direct).unwrap();
        assert!(fs::read(&path).unwrap().starts_with(b"P5"));
    }

    #[test]
    fn signed_texture_offset() {
        let v = ChannelImage::new(2, 2, 1, vec![-0.4, 0.0, 0.3, 1.0]).unwrap();
        let bytes = encode_image(&v, ImageFormat::Pgm, Encoding::SignedOffset).unwrap();
        let raster = &bytes[bytes.len() - 4..];
        assert_eq!(raster, &[77, 128, 166, 255]);
        let back = decode_image(&bytes).unwrap();
        for (orig, stored) in v.data().iter().zip(back.data()) {
            assert!((Encoding::SignedOffset.decode(*stored) - orig).abs() <= 1.0 / 255.0 + 1e-12);
        }
        assert_eq!(Encoding::for_path(Path::new("out/v.tex.png")), Encoding::SignedOffset);
        assert_eq!(Encoding::for_path(Path::new("out/v.png")), Encoding::Direct);
    }

    #[test]
    fn raw_roundtrip_is_lossless() {
        let dir = tempfile::tempdir().unwrap();
        let v = ChannelImage::new(2, 2, 1, vec![-0.123456789, 1e-300, 3.5, -7.25]).unwrap();
        let path = dir.path().join("v.raw");
        write_raw(&path, &v).unwrap();
        let bytes = fs::read(&path).unwrap();
        assert!(bytes.starts_with(b"SSDT1\n2 2 1\n"));
        assert_eq!(read_raw(&path).unwrap(), v);
    }

    #[test]
    fn unknown_extension() {
        let img = ChannelImage::constant(2, 2, 1, 0.0).unwrap();
        assert!(matches!(
            write_image("/tmp/x.tiff", &img, Encoding::Direct),
            Err(Error::Format(_))
        ));
    }
}
