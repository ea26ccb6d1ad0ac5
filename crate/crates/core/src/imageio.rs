//! PNG encoding and decoding for [`Image`].

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use image::codecs::png::PngEncoder;
use image::{ExtendedColorType, ImageEncoder};

use crate::types::Image;

#[derive(Debug, thiserror::Error)]
pub enum ImageIoError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Codec {
        path: String,
        #[source]
        source: image::ImageError,
    },
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
}

/// Decodes any supported file into 8-bit RGB.
pub fn load_image(path: &Path) -> Result<Image, ImageIoError> {
    let display = path.display().to_string();
    let decoded = image::open(path).map_err(|source| match source {
        image::ImageError::IoError(source) => ImageIoError::Io {
            path: display.clone(),
            source,
        },
        source => ImageIoError::Codec {
            path: display.clone(),
            source,
        },
    })?;
    let rgb = decoded.to_rgb8();
    let (w, h) = rgb.dimensions();
    Image::new(w, h, rgb.into_raw()).map_err(|e| ImageIoError::Invalid {
        path: display,
        message: e.to_string(),
    })
}

/// Encodes `image` as an 8-bit RGB PNG.
pub fn encode_png(image: &Image) -> Result<Vec<u8>, image::ImageError> {
    let mut buf = Vec::new();
    PngEncoder::new(&mut buf).write_image(image.as_bytes(), image.width(), image.height(), ExtendedColorType::Rgb8)?;
    Ok(buf)
}

pub fn save_png(path: &Path, image: &Image) -> Result<(), ImageIoError> {
    let display = path.display().to_string();
    let bytes = encode_png(image).map_err(|source| ImageIoError::Codec {
        path: display.clone(),
        source,
    })?;
    let io_err = |source| ImageIoError::Io {
        path: display.clone(),
        source,
    };
    let mut out = BufWriter::new(File::create(path).map_err(io_err)?);
    out.write_all(&bytes).map_err(io_err)?;
    out.flush().map_err(io_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut img = Image::filled(7, 5, [3, 4, 5]);
        img.set_pixel(6, 4, [255, 0, 128]);
        let p = dir.path().join("a.png");
        save_png(&p, &img).unwrap();
        assert_eq!(load_image(&p).unwrap(), img);
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_image(Path::new("/nonexistent/x.png")).unwrap_err();
        assert!(matches!(err, ImageIoError::Io { .. }));
    }
}
