//! PNG / PGM reading and writing for the raster types.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{DynamicImage, ExtendedColorType, ImageEncoder, ImageFormat};

use super::image::{to_grayscale, BinaryMask, GrayImage, RgbImage};
use crate::error::{Error, Result};

/// File extensions treated as images when scanning directories.
pub const IMAGE_EXTENSIONS: &[&str] = &["png", "pgm", "pnm", "ppm", "jpg", "jpeg", "bmp"];

pub fn is_image_path(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| IMAGE_EXTENSIONS.iter().any(|x| x.eq_ignore_ascii_case(e)))
}

fn open(path: &Path) -> Result<DynamicImage> {
    if !path.exists() {
        return Err(Error::MissingArtifact(path.to_path_buf()));
    }
    image::open(path).map_err(|source| Error::Image { path: path.to_path_buf(), source })
}

/// Loads any supported image as a frame; grayscale files are expanded to RGB.
pub fn load_rgb(path: &Path) -> Result<RgbImage> {
    let img = open(path)?.into_rgb8();
    let (w, h) = img.dimensions();
    RgbImage::new(w as usize, h as usize, img.into_raw())
}

/// Loads an image as grayscale. Color inputs go through [`to_grayscale`].
pub fn load_gray(path: &Path) -> Result<GrayImage> {
    let img = open(path)?;
    if img.color().has_color() {
        let rgb = img.into_rgb8();
        let (w, h) = rgb.dimensions();
        return Ok(to_grayscale(&RgbImage::new(w as usize, h as usize, rgb.into_raw())?));
    }
    let g = img.into_luma8();
    let (w, h) = g.dimensions();
    GrayImage::new(w as usize, h as usize, g.into_raw())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

/// Writes a grayscale image; `.pgm`/`.pnm` produce binary PGM, anything else PNG.
pub fn save_gray(img: &GrayImage, path: &Path) -> Result<()> {
    let w = create(path)?;
    let (width, height) = (img.width() as u32, img.height() as u32);
    let pgm = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("pgm") || e.eq_ignore_ascii_case("pnm"));
    let res = if pgm {
        PnmEncoder::new(w)
            .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
            .write_image(img.data(), width, height, ExtendedColorType::L8)
    } else {
        image::codecs::png::PngEncoder::new(w).write_image(img.data(), width, height, ExtendedColorType::L8)
    };
    res.map_err(|source| Error::Image { path: path.to_path_buf(), source })
}

/// Masks are stored as 8-bit images with values {0, 255}.
pub fn save_mask(mask: &BinaryMask, path: &Path) -> Result<()> {
    save_gray(&GrayImage::from_mask(mask), path)
}

pub fn load_mask(path: &Path) -> Result<BinaryMask> {
    let g = load_gray(path)?;
    let data = g.data().iter().map(|&v| u8::from(v > 127)).collect();
    BinaryMask::new(g.width(), g.height(), data)
}

pub fn save_rgb(img: &RgbImage, path: &Path) -> Result<()> {
    let buf = image::RgbImage::from_raw(img.width() as u32, img.height() as u32, img.data().to_vec())
        .ok_or_else(|| Error::Dimension("rgb buffer size".into()))?;
    buf.save_with_format(path, ImageFormat::Png)
        .map_err(|source| Error::Image { path: path.to_path_buf(), source })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_and_pgm_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let img = GrayImage::from_fn(5, 3, |x, y| (x * 50 + y) as u8).unwrap();
        for name in ["a.png", "b.pgm"] {
            let p = dir.path().join(name);
            save_gray(&img, &p).unwrap();
            assert_eq!(load_gray(&p).unwrap(), img);
        }
        let m = BinaryMask::from_fn(4, 4, |x, y| x == y).unwrap();
        let p = dir.path().join("m.png");
        save_mask(&m, &p).unwrap();
        assert_eq!(load_mask(&p).unwrap(), m);
        assert_eq!(load_gray(&p).unwrap().get(1, 1), 255);
    }

    #[test]
    fn rgb_png_converts_to_luma() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.png");
        save_rgb(&RgbImage::new(1, 1, vec![100, 50, 200]).unwrap(), &p).unwrap();
        assert_eq!(load_gray(&p).unwrap().data(), &[82]);
    }

    #[test]
    fn missing_file() {
        assert!(matches!(load_gray(Path::new("/no/such.png")), Err(Error::MissingArtifact(_))));
    }
}
