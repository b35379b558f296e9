//! 8-bit RGB images: PNG load/save, tensor conversion, BT.601 luma.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{Element, Shape, Tensor};

/// 8-bit sRGB image, samples interleaved R, G, B.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ImageU8 {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl ImageU8 {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != width * height * 3 {
            return Err(Error::invalid(
                "image",
                format!("{} bytes for {width}x{height} RGB", data.len()),
            ));
        }
        Ok(ImageU8 {
            width,
            height,
            data,
        })
    }
}

fn img_err(path: &Path, msg: impl Into<String>) -> Error {
    Error::Image {
        path: path.display().to_string(),
        msg: msg.into(),
    }
}

/// Decode an 8-bit PNG. Grayscale is promoted to RGB; alpha is dropped.
pub fn load_png(path: &Path) -> Result<ImageU8> {
    let file = File::open(path).map_err(|e| img_err(path, e.to_string()))?;
    let decoder = png::Decoder::new(file);
    let mut reader = decoder
        .read_info()
        .map_err(|e| img_err(path, e.to_string()))?;
    let mut buf = vec![0u8; reader.output_buffer_size()];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| img_err(path, e.to_string()))?;
    if info.bit_depth != png::BitDepth::Eight {
        return Err(img_err(path, "only 8-bit PNG is supported"));
    }
    let (w, h) = (info.width as usize, info.height as usize);
    let pixels = &buf[..info.buffer_size()];
    let data = match info.color_type {
        png::ColorType::Rgb => pixels.to_vec(),
        png::ColorType::Rgba => pixels
            .chunks_exact(4)
            .flat_map(|p| [p[0], p[1], p[2]])
            .collect(),
        png::ColorType::Grayscale => pixels.iter().flat_map(|&v| [v, v, v]).collect(),
        png::ColorType::GrayscaleAlpha => pixels
            .chunks_exact(2)
            .flat_map(|p| [p[0], p[0], p[0]])
            .collect(),
        other => return Err(img_err(path, format!("unsupported color type {other:?}"))),
    };
    ImageU8::new(w, h, data)
}

/// Encode as 8-bit RGB PNG. Writes to a temp file and renames on success, so
/// failures never leave a partial file behind.
pub fn save_png(img: &ImageU8, path: &Path) -> Result<()> {
    let tmp = path.with_extension("png.tmp");
    {
        let file = File::create(&tmp).map_err(|e| img_err(&tmp, e.to_string()))?;
        let mut encoder =
            png::Encoder::new(BufWriter::new(file), img.width as u32, img.height as u32);
        encoder.set_color(png::ColorType::Rgb);
        encoder.set_depth(png::BitDepth::Eight);
        let mut writer = encoder
            .write_header()
            .map_err(|e| img_err(path, e.to_string()))?;
        writer
            .write_image_data(&img.data)
            .map_err(|e| img_err(path, e.to_string()))?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// (1, 3, h, w) tensor on [0, 1].
pub fn to_tensor<T: Element>(img: &ImageU8) -> Tensor<T> {
    let (h, w) = (img.height, img.width);
    let mut data = vec![T::ZERO; 3 * h * w];
    for (i, px) in img.data.chunks_exact(3).enumerate() {
        for c in 0..3 {
            data[c * h * w + i] = T::from_f64(px[c] as f64 / 255.0);
        }
    }
    Tensor::from_vec(Shape::new(1, 3, h, w), data).expect("consistent dims")
}

/// Back to 8-bit, clamping to [0, 1] and rounding.
pub fn from_tensor(t: &Tensor<f32>) -> Result<ImageU8> {
    let s = t.shape();
    if s.n != 1 || s.c != 3 {
        return Err(Error::invalid(
            "from_tensor",
            format!("expected shape 1x3xHxW, got {s}"),
        ));
    }
    let plane = s.h * s.w;
    let mut data = vec![0u8; 3 * plane];
    for i in 0..plane {
        for c in 0..3 {
            let v = t.data()[c * plane + i].clamp(0.0, 1.0);
            data[i * 3 + c] = (v * 255.0).round() as u8;
        }
    }
    ImageU8::new(s.w, s.h, data)
}

/// BT.601 luma on [0,1]-normalized samples: Y = 16 + 65.481 R' + 128.553 G'
/// + 24.966 B', giving the [16, 235] range metrics are computed on.
pub fn to_luma(img: &ImageU8) -> Tensor<f64> {
    let (h, w) = (img.height, img.width);
    let data = img
        .data
        .chunks_exact(3)
        .map(|px| {
            let r = px[0] as f64 / 255.0;
            let g = px[1] as f64 / 255.0;
            let b = px[2] as f64 / 255.0;
            16.0 + 65.481 * r + 128.553 * g + 24.966 * b
        })
        .collect();
    Tensor::from_vec(Shape::new(1, 1, h, w), data).expect("consistent dims")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join("irrm_img_test");
        std::fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    #[test]
    fn png_roundtrip_is_exact() {
        let img = ImageU8::new(
            3,
            2,
            vec![
                0, 1, 2, 250, 251, 252, 10, 20, 30, 40, 50, 60, 70, 80, 90, 100, 110, 120,
            ],
        )
        .unwrap();
        let path = tmp("rt.png");
        save_png(&img, &path).unwrap();
        let back = load_png(&path).unwrap();
        assert_eq!(img, back);
    }

    #[test]
    fn one_pixel_red() {
        let img = ImageU8::new(1, 1, vec![255, 0, 0]).unwrap();
        let path = tmp("red.png");
        save_png(&img, &path).unwrap();
        assert_eq!(load_png(&path).unwrap().data, vec![255, 0, 0]);
    }

    #[test]
    fn grayscale_promotes_to_rgb() {
        // write a grayscale png by hand through the encoder
        let path = tmp("gray.png");
        {
            let file = File::create(&path).unwrap();
            let mut enc = png::Encoder::new(BufWriter::new(file), 2, 1);
            enc.set_color(png::ColorType::Grayscale);
            enc.set_depth(png::BitDepth::Eight);
            let mut w = enc.write_header().unwrap();
            w.write_image_data(&[7, 200]).unwrap();
        }
        let img = load_png(&path).unwrap();
        assert_eq!(img.data, vec![7, 7, 7, 200, 200, 200]);
    }

    #[test]
    fn luma_extremes_and_ordering() {
        let img = ImageU8::new(
            4,
            1,
            vec![
                255, 255, 255, // white
                0, 0, 0, // black
                0, 255, 0, // green
                255, 0, 0, // red
            ],
        )
        .unwrap();
        let y = to_luma(&img);
        assert!((y.data()[0] - 235.0).abs() < 1e-9);
        assert!((y.data()[1] - 16.0).abs() < 1e-9);
        assert!(y.data()[2] > y.data()[3], "green luma above red");
        assert!(y.data().iter().all(|&v| (16.0..=235.0).contains(&v)));
    }

    #[test]
    fn tensor_roundtrip() {
        let img =
            ImageU8::new(2, 2, vec![0, 128, 255, 1, 2, 3, 254, 253, 252, 10, 11, 12]).unwrap();
        let t: Tensor<f32> = to_tensor(&img);
        let back = from_tensor(&t).unwrap();
        assert_eq!(img, back);
    }
}
