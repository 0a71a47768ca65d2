use crate::config::RunConfig;
use crate::manifest::RunDir;
use anyhow::{bail, Context, Result};
use ares_core::data::{generate_split, write_split, DatasetSpec, LabeledDataset, Split};
use ares_core::tensor::chw_index;
use std::path::Path;

pub fn run(config: &RunConfig, out: &Path) -> Result<()> {
    let Some(section) = &config.dataset else {
        bail!("config has no [dataset] section");
    };
    let spec = DatasetSpec {
        class_count: section.class_count,
        image_shape: (section.image[0], section.image[1], section.image[2]),
        train_size: section.train_size,
        test_size: section.test_size,
        seed: config.seed,
    };
    let mut run = RunDir::create(out, "gen-data", config.seed, config.resolved_text()?)?;

    for split in [Split::Train, Split::Test] {
        let data = generate_split(&spec, split)?;
        let name = match split {
            Split::Train => "train.ares",
            Split::Test => "test.ares",
        };
        let mut bytes = Vec::new();
        write_split(&data, &spec, split, &mut bytes)?;
        run.write_artifact(name, &bytes)?;
        if section.png_dump > 0 {
            dump_pngs(&mut run, &data, split, section.png_dump)?;
        }
    }
    run.finish()
}

/// 8-bit quantized PNG dump (round(v * 255)); inspection only, evaluation
/// always reads the binary floats.
fn dump_pngs(run: &mut RunDir, data: &LabeledDataset, split: Split, count: usize) -> Result<()> {
    let prefix = match split {
        Split::Train => "png/train",
        Split::Test => "png/test",
    };
    let (h, w) = (data.images.shape()[2], data.images.shape()[3]);
    for i in 0..count.min(data.len()) {
        let sample = data.images.sample(i);
        let mut img = image::RgbImage::new(w as u32, h as u32);
        for y in 0..h {
            for x in 0..w {
                let px = image::Rgb([
                    (sample[chw_index(h, w, 0, y, x)] * 255.0).round() as u8,
                    (sample[chw_index(h, w, 1, y, x)] * 255.0).round() as u8,
                    (sample[chw_index(h, w, 2, y, x)] * 255.0).round() as u8,
                ]);
                img.put_pixel(x as u32, y as u32, px);
            }
        }
        let mut bytes = Vec::new();
        img.write_to(&mut std::io::Cursor::new(&mut bytes), image::ImageFormat::Png)
            .context("encoding png")?;
        run.write_artifact(&format!("{prefix}-{i:03}-class{}.png", data.labels[i]), &bytes)?;
    }
    Ok(())
}
