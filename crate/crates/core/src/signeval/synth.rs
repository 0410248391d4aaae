//! Synthetic sign images: a coloured disc on a grey field, one distinct hue
//! per sign class, plain grey for "None".

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{ClassLabel, NONE_NAME};
use crate::error::{Error, Result};
use crate::imaging::{hsv_to_rgb_f32, unit_to_u8, write_pnm, Frame};

pub const SIGN_SIZE: usize = 32;

const FIELD: [f32; 3] = [0.0, 0.0, 0.5];

/// Hue of the `k`-th sign class: the centre of the `k`-th 45-degree bin.
pub fn sign_hue(k: usize) -> f32 {
    22.5 + 45.0 * k as f32
}

/// One image of class `class_id`. Disc position jitters by up to two pixels
/// and each RGB channel gets Gaussian noise of std `sigma`.
pub fn synth_sign(labels: &[ClassLabel], class_id: usize, sigma: f32, rng: &mut ChaCha8Rng) -> Result<Frame> {
    let label = labels
        .get(class_id)
        .ok_or_else(|| Error::invalid(format!("class id {class_id} out of range")))?;
    if !(sigma >= 0.0) {
        return Err(Error::invalid("noise sigma must be >= 0"));
    }
    let disc = (label.name != NONE_NAME).then(|| hsv_to_rgb_f32(sign_hue(class_id), 0.8, 0.8));
    let field = hsv_to_rgb_f32(FIELD[0], FIELD[1], FIELD[2]);
    let n = SIGN_SIZE as f32;
    let cx = n / 2.0 + rng.gen_range(-2.0..=2.0);
    let cy = n / 2.0 + rng.gen_range(-2.0..=2.0);
    let r2 = (0.4 * n) * (0.4 * n);
    let noise = (sigma > 0.0).then(|| Normal::new(0.0f32, sigma).expect("finite sigma"));
    let mut data = Vec::with_capacity(SIGN_SIZE * SIGN_SIZE * 3);
    for y in 0..SIGN_SIZE {
        for x in 0..SIGN_SIZE {
            let (dx, dy) = (x as f32 + 0.5 - cx, y as f32 + 0.5 - cy);
            let c = match disc {
                Some(d) if dx * dx + dy * dy <= r2 => d,
                _ => field,
            };
            for ch in c {
                let v = noise.as_ref().map_or(ch, |nd| ch + nd.sample(rng));
                data.push(unit_to_u8(v));
            }
        }
    }
    Frame::from_rgb8(SIGN_SIZE, SIGN_SIZE, data)
}

/// `per_class` images of every class, ordered by class then index.
pub fn synth_dataset(labels: &[ClassLabel], per_class: usize, sigma: f32, seed: u64) -> Result<Vec<(Frame, usize)>> {
    let mut out = Vec::with_capacity(labels.len() * per_class);
    for (id, _) in labels.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(id as u64);
        for _ in 0..per_class {
            out.push((synth_sign(labels, id, sigma, &mut rng)?, id));
        }
    }
    Ok(out)
}

/// Writes the synthetic set as `<root>/<class>/<index>.ppm`.
pub fn write_synthetic_dataset(
    root: impl AsRef<Path>,
    labels: &[ClassLabel],
    per_class: usize,
    sigma: f32,
    seed: u64,
) -> Result<()> {
    let root = root.as_ref();
    let mut counters = vec![0usize; labels.len()];
    for (frame, id) in synth_dataset(labels, per_class, sigma, seed)? {
        let dir = root.join(&labels[id].name);
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        write_pnm(dir.join(format!("{:05}.ppm", counters[id])), &frame)?;
        counters[id] += 1;
    }
    Ok(())
}
