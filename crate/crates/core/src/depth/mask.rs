use super::MaskImage;
use crate::error::{Error, Result};

/// Binary erosion with a `kernel`×`kernel` square, repeated `iterations`
/// times. Pixels beyond the border count as set, so the image edge itself
/// does not erode the mask.
pub fn erode_mask(mask: &MaskImage, kernel: usize, iterations: usize) -> Result<MaskImage> {
    if kernel == 0 || kernel % 2 == 0 {
        return Err(Error::Parameter(format!(
            "erosion kernel must be odd, got {kernel}"
        )));
    }
    let r = (kernel / 2) as isize;
    let (w, h) = (mask.width as isize, mask.height as isize);
    let mut current = mask.clone();
    if r == 0 {
        return Ok(current);
    }
    for _ in 0..iterations {
        let mut next = current.clone();
        for v in 0..h {
            for u in 0..w {
                if !current.get(u as usize, v as usize) {
                    continue;
                }
                let keep = (-r..=r).all(|dv| {
                    (-r..=r).all(|du| {
                        let (uu, vv) = (u + du, v + dv);
                        uu < 0 || vv < 0 || uu >= w || vv >= h || current.get(uu as usize, vv as usize)
                    })
                });
                next.set(u as usize, v as usize, keep);
            }
        }
        current = next;
    }
    Ok(current)
}
