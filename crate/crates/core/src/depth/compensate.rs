use rayon::prelude::*;

use super::{is_valid_depth, CompensationParams, DepthImage};
use crate::error::Result;

/// Fills small holes and drops flying pixels using the valid depths in a
/// square window around each pixel.
///
/// Both passes read the original raster: a hole is filled with the median of
/// its valid neighbors when there are at least `min_valid` of them and their
/// spread is at most `fill_spread_max`; a valid pixel further than
/// `outlier_dev_max` from its neighbor median is invalidated. Even-sized
/// medians take the lower-middle element.
pub fn compensate_depth(depth: &DepthImage, params: &CompensationParams) -> Result<DepthImage> {
    params.validate()?;
    let r = (params.window / 2) as isize;
    let (w, h) = (depth.width as isize, depth.height as isize);
    let mut out = depth.data.clone();
    out.par_chunks_mut(depth.width.max(1))
        .enumerate()
        .for_each_init(Vec::new, |neighbors: &mut Vec<f64>, (v, row)| {
            let v = v as isize;
            for u in 0..w {
                neighbors.clear();
                for dv in -r..=r {
                    for du in -r..=r {
                        if du == 0 && dv == 0 {
                            continue;
                        }
                        let (uu, vv) = (u + du, v + dv);
                        if uu < 0 || vv < 0 || uu >= w || vv >= h {
                            continue;
                        }
                        let d = depth.get(uu as usize, vv as usize);
                        if is_valid_depth(d) {
                            neighbors.push(d);
                        }
                    }
                }
                if neighbors.is_empty() {
                    continue;
                }
                neighbors.sort_unstable_by(f64::total_cmp);
                let median = neighbors[(neighbors.len() - 1) / 2];
                let d = depth.get(u as usize, v as usize);
                if is_valid_depth(d) {
                    if (d - median).abs() > params.outlier_dev_max {
                        row[u as usize] = 0.0;
                    }
                } else {
                    let spread = neighbors[neighbors.len() - 1] - neighbors[0];
                    if neighbors.len() >= params.min_valid && spread <= params.fill_spread_max {
                        row[u as usize] = median;
                    }
                }
            }
        });
    Ok(DepthImage {
        width: depth.width,
        height: depth.height,
        data: out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::depth::CompensationParams;
    use proptest::prelude::*;

    fn raster(w: usize, h: usize, f: impl Fn(usize, usize) -> f64) -> DepthImage {
        let mut d = DepthImage::invalid(w, h);
        for v in 0..h {
            for u in 0..w {
                d.set(u, v, f(u, v));
            }
        }
        d
    }

    #[test]
    fn fills_hole_in_constant_field() {
        let d = raster(5, 5, |u, v| if (u, v) == (2, 2) { 0.0 } else { 1.0 });
        let out = compensate_depth(&d, &CompensationParams::default()).unwrap();
        assert_eq!(out.get(2, 2), 1.0);
    }

    #[test]
    fn invalidates_flying_pixel() {
        let d = raster(5, 5, |u, v| if (u, v) == (2, 2) { 0.2 } else { 1.0 });
        let out = compensate_depth(&d, &CompensationParams::default()).unwrap();
        assert_eq!(out.get(2, 2), 0.0);
        assert_eq!(out.get(0, 0), 1.0);
    }

    #[test]
    fn sparse_hole_stays_invalid() {
        let d = raster(5, 5, |u, v| if [(0, 0), (4, 4), (0, 4)].contains(&(u, v)) { 1.0 } else { 0.0 });
        let out = compensate_depth(&d, &CompensationParams::default()).unwrap();
        assert_eq!(out.get(2, 2), 0.0);
    }

    #[test]
    fn wide_spread_blocks_fill() {
        let d = raster(5, 5, |u, v| match (u, v) {
            (2, 2) => 0.0,
            (0, _) => 2.0,
            _ => 1.0,
        });
        let out = compensate_depth(&d, &CompensationParams::default()).unwrap();
        assert_eq!(out.get(2, 2), 0.0);
    }

    proptest! {
        #[test]
        fn only_fills_within_range_and_only_invalidates(
            vals in prop::collection::vec(prop_oneof![Just(0.0f64), 0.5..1.5f64], 64)
        ) {
            let d = DepthImage::new(8, 8, vals).unwrap();
            let out = compensate_depth(&d, &CompensationParams::default()).unwrap();
            for v in 0..8usize {
                for u in 0..8usize {
                    let before = d.get(u, v);
                    let after = out.get(u, v);
                    if is_valid_depth(before) {
                        prop_assert!(after == before || after == 0.0);
                    } else if is_valid_depth(after) {
                        let mut ns = Vec::new();
                        for vv in v.saturating_sub(2)..(v + 3).min(8) {
                            for uu in u.saturating_sub(2)..(u + 3).min(8) {
                                if (uu, vv) != (u, v) && is_valid_depth(d.get(uu, vv)) {
                                    ns.push(d.get(uu, vv));
                                }
                            }
                        }
                        let lo = ns.iter().cloned().fold(f64::INFINITY, f64::min);
                        let hi = ns.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                        prop_assert!(after >= lo && after <= hi);
                    }
                }
            }
        }
    }
}
