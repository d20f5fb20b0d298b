//! ASCII PLY import/export for point clouds (`x y z [nx ny nz]`).

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{FrameId, PointCloud, Vec3};
use crate::error::{Error, Result};

pub fn write_ply(cloud: &PointCloud, path: impl AsRef<Path>) -> Result<()> {
    let file = fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    write_ply_to(cloud, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn write_ply_to<W: Write>(cloud: &PointCloud, w: &mut W) -> Result<()> {
    writeln!(w, "ply")?;
    writeln!(w, "format ascii 1.0")?;
    writeln!(w, "comment frame {}", cloud.frame)?;
    writeln!(w, "element vertex {}", cloud.len())?;
    for axis in ["x", "y", "z"] {
        writeln!(w, "property float {axis}")?;
    }
    if cloud.has_normals() {
        for axis in ["nx", "ny", "nz"] {
            writeln!(w, "property float {axis}")?;
        }
    }
    writeln!(w, "end_header")?;
    for (i, p) in cloud.points.iter().enumerate() {
        match &cloud.normals {
            Some(ns) => {
                let n = ns[i];
                writeln!(w, "{} {} {} {} {} {}", p.x, p.y, p.z, n.x, n.y, n.z)?
            }
            None => writeln!(w, "{} {} {}", p.x, p.y, p.z)?,
        }
    }
    Ok(())
}

pub fn read_ply(path: impl AsRef<Path>) -> Result<PointCloud> {
    parse_ply(&fs::read_to_string(path)?)
}

pub fn parse_ply(text: &str) -> Result<PointCloud> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("ply") {
        return Err(Error::Format("missing `ply` magic".into()));
    }
    let mut count = None;
    let mut props: Vec<String> = Vec::new();
    let mut frame = FrameId::world();
    let mut in_vertex = false;
    loop {
        let line = lines
            .next()
            .ok_or_else(|| Error::Format("unterminated header".into()))?
            .trim();
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("format") => {
                if tok.next() != Some("ascii") {
                    return Err(Error::Format("only ascii PLY is supported".into()));
                }
            }
            Some("comment") => {
                if tok.next() == Some("frame") {
                    if let Some(name) = tok.next() {
                        frame = FrameId::new(name);
                    }
                }
            }
            Some("element") => {
                let name = tok.next();
                in_vertex = name == Some("vertex");
                if in_vertex {
                    let n = tok
                        .next()
                        .and_then(|s| s.parse::<usize>().ok())
                        .ok_or_else(|| Error::Format("bad vertex count".into()))?;
                    count = Some(n);
                }
            }
            Some("property") if in_vertex => {
                let name = tok.last().ok_or_else(|| Error::Format("bad property".into()))?;
                props.push(name.to_owned());
            }
            Some("end_header") => break,
            _ => {}
        }
    }
    let count = count.ok_or_else(|| Error::Format("no vertex element".into()))?;
    let col = |name: &str| props.iter().position(|p| p == name);
    let (xi, yi, zi) = match (col("x"), col("y"), col("z")) {
        (Some(x), Some(y), Some(z)) => (x, y, z),
        _ => return Err(Error::Format("vertex needs x, y, z".into())),
    };
    let normal_cols = match (col("nx"), col("ny"), col("nz")) {
        (Some(a), Some(b), Some(c)) => Some((a, b, c)),
        _ => None,
    };
    let mut points = Vec::with_capacity(count);
    let mut normals = normal_cols.map(|_| Vec::with_capacity(count));
    for _ in 0..count {
        let line = lines
            .next()
            .ok_or_else(|| Error::Format("fewer vertices than declared".into()))?;
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Format(format!("bad vertex value: {e}")))?;
        if vals.len() < props.len() {
            return Err(Error::Format("short vertex line".into()));
        }
        points.push(Vec3::new(vals[xi], vals[yi], vals[zi]));
        if let (Some(ns), Some((a, b, c))) = (normals.as_mut(), normal_cols) {
            let n = Vec3::new(vals[a], vals[b], vals[c]);
            // Renormalize: exported values are rounded to float precision.
            ns.push(n.try_normalize(1e-12).unwrap_or(n));
        }
    }
    let cloud = PointCloud {
        points,
        normals,
        frame,
    };
    cloud.validate()?;
    Ok(cloud)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_with_normals() {
        let cloud = PointCloud::with_normals(
            vec![Vec3::new(0.1, -0.2, 1.5), Vec3::new(3.0, 0.0, 0.25)],
            vec![Vec3::z(), Vec3::new(0.6, 0.8, 0.0)],
            FrameId::new("camera"),
        )
        .unwrap();
        let mut buf = Vec::new();
        write_ply_to(&cloud, &mut buf).unwrap();
        let back = parse_ply(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(back.frame, cloud.frame);
        assert_eq!(back.points, cloud.points);
        assert_eq!(back.normals.unwrap().len(), 2);
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse_ply("not a ply").is_err());
        assert!(parse_ply("ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\nend_header\n0 0 0\n").is_err());
    }
}
