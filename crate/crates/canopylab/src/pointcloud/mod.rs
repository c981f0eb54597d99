//! LiDAR point sets: LAS binary ingestion, a plain-text fallback format, and
//! bounding-box bookkeeping.

pub mod las;

use crate::error::{Error, Result};

/// One LiDAR return.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LidarPoint {
    /// Projected easting, meters.
    pub x: f64,
    /// Projected northing, meters.
    pub y: f64,
    /// Elevation, meters.
    pub z: f64,
    /// Reflected intensity, 0..=65535.
    pub intensity: u16,
    /// Index of this return within its pulse, starting at 1.
    pub return_number: u8,
    /// Returns generated by the pulse, at least `return_number`.
    pub num_returns: u8,
}

impl LidarPoint {
    pub fn validate(&self) -> Result<()> {
        if self.return_number == 0 || self.num_returns == 0 {
            return Err(Error::Malformed {
                context: "lidar point",
                detail: "return numbers start at 1".into(),
            });
        }
        if self.return_number > self.num_returns {
            return Err(Error::Malformed {
                context: "lidar point",
                detail: format!(
                    "return {} of {} pulse returns",
                    self.return_number, self.num_returns
                ),
            });
        }
        if !(self.x.is_finite() && self.y.is_finite() && self.z.is_finite()) {
            return Err(Error::Malformed {
                context: "lidar point",
                detail: "non-finite coordinate".into(),
            });
        }
        Ok(())
    }
}

/// Planar bounding box over point x/y.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

/// An ordered, immutable set of LiDAR returns.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<LidarPoint>,
    /// Tight x/y bounds; `None` for an empty cloud.
    pub bounds: Option<BoundingBox>,
    pub source_description: String,
}

impl PointCloud {
    pub fn new(points: Vec<LidarPoint>, source_description: impl Into<String>) -> PointCloud {
        let bounds = bounds_of(&points);
        PointCloud {
            points,
            bounds,
            source_description: source_description.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

fn bounds_of(points: &[LidarPoint]) -> Option<BoundingBox> {
    let first = points.first()?;
    let mut b = BoundingBox {
        min_x: first.x,
        min_y: first.y,
        max_x: first.x,
        max_y: first.y,
    };
    for p in points {
        b.min_x = b.min_x.min(p.x);
        b.min_y = b.min_y.min(p.y);
        b.max_x = b.max_x.max(p.x);
        b.max_y = b.max_y.max(p.y);
    }
    Some(b)
}

/// Exact min/max over x and y of a non-empty cloud.
pub fn compute_bounds(cloud: &PointCloud) -> Result<BoundingBox> {
    bounds_of(&cloud.points).ok_or(Error::EmptyInput("point cloud has no points"))
}

/// Parse the whitespace- or comma-separated text fallback format.
///
/// Each non-empty, non-`#` line holds `x y z [intensity] [return_number]
/// [num_returns]`; omitted trailing fields default to intensity 0, return 1
/// of 1. Points come out in file order.
pub fn parse_xyz_text(text: &str) -> Result<PointCloud> {
    let mut points = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|f| !f.is_empty())
            .collect();
        if fields.len() < 3 || fields.len() > 6 {
            return Err(Error::ParseLine {
                line: line_no,
                msg: format!("expected 3 to 6 fields, found {}", fields.len()),
            });
        }
        let num = |s: &str, what: &str| -> Result<f64> {
            s.parse::<f64>().map_err(|_| Error::ParseLine {
                line: line_no,
                msg: format!("non-numeric {what} field `{s}`"),
            })
        };
        let int = |s: &str, what: &str, max: u64| -> Result<u64> {
            let v = s.parse::<u64>().map_err(|_| Error::ParseLine {
                line: line_no,
                msg: format!("non-numeric {what} field `{s}`"),
            })?;
            if v > max {
                return Err(Error::ParseLine {
                    line: line_no,
                    msg: format!("{what} {v} exceeds {max}"),
                });
            }
            Ok(v)
        };
        let x = num(fields[0], "x")?;
        let y = num(fields[1], "y")?;
        let z = num(fields[2], "z")?;
        let intensity = match fields.get(3) {
            Some(s) => int(s, "intensity", 65535)? as u16,
            None => 0,
        };
        let return_number = match fields.get(4) {
            Some(s) => int(s, "return_number", 255)? as u8,
            None => 1,
        };
        let num_returns = match fields.get(5) {
            Some(s) => int(s, "num_returns", 255)? as u8,
            None => 1,
        };
        let p = LidarPoint {
            x,
            y,
            z,
            intensity,
            return_number,
            num_returns,
        };
        p.validate().map_err(|e| Error::ParseLine {
            line: line_no,
            msg: e.to_string(),
        })?;
        points.push(p);
    }
    Ok(PointCloud::new(points, "xyz text"))
}

/// Write the text fallback format, one `x y z intensity ret num` line per point.
pub fn write_xyz_text(cloud: &PointCloud) -> String {
    let mut out = String::with_capacity(cloud.points.len() * 32);
    out.push_str("# x y z intensity return_number num_returns\n");
    for p in &cloud.points {
        out.push_str(&format!(
            "{} {} {} {} {} {}\n",
            p.x, p.y, p.z, p.intensity, p.return_number, p.num_returns
        ));
    }
    out
}

/// Sniff LAS vs text by the 4-byte signature and parse accordingly.
pub fn parse_auto(bytes: &[u8]) -> Result<PointCloud> {
    if bytes.starts_with(b"LASF") {
        return las::parse_las(bytes);
    }
    let text = std::str::from_utf8(bytes).map_err(|_| Error::Malformed {
        context: "point cloud input",
        detail: "neither a LASF signature nor UTF-8 text".into(),
    })?;
    parse_xyz_text(text)
}
