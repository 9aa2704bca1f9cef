//! CSV and JSON input/output for curves, frames and invariants.
//!
//! Floats are written with 17 significant digits so values round-trip.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{row, CurveSamples, FrameField, FramesError, GaugeData, Vec3};

/// Format with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn csv_line(values: impl IntoIterator<Item = f64>) -> String {
    let cells: Vec<String> = values.into_iter().map(fmt_f64).collect();
    cells.join(",")
}

/// Curve read from text: either an arc-length column `s` or a generic
/// parameter `t` (which then needs reparametrization).
#[derive(Clone, Debug, PartialEq)]
pub struct RawCurve {
    pub param: Vec<f64>,
    pub points: Vec<Vec3>,
    pub is_arclength: bool,
}

impl RawCurve {
    /// Uniform arc-length samples, resampling unless the input already is
    /// a uniform arc-length grid.
    pub fn into_samples(self, ds: f64) -> Result<CurveSamples, FramesError> {
        if self.is_arclength && self.param.len() >= 7 {
            let h = (self.param[self.param.len() - 1] - self.param[0]) / (self.param.len() - 1) as f64;
            let uniform = self
                .param
                .windows(2)
                .all(|w| ((w[1] - w[0]) - h).abs() <= 1e-12 * (1.0 + h.abs()));
            if uniform && (ds - h).abs() <= 1e-12 * h.max(ds) {
                return CurveSamples::from_points(self.param[0], h, self.points);
            }
        }
        super::reparametrize_arclength(&self.points, ds)
    }
}

#[derive(Debug, Deserialize)]
struct CurveRow {
    #[serde(alias = "t")]
    s: f64,
    x: f64,
    y: f64,
    z: f64,
}

/// Read `s,x,y,z` or `t,x,y,z` CSV with a header row.
pub fn read_curve_csv(reader: impl Read) -> Result<RawCurve, FramesError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| FramesError::Input(e.to_string()))?.clone();
    let first = headers.get(0).unwrap_or("");
    if first != "s" && first != "t" {
        return Err(FramesError::Input(format!(
            "first column must be `s` or `t`, found `{first}`"
        )));
    }
    let mut param = Vec::new();
    let mut points = Vec::new();
    for rec in rdr.deserialize::<CurveRow>() {
        let r = rec.map_err(|e| FramesError::Input(e.to_string()))?;
        param.push(r.s);
        points.push(Vec3::new(r.x, r.y, r.z));
    }
    Ok(RawCurve {
        param,
        points,
        is_arclength: first == "s",
    })
}

/// JSON curve: `{"s": [...], "points": [[x,y,z], ...]}` or with `t`.
#[derive(Debug, Serialize, Deserialize)]
pub struct CurveJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<Vec<f64>>,
    pub points: Vec<[f64; 3]>,
}

pub fn read_curve_json(reader: impl Read) -> Result<RawCurve, FramesError> {
    let c: CurveJson = serde_json::from_reader(reader).map_err(|e| FramesError::Input(e.to_string()))?;
    let (param, is_arclength) = match (c.s, c.t) {
        (Some(s), _) => (s, true),
        (None, Some(t)) => (t, false),
        (None, None) => ((0..c.points.len()).map(|i| i as f64).collect(), false),
    };
    if param.len() != c.points.len() {
        return Err(FramesError::Input(format!(
            "{} parameter values for {} points",
            param.len(),
            c.points.len()
        )));
    }
    Ok(RawCurve {
        param,
        points: c.points.into_iter().map(Vec3::from).collect(),
        is_arclength,
    })
}

pub fn write_curve_csv(mut w: impl Write, c: &CurveSamples) -> std::io::Result<()> {
    writeln!(w, "s,x,y,z")?;
    for (s, p) in c.s.iter().zip(&c.points) {
        writeln!(w, "{}", csv_line([*s, p.x, p.y, p.z]))?;
    }
    Ok(())
}

pub fn write_curve_json(w: impl Write, c: &CurveSamples) -> serde_json::Result<()> {
    let doc = CurveJson {
        s: Some(c.s.clone()),
        t: None,
        points: c.points.iter().map(|p| [p.x, p.y, p.z]).collect(),
    };
    serde_json::to_writer_pretty(w, &doc)
}

/// `s` followed by the nine entries of σ in row-major order.
pub fn write_frame_csv(mut w: impl Write, f: &FrameField) -> std::io::Result<()> {
    writeln!(w, "s,t_x,t_y,t_z,n_x,n_y,n_z,b_x,b_y,b_z")?;
    for (s, m) in f.s.iter().zip(&f.rows) {
        let (a, b, c) = (row(m, 0), row(m, 1), row(m, 2));
        writeln!(w, "{}", csv_line([*s, a.x, a.y, a.z, b.x, b.y, b.z, c.x, c.y, c.z]))?;
    }
    Ok(())
}

/// Read back a frame written by [`write_frame_csv`].
pub fn read_frame_csv(reader: impl Read) -> Result<(Vec<f64>, Vec<super::Mat3>), FramesError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut s = Vec::new();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| FramesError::Input(e.to_string()))?;
        let v: Result<Vec<f64>, _> = rec.iter().map(|x| x.parse::<f64>()).collect();
        let v = v.map_err(|e| FramesError::Input(e.to_string()))?;
        if v.len() != 10 {
            return Err(FramesError::Input(format!("frame row has {} columns, expected 10", v.len())));
        }
        s.push(v[0]);
        rows.push(super::Mat3::from_row_slice(&v[1..10]));
    }
    Ok((s, rows))
}

/// `s,kappa,tau,kappa1,kappa2,theta`; absent quantities are left empty.
pub fn write_invariants_csv(mut w: impl Write, g: &GaugeData) -> std::io::Result<()> {
    writeln!(w, "s,kappa,tau,kappa1,kappa2,theta")?;
    let cols = [&g.kappa, &g.tau, &g.kappa1, &g.kappa2, &g.theta];
    for (i, s) in g.s.iter().enumerate() {
        let mut cells = vec![fmt_f64(*s)];
        for c in cols {
            cells.push(c.as_ref().map(|v| fmt_f64(v[i])).unwrap_or_default());
        }
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames::CatalogCurve;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn curve_csv_round_trip() {
        let c = CatalogCurve::Helix { a: 1.0, b: 1.0 }.sample(1.0, 0.05);
        let mut buf = Vec::new();
        write_curve_csv(&mut buf, &c).unwrap();
        let raw = read_curve_csv(&buf[..]).unwrap();
        assert!(raw.is_arclength);
        assert_eq!(raw.points, c.points);
        assert_eq!(raw.param, c.s);
        let back = raw.into_samples(c.ds()).unwrap();
        assert_eq!(back.points, c.points);
    }

    #[test]
    fn parameter_csv_is_reparametrized() {
        let text = "t,x,y,z\n0,0,0,0\n1,2,0,0\n2,4,0,0\n3,6,0,0\n4,8,0,0\n";
        let raw = read_curve_csv(text.as_bytes()).unwrap();
        assert!(!raw.is_arclength);
        let c = raw.into_samples(0.5).unwrap();
        assert_eq!(c.len(), 17);
        assert!((c.points[16].x - 8.0).abs() < 1e-12);
    }

    #[test]
    fn json_curve() {
        let text = r#"{"t": [0, 1, 2, 3], "points": [[0,0,0],[1,1,0],[2,4,0],[3,9,0]]}"#;
        let raw = read_curve_json(text.as_bytes()).unwrap();
        assert_eq!(raw.points.len(), 4);
        assert!(read_curve_json(r#"{"s": [0], "points": [[0,0,0],[1,1,1]]}"#.as_bytes()).is_err());
    }

    #[test]
    fn bad_header_is_rejected() {
        assert!(read_curve_csv("u,x,y,z\n0,0,0,0\n".as_bytes()).is_err());
    }
}
