//! Trajectory CSV: `s`, the jet columns by name, `lambda`, `v1`..`v6`, and
//! when a frame was carried along `sigma_11`..`sigma_33` and `x,y,z`.

use std::io::{Read, Write};

use crate::frames::io::{csv_line, fmt_f64};
use crate::frames::{Mat3, Vec3};
use crate::jet::JetVar;

use super::el::InvariantTrajectory;
use super::VariationalError;

const SIGMA: [&str; 9] = ["sigma_11", "sigma_12", "sigma_13", "sigma_21", "sigma_22", "sigma_23", "sigma_31", "sigma_32", "sigma_33"];

pub fn write_trajectory_csv(mut w: impl Write, t: &InvariantTrajectory) -> std::io::Result<()> {
    let mut head: Vec<String> = vec!["s".into()];
    head.extend(t.layout.iter().map(|v| v.to_string()));
    head.push("lambda".into());
    head.extend((1..=6).map(|i| format!("v{i}")));
    let framed = t.sigma.is_some() && t.position.is_some();
    if framed {
        head.extend(SIGMA.iter().map(|s| s.to_string()));
        head.extend(["x", "y", "z"].map(String::from));
    }
    writeln!(w, "{}", head.join(","))?;
    for i in 0..t.len() {
        let mut cells = vec![fmt_f64(t.s[i])];
        cells.push(csv_line(t.jets[i].iter().copied()));
        cells.push(fmt_f64(t.lambda[i]));
        cells.push(csv_line(t.v[i]));
        if let (Some(sig), Some(pos)) = (&t.sigma, &t.position) {
            cells.push(csv_line(sig[i].transpose().iter().copied()));
            cells.push(csv_line([pos[i].x, pos[i].y, pos[i].z]));
        }
        cells.retain(|c| !c.is_empty());
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}

fn input(e: impl std::fmt::Display) -> VariationalError {
    VariationalError::Algebra(format!("trajectory csv: {e}"))
}

pub fn read_trajectory_csv(reader: impl Read) -> Result<InvariantTrajectory, VariationalError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers: Vec<String> = rdr.headers().map_err(input)?.iter().map(String::from).collect();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let s_col = col("s").ok_or_else(|| input("missing column s"))?;
    let lam_col = col("lambda").ok_or_else(|| input("missing column lambda"))?;
    let v_cols: Vec<usize> = (1..=6)
        .map(|i| col(&format!("v{i}")).ok_or_else(|| input(format!("missing column v{i}"))))
        .collect::<Result<_, _>>()?;
    let mut layout = Vec::new();
    let mut jet_cols = Vec::new();
    for (j, h) in headers.iter().enumerate() {
        if h == "lambda" {
            continue;
        }
        if let Some(v) = JetVar::from_name(h) {
            if v.base.is_kappa() || v.base == crate::jet::Base::Mu {
                layout.push(v);
                jet_cols.push(j);
            }
        }
    }
    let sig_cols: Option<Vec<usize>> = SIGMA.iter().map(|n| col(n)).collect();
    let pos_cols: Option<Vec<usize>> = ["x", "y", "z"].iter().map(|n| col(n)).collect();
    let framed = sig_cols.is_some() && pos_cols.is_some();
    let mut t = InvariantTrajectory {
        s: Vec::new(),
        layout,
        jets: Vec::new(),
        lambda: Vec::new(),
        v: Vec::new(),
        sigma: framed.then(Vec::new),
        position: framed.then(Vec::new),
        truncated: None,
    };
    for rec in rdr.records() {
        let rec = rec.map_err(input)?;
        let x: Vec<f64> = rec.iter().map(|c| c.parse::<f64>()).collect::<Result<_, _>>().map_err(input)?;
        if x.len() != headers.len() {
            return Err(input(format!("row has {} cells, header has {}", x.len(), headers.len())));
        }
        t.s.push(x[s_col]);
        t.jets.push(jet_cols.iter().map(|&j| x[j]).collect());
        t.lambda.push(x[lam_col]);
        t.v.push(std::array::from_fn(|i| x[v_cols[i]]));
        if let (Some(sc), Some(pc), Some(sig), Some(pos)) = (&sig_cols, &pos_cols, t.sigma.as_mut(), t.position.as_mut()) {
            sig.push(Mat3::from_row_slice(&sc.iter().map(|&j| x[j]).collect::<Vec<_>>()));
            pos.push(Vec3::new(x[pc[0]], x[pc[1]], x[pc[2]]));
        }
    }
    if !t.layout.contains(&JetVar::k1(0)) || !t.layout.contains(&JetVar::k2(0)) {
        return Err(input("columns k1 and k2 are required"));
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::parse_lagrangian;
    use crate::variational::fixtures::first_order_torsion;
    use crate::variational::{assemble_el_system, solve_el, SolveOptions};

    #[test]
    fn round_trip_is_exact() {
        let f = first_order_torsion();
        let sys = assemble_el_system(&parse_lagrangian(f.lagrangian).unwrap()).unwrap();
        let t = solve_el(&sys, &f.ic_map(), (0.0, 0.05), 1e-2, &SolveOptions::default()).unwrap();
        let mut buf = Vec::new();
        write_trajectory_csv(&mut buf, &t).unwrap();
        let back = read_trajectory_csv(&buf[..]).unwrap();
        assert_eq!(back.s, t.s);
        assert_eq!(back.layout, t.layout);
        assert_eq!(back.jets, t.jets);
        assert_eq!(back.v, t.v);
        assert_eq!(back.sigma, t.sigma);
        assert_eq!(back.position, t.position);
    }

    #[test]
    fn missing_columns_are_reported() {
        assert!(read_trajectory_csv("s,k1,lambda\n0,1,0\n".as_bytes()).is_err());
        assert!(read_trajectory_csv("s,k1,lambda,v1,v2,v3,v4,v5,v6\n0,1,0,0,0,0,0,0,0\n".as_bytes()).is_err());
    }
}
