use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::{c64, CMat, CVec};
use crate::wmmse::BeamformerSet;

pub const BEAMFORMER_CSV_HEADER: [&str; 6] = ["user", "quantity", "row", "col", "re", "im"];

/// Writes `v_info` (col = 0), every entry of `v_energy`, the extracted
/// energy vectors as `energy_vector` (col = 0), and `tau` as a single row of
/// user 0.
pub fn write_beamformers_csv<W: Write>(bf: &BeamformerSet, energy_vectors: &[CVec], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| Error::Output(format!("beamformer csv: {e}"));
    w.write_record(BEAMFORMER_CSV_HEADER).map_err(err)?;
    let mut put = |k: usize, q: &str, r: usize, c: usize, re: f64, im: f64| {
        w.write_record([
            k.to_string(),
            q.to_string(),
            r.to_string(),
            c.to_string(),
            format!("{re:?}"),
            format!("{im:?}"),
        ])
        .map_err(err)
    };
    put(0, "tau", 0, 0, bf.tau, 0.0)?;
    for (k, v) in bf.v_info.iter().enumerate() {
        for (i, z) in v.iter().enumerate() {
            put(k, "v_info", i, 0, z.re, z.im)?;
        }
    }
    for (k, m) in bf.v_energy.iter().enumerate() {
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let z = m[(i, j)];
                put(k, "v_energy", i, j, z.re, z.im)?;
            }
        }
    }
    for (k, v) in energy_vectors.iter().enumerate() {
        for (i, z) in v.iter().enumerate() {
            put(k, "energy_vector", i, 0, z.re, z.im)?;
        }
    }
    w.flush().map_err(|e| Error::Output(format!("beamformer csv: {e}")))?;
    Ok(())
}

/// Parses [`write_beamformers_csv`] output into the beamformer set (energy
/// vectors are not needed to re-evaluate a solution and are skipped).
pub fn read_beamformers_csv<R: std::io::Read>(input: R, path: &Path) -> Result<BeamformerSet> {
    let rows = crate::io::read_complex_rows(input, path, &BEAMFORMER_CSV_HEADER)?;
    let parse = |line: u64, msg: String| Error::Parse {
        path: path.into(),
        line,
        msg,
    };
    let k_users = rows
        .iter()
        .filter(|r| r.quantity == "v_info")
        .map(|r| r.index + 1)
        .max()
        .unwrap_or(0);
    let n = rows
        .iter()
        .filter(|r| r.quantity == "v_info")
        .map(|r| r.row + 1)
        .max()
        .unwrap_or(0);
    if k_users == 0 || n == 0 {
        return Err(parse(1, "no v_info rows".into()));
    }
    let mut v_info = vec![CVec::zeros(n); k_users];
    let mut v_energy = vec![CMat::zeros(n, n); k_users];
    let mut tau = None;
    for r in &rows {
        if r.index >= k_users {
            return Err(parse(r.line, format!("user {} has no v_info rows", r.index)));
        }
        let z = c64(r.re, r.im);
        match r.quantity.as_str() {
            "tau" => {
                if tau.replace(r.re).is_some() {
                    return Err(parse(r.line, "duplicate tau row".into()));
                }
            }
            "v_info" | "energy_vector" => {
                if r.row >= n || r.col != 0 {
                    return Err(parse(r.line, "vector index out of range".into()));
                }
                if r.quantity == "v_info" {
                    v_info[r.index][r.row] = z;
                }
            }
            "v_energy" => {
                if r.row >= n || r.col >= n {
                    return Err(parse(r.line, "matrix index out of range".into()));
                }
                v_energy[r.index][(r.row, r.col)] = z;
            }
            other => return Err(parse(r.line, format!("unknown quantity `{other}`"))),
        }
    }
    let tau = tau.ok_or_else(|| parse(1, "missing tau row".into()))?;
    let bf = BeamformerSet { v_info, v_energy, tau };
    bf.validate()?;
    Ok(bf)
}

pub fn load_beamformers_csv(path: &Path) -> Result<BeamformerSet> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_beamformers_csv(file, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{outer, unit_vec};

    fn sample() -> BeamformerSet {
        let a = CVec::from_vec(vec![c64(0.1, -0.2), c64(1.0 / 3.0, 0.0)]);
        let b = CVec::from_vec(vec![c64(0.0, 1e-17), c64(-2.5, 0.75)]);
        BeamformerSet {
            v_info: vec![a.clone(), b],
            v_energy: vec![outer(&a), outer(&unit_vec(2, 1)).scale(0.3)],
            tau: 0.4375,
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let bf = sample();
        let mut buf = Vec::new();
        write_beamformers_csv(&bf, &[], &mut buf).unwrap();
        let back = read_beamformers_csv(buf.as_slice(), Path::new("bf.csv")).unwrap();
        assert_eq!(back, bf);
    }

    #[test]
    fn malformed_rows_name_the_line() {
        let text = "user,quantity,row,col,re,im\n0,tau,0,0,0.5,0\n0,v_info,0,0,1,0\n0,v_info,0,3,1,0\n";
        match read_beamformers_csv(text.as_bytes(), Path::new("bf.csv")) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
        let text = "user,quantity,row,col,re,im\n0,v_info,0,0,1,0\n";
        assert!(matches!(
            read_beamformers_csv(text.as_bytes(), Path::new("bf.csv")),
            Err(Error::Parse { .. })
        ));
    }
}
