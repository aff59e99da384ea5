//! CSV and JSON artifacts.
//!
//! Floats are written with Rust's shortest round-trip formatting so that
//! reruns with the same seed produce identical bytes.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::control::{ConsistencyRow, ControlValueSurface, PolicyRow};
use crate::error::{Error, Result};
use crate::filter::FilterPath;
use crate::model::{Observations, SamplePath};
use crate::stopping::{FreeBoundary, Region, ValueSurface};

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    Ok(csv::Writer::from_path(path)?)
}

fn num(x: f64) -> String {
    format!("{x}")
}

/// Marks recorded on one row, `;`-separated when several jumps share it.
fn marks_cell(marks: &[f64]) -> String {
    marks.iter().map(|m| num(*m)).collect::<Vec<_>>().join(";")
}

/// `t,z,x0,eta,jump_mark`, regimes numbered from 1.
pub fn write_path_csv(path: &Path, p: &SamplePath) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["t", "z", "x0", "eta", "jump_mark"])?;
    let mut jcur = 0;
    for k in 0..p.t.len() {
        let mut marks = Vec::new();
        while jcur < p.jumps.len() && p.jumps[jcur].row == k {
            marks.push(p.jumps[jcur].mark);
            jcur += 1;
        }
        w.write_record([
            num(p.t[k]),
            (p.z[k] + 1).to_string(),
            num(p.x0[k]),
            num(p.eta[k]),
            marks_cell(&marks),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Observable columns of the path schema. A `z` column, if present, is
/// never read.
#[derive(Debug, Deserialize)]
struct ObservationRow {
    t: f64,
    x0: f64,
    eta: f64,
    #[serde(default)]
    jump_mark: String,
}

/// Reads observations in the path schema. The grid must be uniform.
pub fn read_observations_csv(path: &Path) -> Result<Observations> {
    let mut r = csv::Reader::from_path(path)?;
    let mut obs = Observations {
        dt: 0.0,
        t: Vec::new(),
        x0: Vec::new(),
        eta: Vec::new(),
        jumps: Vec::new(),
    };
    for (k, row) in r.deserialize::<ObservationRow>().enumerate() {
        let row = row?;
        obs.t.push(row.t);
        obs.x0.push(row.x0);
        obs.eta.push(row.eta);
        for cell in row.jump_mark.split(';').map(str::trim).filter(|c| !c.is_empty()) {
            let mark: f64 = cell
                .parse()
                .map_err(|_| Error::Config(format!("row {k}: bad jump mark {cell:?}")))?;
            obs.jumps.push((k, mark));
        }
    }
    if obs.t.len() < 2 {
        return Err(Error::Config("observation file needs at least two rows".into()));
    }
    let dt = obs.t[1] - obs.t[0];
    let uniform = obs
        .t
        .windows(2)
        .all(|w| ((w[1] - w[0]) - dt).abs() <= 1e-9 * dt.abs().max(1.0));
    if !(dt > 0.0) || !uniform {
        return Err(Error::Config("observation times must be uniformly spaced".into()));
    }
    obs.dt = dt;
    Ok(obs)
}

/// `t,pi_1,...,pi_Q,dI,dI1`.
pub fn write_filter_csv(path: &Path, f: &FilterPath) -> Result<()> {
    let mut w = writer(path)?;
    let q = f.pi.first().map_or(0, Vec::len);
    let mut header = vec!["t".to_string()];
    header.extend((1..=q).map(|i| format!("pi_{i}")));
    header.extend(["dI".to_string(), "dI1".to_string()]);
    w.write_record(&header)?;
    for k in 0..f.t.len() {
        let mut rec = vec![num(f.t[k])];
        rec.extend(f.pi[k].iter().map(|p| num(*p)));
        rec.push(num(f.innovations[k].di));
        rec.push(num(f.innovations[k].di1));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// `x,y,v,region`.
pub fn write_surface_csv(path: &Path, s: &ValueSurface) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["x", "y", "v", "region"])?;
    let g = &s.grid;
    for j in 0..g.ny() {
        for i in 0..g.nx() {
            let region = match s.region_at(i, j) {
                Region::Continue => "continue",
                Region::Stop => "stop",
            };
            w.write_record([num(g.x[i]), num(g.y[j]), num(s.at(i, j)), region.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `y,d,zeta_lower,x_star_lower,x_star_upper`.
pub fn write_boundary_csv(path: &Path, b: &FreeBoundary) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["y", "d", "zeta_lower", "x_star_lower", "x_star_upper"])?;
    for j in 0..b.y.len() {
        w.write_record([
            num(b.y[j]),
            num(b.d[j]),
            num(b.zeta[j]),
            num(b.bounds.x_star_lower),
            num(b.bounds.x_star_upper),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `x,y,V,Vx,Vy,Vxx,Vxy,Vyy`.
pub fn write_control_csv(path: &Path, c: &ControlValueSurface) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["x", "y", "V", "Vx", "Vy", "Vxx", "Vxy", "Vyy"])?;
    let g = &c.grid;
    for j in 0..g.ny() {
        for i in 0..g.nx() {
            let k = g.idx(i, j);
            w.write_record([
                num(g.x[i]),
                num(g.y[j]),
                num(c.value[k]),
                num(c.vx[k]),
                num(c.vy[k]),
                num(c.vxx[k]),
                num(c.vxy[k]),
                num(c.vyy[k]),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `policy,x0,y0,mean_cost,ci_half,n_paths`.
pub fn write_policy_csv(path: &Path, rows: &[PolicyRow]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["policy", "x0", "y0", "mean_cost", "ci_half", "n_paths"])?;
    for r in rows {
        w.write_record([
            r.policy.clone(),
            num(r.x0),
            num(r.y0),
            num(r.mean_cost),
            num(r.ci_half),
            r.n_paths.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `x,y,V_pde,V_mc,ci_half,pass`.
pub fn write_consistency_csv(path: &Path, rows: &[ConsistencyRow]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["x", "y", "V_pde", "V_mc", "ci_half", "pass"])?;
    for r in rows {
        w.write_record([
            num(r.x),
            num(r.y),
            num(r.v_pde),
            num(r.v_mc),
            num(r.ci_half),
            r.pass.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut f = File::create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::JumpRecord;

    fn toy_path() -> SamplePath {
        SamplePath {
            dt: 0.5,
            t: vec![0.0, 0.5, 1.0],
            z: vec![0, 1, 1],
            x0: vec![1.0, 1.1, 0.9],
            eta: vec![0.0, 0.3, 0.1],
            jumps: vec![JumpRecord {
                row: 1,
                time: 0.4,
                mark: 0.25,
                eta_pre: 0.05,
                regime: 0,
            }],
            dw: vec![0.0; 2],
            db: vec![0.0; 2],
            seed: None,
        }
    }

    #[test]
    fn observation_round_trip_drops_regime() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("path.csv");
        let path = toy_path();
        write_path_csv(&p, &path).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("t,z,x0,eta,jump_mark\n0,1,1,0,\n"));
        let obs = read_observations_csv(&p).unwrap();
        assert_eq!(obs, path.observations());
    }

    #[test]
    fn reader_accepts_files_without_regime() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("obs.csv");
        std::fs::write(&p, "t,x0,eta,jump_mark\n0,1,0,\n0.1,1.01,0.2,0.5;-0.5\n").unwrap();
        let obs = read_observations_csv(&p).unwrap();
        assert_eq!(obs.jumps, vec![(1, 0.5), (1, -0.5)]);
        assert!((obs.dt - 0.1).abs() < 1e-15);
    }

    #[test]
    fn reader_rejects_uneven_grids() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("obs.csv");
        std::fs::write(&p, "t,x0,eta,jump_mark\n0,1,0,\n0.1,1,0,\n0.3,1,0,\n").unwrap();
        assert!(read_observations_csv(&p).is_err());
    }
}
