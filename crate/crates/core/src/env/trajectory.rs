use std::io::{Read, Write};

use super::selector::Phase;
use crate::error::{Error, Result};
use crate::sim::NUM_JOINTS;

/// One control-step sample. `tau` is the mean motor torque over the interval
/// that ended at this sample (zero for the initial row).
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub t: f64,
    pub x: f64,
    pub h: f64,
    pub theta: f64,
    pub q: [f64; NUM_JOINTS],
    pub qd: [f64; NUM_JOINTS],
    pub tau: [f64; NUM_JOINTS],
    pub f_contact: f64,
    pub xd: f64,
    pub hd: f64,
    pub thetad: f64,
    pub phase: Phase,
}

pub type Trajectory = Vec<TrajectoryRow>;

fn header() -> Vec<String> {
    let mut h: Vec<String> = ["t", "x", "h", "theta"].iter().map(|s| s.to_string()).collect();
    for prefix in ["q", "qd", "tau"] {
        for i in 1..=NUM_JOINTS {
            h.push(format!("{prefix}{i}"));
        }
    }
    h.extend(["f_contact", "xd", "hd", "thetad", "phase"].iter().map(|s| s.to_string()));
    h
}

fn phase_name(p: Phase) -> &'static str {
    match p {
        Phase::TakeOff => "takeoff",
        Phase::Flight => "flight",
        Phase::Landing => "landing",
    }
}

fn parse_phase(s: &str) -> Option<Phase> {
    match s {
        "takeoff" => Some(Phase::TakeOff),
        "flight" => Some(Phase::Flight),
        "landing" => Some(Phase::Landing),
        _ => None,
    }
}

pub fn write_trajectory_csv<W: Write>(out: W, rows: &[TrajectoryRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header()).map_err(csv_err)?;
    for r in rows {
        let mut rec: Vec<String> = vec![r.t.to_string(), r.x.to_string(), r.h.to_string(), r.theta.to_string()];
        for arr in [&r.q, &r.qd, &r.tau] {
            rec.extend(arr.iter().map(|v| v.to_string()));
        }
        rec.extend([r.f_contact, r.xd, r.hd, r.thetad].iter().map(|v| v.to_string()));
        rec.push(phase_name(r.phase).to_string());
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    Error::Parse { line, msg: e.to_string() }
}

/// Reads a trajectory. The velocity and phase columns are optional: missing
/// velocities are rebuilt by finite differences and a missing phase reads as
/// take-off.
pub fn read_trajectory_csv<R: Read>(input: R) -> Result<Trajectory> {
    let mut rd = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let head = rd.headers().map_err(csv_err)?.clone();
    let col = |name: &str| head.iter().position(|h| h.trim() == name);
    let required = |name: &str| col(name).ok_or_else(|| Error::Parse { line: 1, msg: format!("missing column `{name}`") });
    let (ct, cx, ch, cth, cf) = (required("t")?, required("x")?, required("h")?, required("theta")?, required("f_contact")?);
    let mut cq = [0; NUM_JOINTS];
    let mut cqd = [0; NUM_JOINTS];
    let mut ctau = [0; NUM_JOINTS];
    for i in 0..NUM_JOINTS {
        cq[i] = required(&format!("q{}", i + 1))?;
        cqd[i] = required(&format!("qd{}", i + 1))?;
        ctau[i] = required(&format!("tau{}", i + 1))?;
    }
    let (cxd, chd, cthd, cph) = (col("xd"), col("hd"), col("thetad"), col("phase"));

    let mut rows = Vec::new();
    for (k, rec) in rd.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let line = k + 2;
        let num = |c: usize| -> Result<f64> {
            let s = rec.get(c).ok_or_else(|| Error::Parse { line, msg: format!("missing field {c}") })?;
            s.trim().parse::<f64>().map_err(|_| Error::Parse { line, msg: format!("bad number `{s}` in column {}", &head[c]) })
        };
        let mut q = [0.0; NUM_JOINTS];
        let mut qd = [0.0; NUM_JOINTS];
        let mut tau = [0.0; NUM_JOINTS];
        for i in 0..NUM_JOINTS {
            q[i] = num(cq[i])?;
            qd[i] = num(cqd[i])?;
            tau[i] = num(ctau[i])?;
        }
        let phase = match cph {
            Some(c) => {
                let s = rec.get(c).unwrap_or("");
                parse_phase(s.trim()).ok_or_else(|| Error::Parse { line, msg: format!("bad phase `{s}`") })?
            }
            None => Phase::TakeOff,
        };
        rows.push(TrajectoryRow {
            t: num(ct)?,
            x: num(cx)?,
            h: num(ch)?,
            theta: num(cth)?,
            q,
            qd,
            tau,
            f_contact: num(cf)?,
            xd: cxd.map(num).transpose()?.unwrap_or(f64::NAN),
            hd: chd.map(num).transpose()?.unwrap_or(f64::NAN),
            thetad: cthd.map(num).transpose()?.unwrap_or(f64::NAN),
            phase,
        });
    }
    if cxd.is_none() || chd.is_none() || cthd.is_none() {
        fill_velocities(&mut rows);
    }
    Ok(rows)
}

fn fill_velocities(rows: &mut [TrajectoryRow]) {
    let n = rows.len();
    if n < 2 {
        for r in rows.iter_mut() {
            r.xd = if r.xd.is_nan() { 0.0 } else { r.xd };
            r.hd = if r.hd.is_nan() { 0.0 } else { r.hd };
            r.thetad = if r.thetad.is_nan() { 0.0 } else { r.thetad };
        }
        return;
    }
    let diff = |rows: &[TrajectoryRow], k: usize, f: fn(&TrajectoryRow) -> f64| {
        let (a, b) = if k == 0 { (0, 1) } else if k == n - 1 { (n - 2, n - 1) } else { (k - 1, k + 1) };
        (f(&rows[b]) - f(&rows[a])) / (rows[b].t - rows[a].t)
    };
    let est: Vec<[f64; 3]> =
        (0..n).map(|k| [diff(rows, k, |r| r.x), diff(rows, k, |r| r.h), diff(rows, k, |r| r.theta)]).collect();
    for (r, e) in rows.iter_mut().zip(est) {
        if r.xd.is_nan() {
            r.xd = e[0];
        }
        if r.hd.is_nan() {
            r.hd = e[1];
        }
        if r.thetad.is_nan() {
            r.thetad = e[2];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(t: f64) -> TrajectoryRow {
        TrajectoryRow {
            t,
            x: 0.1 * t,
            h: 0.3 + t * t,
            theta: -0.5 * t,
            q: [0.1, 0.2, 0.3, 0.4, 0.5, 0.6],
            qd: [1.0; 6],
            tau: [-3.25; 6],
            f_contact: 117.5,
            xd: 0.1,
            hd: 2.0 * t,
            thetad: -0.5,
            phase: if t > 0.05 { Phase::Flight } else { Phase::TakeOff },
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let rows: Vec<_> = (0..5).map(|k| row(k as f64 * 0.02 + 1.0 / 3.0)).collect();
        let mut buf = Vec::new();
        write_trajectory_csv(&mut buf, &rows).unwrap();
        let back = read_trajectory_csv(buf.as_slice()).unwrap();
        assert_eq!(back, rows);
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,x,h,theta,q1,"));
        assert_eq!(text.lines().count(), 6);
    }

    #[test]
    fn minimal_columns_get_velocities() {
        let mut text = String::from("t,x,h,theta");
        for p in ["q", "qd", "tau"] {
            for i in 1..=6 {
                text += &format!(",{p}{i}");
            }
        }
        text += ",f_contact\n";
        for k in 0..4 {
            let t = k as f64 * 0.5;
            text += &format!("{t},{},{},0{}\n", 2.0 * t, 0.3 + t, ",0".repeat(18) + ",0");
        }
        let rows = read_trajectory_csv(text.as_bytes()).unwrap();
        assert_eq!(rows.len(), 4);
        for r in &rows {
            assert!((r.xd - 2.0).abs() < 1e-12);
            assert!((r.hd - 1.0).abs() < 1e-12);
            assert_eq!(r.phase, Phase::TakeOff);
        }
    }

    #[test]
    fn malformed_reports_line() {
        let rows: Vec<_> = (0..3).map(|k| row(k as f64)).collect();
        let mut buf = Vec::new();
        write_trajectory_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap().replacen("117.5", "oops", 1);
        match read_trajectory_csv(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(matches!(read_trajectory_csv("a,b\n1,2\n".as_bytes()), Err(Error::Parse { line: 1, .. })));
    }
}
