//! Plot-data export from recorded trajectories: stick-figure frames and
//! phase-plane / Poincaré-section data.

use std::io::Write;

use crate::env::TrajectoryRow;
use crate::error::{Error, Result};
use crate::sim::{body_points, BodyPoints, RobotModel, SimState};

/// One frame per trajectory row.
pub fn replay(model: &RobotModel, rows: &[TrajectoryRow]) -> Vec<BodyPoints> {
    rows.iter()
        .map(|r| {
            let mut s = SimState::at_pose(r.q, r.h);
            s.x = r.x;
            s.theta = r.theta;
            body_points(model, &s)
        })
        .collect()
}

pub fn replay_header() -> Vec<String> {
    let mut h = vec!["t".to_string()];
    for c in ["front_top", "front_bottom", "rear_bottom", "rear_top"] {
        h.push(format!("trunk_{c}_x"));
        h.push(format!("trunk_{c}_z"));
    }
    for leg in ["front", "rear"] {
        for p in ["hip", "knee", "foot"] {
            h.push(format!("{leg}_{p}_x"));
            h.push(format!("{leg}_{p}_z"));
        }
    }
    h.push("com_x".into());
    h.push("com_z".into());
    h
}

pub fn write_replay_csv<W: Write>(out: W, rows: &[TrajectoryRow], frames: &[BodyPoints]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(replay_header()).map_err(csv_err)?;
    for (r, f) in rows.iter().zip(frames) {
        let mut rec = vec![r.t];
        f.trunk.iter().for_each(|p| rec.extend(p));
        for leg in &f.legs {
            rec.extend(leg.hip);
            rec.extend(leg.knee);
            rec.extend(leg.foot);
        }
        rec.extend(f.com);
        w.write_record(rec.iter().map(|v| v.to_string())).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Rows where the feet go from unloaded to loaded.
pub fn touchdowns(rows: &[TrajectoryRow]) -> Vec<usize> {
    (1..rows.len()).filter(|&i| rows[i - 1].f_contact == 0.0 && rows[i].f_contact > 0.0).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoincarePoint {
    pub cycle: usize,
    pub h: f64,
    pub hd: f64,
    pub theta: f64,
    pub thetad: f64,
    /// Distance in `(h, ḣ)` to the previous cycle's point.
    pub dist_prev: Option<f64>,
}

/// The state at every touchdown. Fewer than three touchdowns is an error.
pub fn poincare_section(rows: &[TrajectoryRow]) -> Result<Vec<PoincarePoint>> {
    let td = touchdowns(rows);
    if td.len() < 3 {
        return Err(Error::InputDomain(format!(
            "limit-cycle analysis needs at least 3 jump cycles; the trajectory has {}",
            td.len()
        )));
    }
    let mut out: Vec<PoincarePoint> = Vec::with_capacity(td.len());
    for (k, &i) in td.iter().enumerate() {
        let r = &rows[i];
        let dist_prev = out.last().map(|p| ((r.h - p.h).powi(2) + (r.hd - p.hd).powi(2)).sqrt());
        out.push(PoincarePoint { cycle: k + 1, h: r.h, hd: r.hd, theta: r.theta, thetad: r.thetad, dist_prev });
    }
    Ok(out)
}

/// Whether the last three recorded distances never grow by more than
/// `rel_tol`, ignoring changes below `abs_tol`.
pub fn converging(points: &[PoincarePoint], rel_tol: f64, abs_tol: f64) -> bool {
    let d: Vec<f64> = points.iter().filter_map(|p| p.dist_prev).collect();
    let tail = &d[d.len().saturating_sub(3)..];
    tail.len() >= 2 && tail.windows(2).all(|w| w[1] <= w[0] * (1.0 + rel_tol) + abs_tol)
}

pub fn write_phase_plane_csv<W: Write>(out: W, rows: &[TrajectoryRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "h", "hd", "theta", "thetad"]).map_err(csv_err)?;
    for r in rows {
        w.write_record([r.t, r.h, r.hd, r.theta, r.thetad].map(|v| v.to_string())).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_poincare_csv<W: Write>(out: W, points: &[PoincarePoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["cycle", "h", "hd", "theta", "thetad", "dist_prev"]).map_err(csv_err)?;
    for p in points {
        w.write_record([
            p.cycle.to_string(),
            p.h.to_string(),
            p.hd.to_string(),
            p.theta.to_string(),
            p.thetad.to_string(),
            p.dist_prev.map(|d| d.to_string()).unwrap_or_default(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{read_trajectory_csv, write_trajectory_csv, Phase};
    use crate::sim::NUM_JOINTS;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn row(t: f64, h: f64, hd: f64, f: f64) -> TrajectoryRow {
        TrajectoryRow {
            t,
            x: 0.0,
            h,
            theta: 0.1 * h,
            q: RobotModel::default().homing,
            qd: [0.0; NUM_JOINTS],
            tau: [0.0; NUM_JOINTS],
            f_contact: f,
            xd: 0.0,
            hd,
            thetad: -hd,
            phase: Phase::TakeOff,
        }
    }

    /// `cycles` bounces whose touchdown state is `base + scale^k * offset`.
    fn synthetic(cycles: usize, scale: f64) -> Vec<TrajectoryRow> {
        let mut rows = Vec::new();
        let mut t = 0.0;
        for k in 0..cycles {
            let e = scale.powi(k as i32);
            for i in 0..4 {
                rows.push(row(t, 0.4 + 0.05 * i as f64, 1.0 - 0.2 * i as f64, 0.0));
                t += 0.02;
            }
            rows.push(row(t, 0.3 + 0.08 * e, -1.2 + 0.4 * e, 90.0));
            t += 0.02;
            rows.push(row(t, 0.3, 0.0, 120.0));
            t += 0.02;
        }
        rows
    }

    #[test]
    fn periodic_input_has_zero_distances() {
        let pts = poincare_section(&synthetic(5, 1.0)).unwrap();
        assert_eq!(pts.len(), 5);
        assert_eq!(pts[0].dist_prev, None);
        assert!(pts[1..].iter().all(|p| p.dist_prev == Some(0.0)));
        assert!(converging(&pts, 0.0, 0.0));
    }

    #[test]
    fn geometric_contraction_is_measured() {
        let pts = poincare_section(&synthetic(7, 0.5)).unwrap();
        let d: Vec<f64> = pts.iter().filter_map(|p| p.dist_prev).collect();
        for w in d.windows(2) {
            assert!((w[1] / w[0] - 0.5).abs() < 1e-9, "{w:?}");
        }
        // First distance from the closed form: |(0.08, 0.4)| * (1 - 0.5).
        assert!((d[0] - 0.5 * (0.08f64.powi(2) + 0.4f64.powi(2)).sqrt()).abs() < 1e-12);
        assert!(converging(&pts, 0.2, 0.0));
        assert!(!converging(&poincare_section(&synthetic(7, 2.0)).unwrap(), 0.2, 0.0));
    }

    #[test]
    fn too_few_cycles_is_rejected() {
        let err = poincare_section(&synthetic(2, 1.0)).unwrap_err();
        assert!(matches!(err, Error::InputDomain(_)));
        assert!(err.to_string().contains("3"));
    }

    #[test]
    fn output_schemas() {
        let rows = synthetic(3, 0.5);
        let pts = poincare_section(&rows).unwrap();
        let mut buf = Vec::new();
        write_poincare_csv(&mut buf, &pts).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "cycle,h,hd,theta,thetad,dist_prev");
        assert!(lines[1].ends_with(','));
        assert_eq!(lines.len(), 4);
        let mut buf = Vec::new();
        write_phase_plane_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next(), Some("t,h,hd,theta,thetad"));
        assert_eq!(text.lines().count(), rows.len() + 1);
    }

    fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
    }

    #[test]
    fn homing_frame_has_configured_link_lengths() {
        let m = RobotModel::default();
        let rows = vec![row(0.0, m.standing_height, 0.0, 1.0)];
        let f = &replay(&m, &rows)[0];
        for leg in &f.legs {
            assert!((dist(leg.hip, leg.knee) - m.thigh.length).abs() < 1e-12);
            assert!((dist(leg.knee, leg.foot) - m.calf.length).abs() < 1e-12);
        }
        assert!((dist(f.legs[0].hip, f.legs[1].hip) - (m.hip_offset[0] - m.hip_offset[1])).abs() < 1e-12);
    }

    #[test]
    fn com_is_the_mass_weighted_mean_of_link_centres() {
        let m = RobotModel::default();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..20 {
            let mut r = row(0.0, rng.random_range(0.2..0.8), 0.0, 0.0);
            r.x = rng.random_range(-1.0..1.0);
            r.theta = rng.random_range(-3.0..3.0);
            for q in r.q.iter_mut() {
                *q = rng.random_range(-2.0..2.0);
            }
            let f = &replay(&m, std::slice::from_ref(&r))[0];
            // Trunk centre from the corner mean, link centres from endpoints.
            let tc = [0, 1].map(|i| f.trunk.iter().map(|p| p[i]).sum::<f64>() / 4.0);
            let (s, c) = r.theta.sin_cos();
            let trunk = [tc[0] + m.trunk_com[0] * c + m.trunk_com[1] * s, tc[1] - m.trunk_com[0] * s + m.trunk_com[1] * c];
            let mut parts = vec![(m.trunk_mass, trunk)];
            for leg in &f.legs {
                parts.push((m.hip.mass, leg.hip));
                parts.push((m.thigh.mass, [(leg.hip[0] + leg.knee[0]) / 2.0, (leg.hip[1] + leg.knee[1]) / 2.0]));
                parts.push((m.calf.mass, [(leg.knee[0] + leg.foot[0]) / 2.0, (leg.knee[1] + leg.foot[1]) / 2.0]));
            }
            let total: f64 = parts.iter().map(|(w, _)| w).sum();
            for i in 0..2 {
                let want = parts.iter().map(|(w, p)| w * p[i]).sum::<f64>() / total;
                assert!((f.com[i] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn replay_has_one_frame_per_row() {
        let rows = synthetic(3, 1.0);
        let mut csv = Vec::new();
        write_trajectory_csv(&mut csv, &rows).unwrap();
        let back = read_trajectory_csv(csv.as_slice()).unwrap();
        let frames = replay(&RobotModel::default(), &back);
        let mut out = Vec::new();
        write_replay_csv(&mut out, &back, &frames).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), rows.len() + 1);
        assert_eq!(text.lines().next().unwrap().split(',').count(), replay_header().len());
        assert_eq!(replay_header().len(), 1 + 8 + 12 + 2);
    }
}
