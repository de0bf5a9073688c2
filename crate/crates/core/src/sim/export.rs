use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use super::{SpringNetwork, Trajectory, TrajectoryFrame, Vec2};
use crate::error::{Error, Result};

/// A trajectory read back from disk, enough to draw it.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryFile {
    pub springs: Vec<(usize, usize)>,
    /// `(semi_major, semi_minor)` of the object, if one was simulated.
    pub ellipse_axes: Option<(f64, f64)>,
    pub frames: Vec<TrajectoryFrame>,
}

impl TrajectoryFile {
    pub fn num_nodes(&self) -> usize {
        self.frames.first().map_or(0, |f| f.positions.len())
    }
}

/// Path of the object's companion file next to a node trajectory.
pub fn ellipse_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("trajectory");
    path.with_file_name(format!("{stem}_ellipse.csv"))
}

/// Writes `step,node_id,x,y` rows, with `header` lines, the spring list and the
/// object axes as `#` comments. When the trajectory carries an object its
/// pose goes to `<stem>_ellipse.csv`.
pub fn write_trajectory_csv(
    path: &Path,
    traj: &Trajectory,
    net: &SpringNetwork,
    ellipse_axes: Option<(f64, f64)>,
    header: &[String],
) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_comments(&mut out, header)?;
    let springs: Vec<String> = net.springs.iter().map(|s| format!("{}-{}", s.i, s.j)).collect();
    writeln!(out, "# springs: {}", springs.join(" "))?;
    if let Some((a, b)) = ellipse_axes {
        writeln!(out, "# ellipse_axes: {a} {b}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["step", "node_id", "x", "y"])?;
    for f in &traj.frames {
        for (k, p) in f.positions.iter().enumerate() {
            w.write_record([f.step.to_string(), k.to_string(), p[0].to_string(), p[1].to_string()])?;
        }
    }
    w.flush()?;

    if traj.frames.iter().any(|f| f.ellipse.is_some()) {
        let mut out = BufWriter::new(File::create(ellipse_path(path))?);
        write_comments(&mut out, header)?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["step", "ellipse_x", "ellipse_y", "ellipse_angle"])?;
        for f in &traj.frames {
            if let Some((c, a)) = f.ellipse {
                w.write_record([f.step.to_string(), c[0].to_string(), c[1].to_string(), a.to_string()])?;
            }
        }
        w.flush()?;
    }
    Ok(())
}

pub(crate) fn write_comments(out: &mut impl Write, lines: &[String]) -> Result<()> {
    for l in lines {
        for part in l.lines() {
            writeln!(out, "# {part}")?;
        }
    }
    Ok(())
}

fn malformed(path: &Path, message: impl Into<String>) -> Error {
    Error::Malformed { path: path.to_path_buf(), message: message.into() }
}

fn parse_comments(path: &Path) -> Result<(Vec<(usize, usize)>, Option<(f64, f64)>)> {
    let mut springs = Vec::new();
    let mut axes = None;
    for line in BufReader::new(File::open(path)?).lines() {
        let line = line?;
        let Some(body) = line.strip_prefix('#') else { break };
        let body = body.trim();
        if let Some(list) = body.strip_prefix("springs:") {
            for tok in list.split_whitespace() {
                let (a, b) = tok.split_once('-').ok_or_else(|| malformed(path, format!("bad spring '{tok}'")))?;
                let parse = |s: &str| s.parse::<usize>().map_err(|_| malformed(path, format!("bad spring '{tok}'")));
                springs.push((parse(a)?, parse(b)?));
            }
        } else if let Some(ax) = body.strip_prefix("ellipse_axes:") {
            let v: Vec<f64> = ax.split_whitespace().filter_map(|t| t.parse().ok()).collect();
            if v.len() != 2 {
                return Err(malformed(path, "bad ellipse_axes line"));
            }
            axes = Some((v[0], v[1]));
        }
    }
    Ok((springs, axes))
}

fn reader(path: &Path) -> Result<csv::Reader<File>> {
    Ok(csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path)?)
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, path: &Path, row: usize) -> Result<T> {
    rec.get(i)
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| malformed(path, format!("row {row}: column {i} missing or not a number")))
}

/// Reads a file produced by [`write_trajectory_csv`], validating that every
/// frame lists the same nodes `0..n` in order.
pub fn read_trajectory_csv(path: &Path) -> Result<TrajectoryFile> {
    let (springs, ellipse_axes) = parse_comments(path)?;
    let mut frames: Vec<TrajectoryFrame> = Vec::new();
    for (row, rec) in reader(path)?.records().enumerate() {
        let rec = rec?;
        let step: usize = field(&rec, 0, path, row)?;
        let node: usize = field(&rec, 1, path, row)?;
        let p: Vec2 = [field(&rec, 2, path, row)?, field(&rec, 3, path, row)?];
        match frames.last_mut() {
            Some(f) if f.step == step => {
                if node != f.positions.len() {
                    return Err(malformed(path, format!("row {row}: node {node} out of order")));
                }
                f.positions.push(p);
            }
            last => {
                if last.is_some_and(|f| f.step >= step) {
                    return Err(malformed(path, format!("row {row}: steps must increase")));
                }
                if node != 0 {
                    return Err(malformed(path, format!("row {row}: frame must start at node 0")));
                }
                frames.push(TrajectoryFrame { step, positions: vec![p], ellipse: None });
            }
        }
    }
    let Some(first) = frames.first() else {
        return Err(malformed(path, "no frames"));
    };
    let n = first.positions.len();
    if let Some(f) = frames.iter().find(|f| f.positions.len() != n) {
        return Err(malformed(path, format!("step {} has {} nodes, expected {n}", f.step, f.positions.len())));
    }
    if let Some(&(i, j)) = springs.iter().find(|&&(i, j)| i >= n || j >= n) {
        return Err(malformed(path, format!("spring {i}-{j} references a missing node")));
    }

    let epath = ellipse_path(path);
    if epath.exists() {
        for (row, rec) in reader(&epath)?.records().enumerate() {
            let rec = rec?;
            let step: usize = field(&rec, 0, &epath, row)?;
            let pose = ([field(&rec, 1, &epath, row)?, field(&rec, 2, &epath, row)?], field(&rec, 3, &epath, row)?);
            let f = frames
                .iter_mut()
                .find(|f| f.step == step)
                .ok_or_else(|| malformed(&epath, format!("row {row}: step {step} has no node frame")))?;
            f.ellipse = Some(pose);
        }
    }
    Ok(TrajectoryFile { springs, ellipse_axes, frames })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{Node, Spring};

    fn sample() -> (SpringNetwork, Trajectory) {
        let net = SpringNetwork {
            nodes: vec![
                Node { position: [0.0, 0.0], mass: 1.0, pinned: false },
                Node { position: [1.0, 0.0], mass: 1.0, pinned: false },
            ],
            springs: vec![Spring { i: 0, j: 1, rest_length: 1.0, stiffness: 1.0, damping: 0.0, actuated: false }],
        };
        let frames = (0..3)
            .map(|k| TrajectoryFrame {
                step: 5 * k,
                positions: vec![[k as f64, 0.5], [k as f64 + 1.0, 0.25]],
                ellipse: Some(([0.1 * k as f64, 2.0], 0.3)),
            })
            .collect();
        (net, Trajectory { stride: 5, frames })
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("traj.csv");
        let (net, traj) = sample();
        write_trajectory_csv(&p, &traj, &net, Some((0.6, 0.35)), &["seed = 3".to_string()]).unwrap();
        let back = read_trajectory_csv(&p).unwrap();
        assert_eq!(back.springs, vec![(0, 1)]);
        assert_eq!(back.ellipse_axes, Some((0.6, 0.35)));
        assert_eq!(back.frames, traj.frames);
    }

    #[test]
    fn inconsistent_node_counts_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        std::fs::write(&p, "step,node_id,x,y\n0,0,0,0\n0,1,1,0\n1,0,0,0\n").unwrap();
        assert!(matches!(read_trajectory_csv(&p), Err(Error::Malformed { .. })));
    }
}
