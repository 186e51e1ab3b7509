//! CSV and JSON artifact formats.
//!
//! RSS values are written with two decimals and coordinates with three, so the
//! files are stable across runs and platforms.

use std::fs::File;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::coarse::EmIteration;
use crate::env::RpPoint;
use crate::error::{Error, Result};
use crate::fine::FineIteration;
use crate::geometry::Point;
use crate::radiomap::{Provenance, RadioMap};
use crate::sim::{Query, RssSequence, RSS_FLOOR};

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::parse(path.display().to_string(), format!("{other:?}")),
    }
}

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    csv::Writer::from_path(path).map_err(|e| csv_err(path, e))
}

fn write_rows(path: &Path, header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush()?;
    Ok(())
}

/// Header and rows of a CSV file, as strings.
fn read_rows(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let header = r
        .headers()
        .map_err(|e| csv_err(path, e))?
        .iter()
        .map(str::to_owned)
        .collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        rows.push(rec.iter().map(str::to_owned).collect());
    }
    Ok((header, rows))
}

fn field<T: std::str::FromStr>(path: &Path, row: usize, s: &str) -> Result<T> {
    s.trim().parse().map_err(|_| {
        Error::parse(
            format!("{} row {}", path.display(), row + 1),
            format!("cannot parse {s:?}"),
        )
    })
}

fn expect_header(path: &Path, got: &[String], want: &[&str]) -> Result<()> {
    if got.len() < want.len() || got.iter().zip(want).any(|(a, b)| a != b) {
        return Err(Error::parse(
            path.display().to_string(),
            format!("expected columns starting with {want:?}, found {got:?}"),
        ));
    }
    Ok(())
}

fn f2(x: f64) -> String {
    format!("{x:.2}")
}

fn f3(x: f64) -> String {
    format!("{x:.3}")
}

fn ap_columns(dim: usize) -> impl Iterator<Item = String> {
    (1..=dim).map(|q| format!("ap_{q}"))
}

pub fn write_sequence(path: &Path, seq: &RssSequence) -> Result<()> {
    let header: Vec<String> = std::iter::once("t".to_string()).chain(ap_columns(seq.dim())).collect();
    let rows = seq.observations.iter().enumerate().map(|(t, y)| {
        std::iter::once(t.to_string()).chain(y.iter().map(|&v| f2(v))).collect()
    });
    write_rows(path, &header, rows)
}

pub fn read_sequence(path: &Path, user: usize) -> Result<RssSequence> {
    let (header, rows) = read_rows(path)?;
    expect_header(path, &header, &["t"])?;
    let dim = header.len() - 1;
    let mut observations = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        if row.len() != dim + 1 {
            return Err(Error::parse(format!("{} row {}", path.display(), i + 1), "wrong column count"));
        }
        observations.push(row[1..].iter().map(|s| field(path, i, s)).collect::<Result<Vec<f64>>>()?);
    }
    Ok(RssSequence {
        user,
        observations,
        floor: RSS_FLOOR,
    })
}

/// Ground-truth trajectory: `t,x,y,region`.
pub fn write_truth(path: &Path, points: &[Point], labels: &[usize]) -> Result<()> {
    let header = ["t", "x", "y", "region"].map(String::from);
    let rows = points
        .iter()
        .zip(labels)
        .enumerate()
        .map(|(t, (p, k))| vec![t.to_string(), f3(p.x), f3(p.y), k.to_string()]);
    write_rows(path, &header, rows)
}

pub fn read_truth(path: &Path) -> Result<(Vec<Point>, Vec<usize>)> {
    let (header, rows) = read_rows(path)?;
    expect_header(path, &header, &["t", "x", "y", "region"])?;
    let mut points = Vec::with_capacity(rows.len());
    let mut labels = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        points.push(Point::new(field(path, i, &row[1])?, field(path, i, &row[2])?));
        labels.push(field(path, i, &row[3])?);
    }
    Ok((points, labels))
}

/// Per-user region labels: `user,t,label` (users numbered from 1).
pub fn write_region_labels(path: &Path, labels: &[Vec<usize>]) -> Result<()> {
    let header = ["user", "t", "label"].map(String::from);
    let rows = labels.iter().enumerate().flat_map(|(m, l)| {
        l.iter()
            .enumerate()
            .map(move |(t, k)| vec![(m + 1).to_string(), t.to_string(), k.to_string()])
    });
    write_rows(path, &header, rows)
}

fn group_by_user<T>(path: &Path, rows: Vec<(usize, usize, T)>) -> Result<Vec<Vec<T>>> {
    let mut out: Vec<Vec<T>> = Vec::new();
    for (i, (user, t, v)) in rows.into_iter().enumerate() {
        if user == 0 {
            return Err(Error::parse(format!("{} row {}", path.display(), i + 1), "users are numbered from 1"));
        }
        if out.len() < user {
            out.resize_with(user, Vec::new);
        }
        if out[user - 1].len() != t {
            return Err(Error::parse(
                format!("{} row {}", path.display(), i + 1),
                format!("slot {t} of user {user} out of order"),
            ));
        }
        out[user - 1].push(v);
    }
    Ok(out)
}

pub fn read_region_labels(path: &Path) -> Result<Vec<Vec<usize>>> {
    let (header, rows) = read_rows(path)?;
    expect_header(path, &header, &["user", "t", "label"])?;
    let parsed = rows
        .iter()
        .enumerate()
        .map(|(i, r)| Ok((field(path, i, &r[0])?, field(path, i, &r[1])?, field(path, i, &r[2])?)))
        .collect::<Result<Vec<_>>>()?;
    group_by_user(path, parsed)
}

/// Inferred coordinates: `user,t,x,y`.
pub fn write_trajectories(path: &Path, trajectories: &[Vec<Point>]) -> Result<()> {
    let header = ["user", "t", "x", "y"].map(String::from);
    let rows = trajectories.iter().enumerate().flat_map(|(m, pts)| {
        pts.iter()
            .enumerate()
            .map(move |(t, p)| vec![(m + 1).to_string(), t.to_string(), f3(p.x), f3(p.y)])
    });
    write_rows(path, &header, rows)
}

pub fn read_trajectories(path: &Path) -> Result<Vec<Vec<Point>>> {
    let (header, rows) = read_rows(path)?;
    expect_header(path, &header, &["user", "t", "x", "y"])?;
    let parsed = rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let p = Point::new(field(path, i, &r[2])?, field(path, i, &r[3])?);
            Ok((field(path, i, &r[0])?, field(path, i, &r[1])?, p))
        })
        .collect::<Result<Vec<_>>>()?;
    group_by_user(path, parsed)
}

/// `rp_x,rp_y,region,ap_1..ap_D,provenance_1..provenance_D`.
pub fn write_radio_map(path: &Path, map: &RadioMap) -> Result<()> {
    let dim = map.dim();
    let header: Vec<String> = ["rp_x", "rp_y", "region"]
        .map(String::from)
        .into_iter()
        .chain(ap_columns(dim))
        .chain((1..=dim).map(|q| format!("provenance_{q}")))
        .collect();
    let rows = (0..map.len()).map(|i| {
        let rp = &map.points[i];
        [f3(rp.pos.x), f3(rp.pos.y), rp.region.to_string()]
            .into_iter()
            .chain(map.fingerprints[i].iter().map(|&v| f2(v)))
            .chain(map.provenance[i].iter().map(|p| p.as_str().to_string()))
            .collect()
    });
    write_rows(path, &header, rows)
}

/// Reads a map back. Support counts are not stored, so measured entries report one.
pub fn read_radio_map(path: &Path) -> Result<RadioMap> {
    let (header, rows) = read_rows(path)?;
    expect_header(path, &header, &["rp_x", "rp_y", "region"])?;
    if (header.len() - 3) % 2 != 0 {
        return Err(Error::parse(path.display().to_string(), "unpaired fingerprint and provenance columns"));
    }
    let dim = (header.len() - 3) / 2;
    let mut map = RadioMap {
        points: Vec::with_capacity(rows.len()),
        fingerprints: Vec::with_capacity(rows.len()),
        provenance: Vec::with_capacity(rows.len()),
        support: Vec::with_capacity(rows.len()),
    };
    for (i, row) in rows.iter().enumerate() {
        let pos = Point::new(field(path, i, &row[0])?, field(path, i, &row[1])?);
        map.points.push(RpPoint {
            pos,
            region: field(path, i, &row[2])?,
        });
        map.fingerprints.push(row[3..3 + dim].iter().map(|s| field(path, i, s)).collect::<Result<_>>()?);
        let prov: Vec<Provenance> = row[3 + dim..].iter().map(|s| field(path, i, s)).collect::<Result<_>>()?;
        map.support.push(usize::from(prov.contains(&Provenance::Measured)));
        map.provenance.push(prov);
    }
    Ok(map)
}

/// Held-out measurements: `x,y,region,ap_1..ap_D`.
pub fn write_queries(path: &Path, queries: &[Query]) -> Result<()> {
    let dim = queries.first().map_or(0, |q| q.rss.len());
    let header: Vec<String> = ["x", "y", "region"].map(String::from).into_iter().chain(ap_columns(dim)).collect();
    let rows = queries.iter().map(|q| {
        [f3(q.pos.x), f3(q.pos.y), q.region.to_string()]
            .into_iter()
            .chain(q.rss.iter().map(|&v| f2(v)))
            .collect()
    });
    write_rows(path, &header, rows)
}

pub fn read_queries(path: &Path) -> Result<Vec<Query>> {
    let (header, rows) = read_rows(path)?;
    expect_header(path, &header, &["x", "y", "region"])?;
    rows.iter()
        .enumerate()
        .map(|(i, r)| {
            Ok(Query {
                pos: Point::new(field(path, i, &r[0])?, field(path, i, &r[1])?),
                region: field(path, i, &r[2])?,
                rss: r[3..].iter().map(|s| field(path, i, s)).collect::<Result<_>>()?,
            })
        })
        .collect()
}

/// KNN estimates: `query,x,y`, with empty coordinates where localization failed.
pub fn write_estimates(path: &Path, estimates: &[Option<Point>]) -> Result<()> {
    let header = ["query", "x", "y"].map(String::from);
    let rows = estimates.iter().enumerate().map(|(i, e)| match e {
        Some(p) => vec![i.to_string(), f3(p.x), f3(p.y)],
        None => vec![i.to_string(), String::new(), String::new()],
    });
    write_rows(path, &header, rows)
}

pub fn read_estimates(path: &Path) -> Result<Vec<Option<Point>>> {
    let (header, rows) = read_rows(path)?;
    expect_header(path, &header, &["query", "x", "y"])?;
    rows.iter()
        .enumerate()
        .map(|(i, r)| {
            if r[1].is_empty() {
                Ok(None)
            } else {
                Ok(Some(Point::new(field(path, i, &r[1])?, field(path, i, &r[2])?)))
            }
        })
        .collect()
}

pub fn write_em_trace(path: &Path, trace: &[EmIteration]) -> Result<()> {
    let header = ["iteration", "objective", "relative_change", "verifier_loss"].map(String::from);
    let rows = trace.iter().map(|it| {
        vec![
            it.iteration.to_string(),
            format!("{:.6}", it.objective),
            format!("{:.6e}", it.relative_change),
            it.verifier_loss.map(|l| format!("{l:.6}")).unwrap_or_default(),
        ]
    });
    write_rows(path, &header, rows)
}

pub fn write_fine_trace(path: &Path, trace: &[FineIteration]) -> Result<()> {
    let header = ["iteration", "objective", "displacement"].map(String::from);
    let rows = trace.iter().map(|it| {
        vec![
            it.iteration.to_string(),
            format!("{:.6}", it.objective),
            format!("{:.6}", it.displacement),
        ]
    });
    write_rows(path, &header, rows)
}

/// `error_m,fraction`.
pub fn write_cdf(path: &Path, cdf: &[(f64, f64)]) -> Result<()> {
    let header = ["error_m", "fraction"].map(String::from);
    write_rows(path, &header, cdf.iter().map(|&(e, f)| vec![f3(e), format!("{f:.6}")]))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    std::fs::write(path, s)?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let s = std::fs::read_to_string(path)?;
    serde_json::from_str(&s).map_err(|e| Error::parse(path.display().to_string(), e.to_string()))
}
