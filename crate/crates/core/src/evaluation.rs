//! Angular error metrics, estimate-to-truth association and report tables.

use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Direction;

/// Pairs further apart than this are not credited as detections.
pub const DEFAULT_GATE_DEG: f64 = 20.0;

/// Above this many items per side assignment switches from brute force to
/// the Hungarian method.
const EXHAUSTIVE_LIMIT: usize = 6;

/// How the `el_deg` column of truth and estimate files is interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElevationConvention {
    /// `el = 90° − inclination`.
    #[default]
    Elevation,
    /// The column holds the inclination itself.
    Inclination,
}

impl ElevationConvention {
    pub fn to_column(self, d: &Direction) -> f64 {
        match self {
            Self::Elevation => d.elevation(),
            Self::Inclination => d.inclination(),
        }
    }

    pub fn direction(self, az_deg: f64, column: f64) -> Result<Direction> {
        match self {
            Self::Elevation => Direction::from_elevation(az_deg, column),
            Self::Inclination => Direction::new(az_deg, column),
        }
    }
}

impl std::str::FromStr for ElevationConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "elevation" => Ok(Self::Elevation),
            "inclination" => Ok(Self::Inclination),
            other => Err(Error::param(format!("unknown elevation convention {other:?}"))),
        }
    }
}

/// Wrapped azimuth difference in `[0, 180]` degrees.
pub fn azimuth_error(a_deg: f64, b_deg: f64) -> f64 {
    let d = (a_deg - b_deg).abs().rem_euclid(360.0);
    d.min(360.0 - d)
}

/// Absolute elevation difference; identical for both conventions.
pub fn elevation_error(a: &Direction, b: &Direction) -> f64 {
    (a.inclination() - b.inclination()).abs()
}

/// Great-circle angle between two directions, in degrees.
///
/// Equal to `acos(clamp(u1·u2))`; the `atan2` form keeps full precision for
/// nearly coincident directions.
pub fn combined_error(a: &Direction, b: &Direction) -> f64 {
    a.angle_to(b)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthSource {
    pub source_id: usize,
    pub direction: Direction,
    pub onset_s: Option<f64>,
    pub offset_s: Option<f64>,
}

impl TruthSource {
    pub fn new(source_id: usize, direction: Direction) -> Self {
        Self {
            source_id,
            direction,
            onset_s: None,
            offset_s: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchedPair {
    pub source_id: usize,
    /// Index into the estimate list.
    pub estimate: usize,
    pub azimuth_error: f64,
    pub elevation_error: f64,
    pub combined_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub pairs: Vec<MatchedPair>,
    /// Source ids with no estimate within the gate.
    pub misses: Vec<usize>,
    /// Estimate indices left unassigned.
    pub false_alarms: Vec<usize>,
}

impl MetricsReport {
    pub fn truth_count(&self) -> usize {
        self.pairs.len() + self.misses.len()
    }
}

/// Minimum-cost assignment of rows to distinct columns (`rows ≤ cols`).
/// Returns the column assigned to each row.
fn assign(cost: &[Vec<f64>]) -> Vec<usize> {
    let rows = cost.len();
    let cols = cost.first().map_or(0, Vec::len);
    debug_assert!(rows <= cols);
    if rows == 0 {
        return Vec::new();
    }
    if cols <= EXHAUSTIVE_LIMIT {
        exhaustive_assignment(cost)
    } else {
        hungarian(cost)
    }
}

fn exhaustive_assignment(cost: &[Vec<f64>]) -> Vec<usize> {
    fn search(
        cost: &[Vec<f64>],
        row: usize,
        used: &mut Vec<bool>,
        current: &mut Vec<usize>,
        acc: f64,
        best: &mut (f64, Vec<usize>),
    ) {
        if row == cost.len() {
            if acc < best.0 {
                *best = (acc, current.clone());
            }
            return;
        }
        for c in 0..used.len() {
            if !used[c] {
                used[c] = true;
                current.push(c);
                search(cost, row + 1, used, current, acc + cost[row][c], best);
                current.pop();
                used[c] = false;
            }
        }
    }
    let mut best = (f64::INFINITY, Vec::new());
    let mut used = vec![false; cost[0].len()];
    search(cost, 0, &mut used, &mut Vec::new(), 0.0, &mut best);
    best.1
}

/// Shortest augmenting path with potentials, O(rows² · cols).
fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    let m = cost[0].len();
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![0; n];
    for j in 1..=m {
        if p[j] != 0 {
            out[p[j] - 1] = j - 1;
        }
    }
    out
}

/// Associates estimates with truths by minimizing the total combined error,
/// then drops pairs further apart than `gate_deg`.
pub fn match_sources(estimates: &[Direction], truth: &[TruthSource], gate_deg: f64) -> MetricsReport {
    let truth_rows = truth.len() <= estimates.len();
    let (rows, cols) = if truth_rows {
        (truth.len(), estimates.len())
    } else {
        (estimates.len(), truth.len())
    };
    let cost: Vec<Vec<f64>> = (0..rows)
        .map(|r| {
            (0..cols)
                .map(|c| {
                    let (t, e) = if truth_rows { (r, c) } else { (c, r) };
                    combined_error(&truth[t].direction, &estimates[e])
                })
                .collect()
        })
        .collect();
    let assignment = assign(&cost);
    let mut est_for_truth = vec![None; truth.len()];
    for (r, &c) in assignment.iter().enumerate() {
        let (t, e) = if truth_rows { (r, c) } else { (c, r) };
        if cost[r][c] <= gate_deg {
            est_for_truth[t] = Some(e);
        }
    }
    let mut used = vec![false; estimates.len()];
    let mut pairs = Vec::new();
    let mut misses = Vec::new();
    for (t, src) in truth.iter().enumerate() {
        match est_for_truth[t] {
            Some(e) => {
                used[e] = true;
                let est = &estimates[e];
                pairs.push(MatchedPair {
                    source_id: src.source_id,
                    estimate: e,
                    azimuth_error: azimuth_error(est.azimuth(), src.direction.azimuth()),
                    elevation_error: elevation_error(est, &src.direction),
                    combined_error: combined_error(est, &src.direction),
                });
            }
            None => misses.push(src.source_id),
        }
    }
    let false_alarms = (0..estimates.len()).filter(|&e| !used[e]).collect();
    MetricsReport {
        pairs,
        misses,
        false_alarms,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Averages {
    pub azimuth: f64,
    pub elevation: f64,
    pub combined: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    /// `None` when nothing was matched.
    pub averages: Option<Averages>,
    pub matched: usize,
    pub misses: usize,
    pub false_alarms: usize,
}

/// Unweighted means over all matched pairs; misses do not enter the means.
pub fn summarize<'a>(reports: impl IntoIterator<Item = &'a MetricsReport>) -> Summary {
    let mut sum = [0.0; 3];
    let (mut matched, mut misses, mut false_alarms) = (0, 0, 0);
    for r in reports {
        for p in &r.pairs {
            sum[0] += p.azimuth_error;
            sum[1] += p.elevation_error;
            sum[2] += p.combined_error;
        }
        matched += r.pairs.len();
        misses += r.misses.len();
        false_alarms += r.false_alarms.len();
    }
    let averages = (matched > 0).then(|| {
        let n = matched as f64;
        Averages {
            azimuth: sum[0] / n,
            elevation: sum[1] / n,
            combined: sum[2] / n,
        }
    });
    Summary {
        averages,
        matched,
        misses,
        false_alarms,
    }
}

/// Aligned text table with one row per truth source, misses rendered as
/// `---`, and an `Avg` row.
pub fn format_table(reports: &[(String, MetricsReport)]) -> String {
    let mut rows: Vec<[String; 5]> = vec![[
        "Recording".into(),
        "Source".into(),
        "Azimuth".into(),
        "Elevation".into(),
        "Combined".into(),
    ]];
    let dash = || "---".to_string();
    for (label, report) in reports {
        let mut ids: Vec<(usize, Option<&MatchedPair>)> = report
            .pairs
            .iter()
            .map(|p| (p.source_id, Some(p)))
            .chain(report.misses.iter().map(|&id| (id, None)))
            .collect();
        ids.sort_by_key(|(id, _)| *id);
        for (id, pair) in ids {
            rows.push(match pair {
                Some(p) => [
                    label.clone(),
                    id.to_string(),
                    format!("{:.1}", p.azimuth_error),
                    format!("{:.1}", p.elevation_error),
                    format!("{:.1}", p.combined_error),
                ],
                None => [label.clone(), id.to_string(), dash(), dash(), dash()],
            });
        }
    }
    let summary = summarize(reports.iter().map(|(_, r)| r));
    rows.push(match summary.averages {
        Some(a) => [
            "Avg".into(),
            String::new(),
            format!("{:.1}", a.azimuth),
            format!("{:.1}", a.elevation),
            format!("{:.1}", a.combined),
        ],
        None => ["Avg".into(), String::new(), dash(), dash(), dash()],
    });
    let widths: Vec<usize> = (0..5).map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for row in &rows {
        let line: Vec<String> = row
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(c, (cell, w))| if c < 2 { format!("{cell:<w$}") } else { format!("{cell:>w$}") })
            .collect();
        writeln!(out, "{}", line.join("  ").trim_end()).unwrap();
    }
    writeln!(
        out,
        "matched {}, missed {}, false alarms {}",
        summary.matched, summary.misses, summary.false_alarms
    )
    .unwrap();
    out
}

/// CSV with one row per truth source and per false alarm.
pub fn write_report_csv<W: Write>(out: W, reports: &[(String, MetricsReport)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["recording", "source_id", "az_err_deg", "el_err_deg", "combined_deg", "status"])?;
    for (label, r) in reports {
        for p in &r.pairs {
            w.write_record(&[
                label.clone(),
                p.source_id.to_string(),
                format!("{:.4}", p.azimuth_error),
                format!("{:.4}", p.elevation_error),
                format!("{:.4}", p.combined_error),
                "matched".into(),
            ])?;
        }
        for id in &r.misses {
            w.write_record(&[label.as_str(), &id.to_string(), "", "", "", "miss"])?;
        }
        for e in &r.false_alarms {
            w.write_record(&[label.as_str(), &format!("est{}", e + 1), "", "", "", "false_alarm"])?;
        }
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct TruthRecord {
    source_id: usize,
    az_deg: f64,
    el_deg: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    onset_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    offset_s: Option<f64>,
}

pub fn write_truth_csv<W: Write>(out: W, truth: &[TruthSource], convention: ElevationConvention) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["source_id", "az_deg", "el_deg", "onset_s", "offset_s"])?;
    let opt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
    for t in truth {
        w.write_record(&[
            t.source_id.to_string(),
            format!("{}", t.direction.azimuth()),
            format!("{}", convention.to_column(&t.direction)),
            opt(t.onset_s),
            opt(t.offset_s),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// Reads `source_id,az_deg,el_deg[,onset_s,offset_s]`.
pub fn read_truth_csv<R: Read>(input: R, convention: ElevationConvention) -> Result<Vec<TruthSource>> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(input);
    let mut out = Vec::new();
    for rec in r.deserialize::<TruthRecord>() {
        let rec = rec?;
        let direction = convention.direction(rec.az_deg, rec.el_deg).map_err(|e| Error::Parse {
            what: "truth CSV",
            message: e.to_string(),
        })?;
        out.push(TruthSource {
            source_id: rec.source_id,
            direction,
            onset_s: rec.onset_s,
            offset_s: rec.offset_s,
        });
    }
    Ok(out)
}

pub const ESTIMATES_FORMAT: &str = "# sspiv-estimates v1";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateRecord {
    pub rank: usize,
    pub az_deg: f64,
    pub el_deg: f64,
    pub peak_height: f64,
}

/// Estimates CSV: a format-version comment line, then
/// `rank,az_deg,el_deg,peak_height`.
pub fn write_estimates_csv<W: Write>(mut out: W, rows: &[EstimateRecord]) -> Result<()> {
    writeln!(out, "{ESTIMATES_FORMAT}").map_err(|e| Error::io("<csv>", e))?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["rank", "az_deg", "el_deg", "peak_height"])?;
    for r in rows {
        w.write_record(&[
            r.rank.to_string(),
            format!("{:.3}", r.az_deg),
            format!("{:.3}", r.el_deg),
            format!("{:.6e}", r.peak_height),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn read_estimates_csv<R: Read>(input: R) -> Result<Vec<EstimateRecord>> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(input);
    let mut rows = r.deserialize::<EstimateRecord>().collect::<std::result::Result<Vec<_>, _>>()?;
    rows.sort_by_key(|r| r.rank);
    Ok(rows)
}

pub fn read_truth_file(path: impl AsRef<Path>, convention: ElevationConvention) -> Result<Vec<TruthSource>> {
    let path = path.as_ref();
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_truth_csv(f, convention)
}

pub fn read_estimates_file(path: impl AsRef<Path>) -> Result<Vec<EstimateRecord>> {
    let path = path.as_ref();
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_estimates_csv(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dir(az: f64, incl: f64) -> Direction {
        Direction::new(az, incl).unwrap()
    }

    #[test]
    fn azimuth_wraps() {
        assert_eq!(azimuth_error(350.0, 10.0), 20.0);
        assert_eq!(azimuth_error(10.0, 350.0), 20.0);
        assert_eq!(azimuth_error(123.0, 123.0), 0.0);
        assert_eq!(azimuth_error(0.0, 180.0), 180.0);
        assert_eq!(azimuth_error(-90.0, 630.0), 0.0);
    }

    #[test]
    fn combined_basic() {
        assert_eq!(combined_error(&dir(30.0, 40.0), &dir(30.0, 40.0)), 0.0);
        assert!((combined_error(&dir(0.0, 90.0), &dir(90.0, 90.0)) - 90.0).abs() < 1e-12);
        assert!((combined_error(&dir(0.0, 0.0), &dir(0.0, 180.0)) - 180.0).abs() < 1e-12);
    }

    #[test]
    fn equator_combined_equals_azimuth() {
        for (a, b) in [(0.0, 17.5), (350.0, 5.0), (100.0, 260.0)] {
            let c = combined_error(&dir(a, 90.0), &dir(b, 90.0));
            assert!((c - azimuth_error(a, b)).abs() < 1e-9);
        }
    }

    fn truths(dirs: &[Direction]) -> Vec<TruthSource> {
        dirs.iter()
            .enumerate()
            .map(|(i, d)| TruthSource::new(i + 1, *d))
            .collect()
    }

    #[test]
    fn permuted_estimates_match_exactly() {
        let t = [dir(10.0, 80.0), dir(100.0, 60.0), dir(200.0, 100.0), dir(300.0, 120.0)];
        let est = [t[2], t[0], t[3], t[1]];
        let r = match_sources(&est, &truths(&t), DEFAULT_GATE_DEG);
        assert_eq!(r.pairs.len(), 4);
        assert!(r.misses.is_empty() && r.false_alarms.is_empty());
        assert!(r.pairs.iter().all(|p| p.combined_error < 1e-6));
        assert_eq!(r.pairs[0].estimate, 1);
    }

    #[test]
    fn one_estimate_two_truths() {
        let t = [dir(30.0, 85.0), dir(140.0, 95.0)];
        let r = match_sources(&[dir(33.0, 87.0)], &truths(&t), DEFAULT_GATE_DEG);
        assert_eq!(r.pairs.len(), 1);
        assert_eq!(r.pairs[0].source_id, 1);
        assert_eq!(r.misses, vec![2]);
        assert_eq!(r.truth_count(), 2);
    }

    #[test]
    fn gate_turns_pairs_into_miss_and_false_alarm() {
        let r = match_sources(&[dir(60.0, 90.0)], &truths(&[dir(30.0, 90.0)]), DEFAULT_GATE_DEG);
        assert!(r.pairs.is_empty());
        assert_eq!(r.misses, vec![1]);
        assert_eq!(r.false_alarms, vec![0]);
    }

    #[test]
    fn optimal_beats_greedy_on_near_swap() {
        // Greedy takes the closest pair (e0,t0) at 1° and is left with
        // (e1,t1) at 19°; pairing crosswise costs 7° + 11°.
        let t = [dir(0.0, 90.0), dir(12.0, 90.0)];
        let est = [dir(1.0, 90.0), dir(-7.0, 90.0)];
        let cost: Vec<Vec<f64>> = t
            .iter()
            .map(|a| est.iter().map(|b| combined_error(a, b)).collect())
            .collect();
        let greedy = cost[0][0] + cost[1][1];
        let r = match_sources(&est, &truths(&t), 90.0);
        let total: f64 = r.pairs.iter().map(|p| p.combined_error).sum();
        assert!((total - 18.0).abs() < 1e-9, "{total}");
        assert!(greedy > total);
        let brute = (cost[0][0] + cost[1][1]).min(cost[0][1] + cost[1][0]);
        assert!((brute - total).abs() < 1e-9);
    }

    #[test]
    fn hungarian_agrees_with_exhaustive_on_large_case() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let rows = rng.random_range(1..=5);
            let cols = rng.random_range(rows..=7);
            let cost: Vec<Vec<f64>> = (0..rows)
                .map(|_| (0..cols).map(|_| rng.random_range(0.0..100.0)).collect())
                .collect();
            let total = |a: &[usize]| a.iter().enumerate().map(|(r, &c)| cost[r][c]).sum::<f64>();
            let h = hungarian(&cost);
            let e = exhaustive_assignment(&cost);
            assert!((total(&h) - total(&e)).abs() < 1e-9);
        }
    }

    #[test]
    fn many_sources_use_hungarian() {
        let t: Vec<Direction> = (0..9).map(|i| dir(i as f64 * 40.0, 90.0)).collect();
        let est: Vec<Direction> = t.iter().rev().map(|d| dir(d.azimuth() + 3.0, 88.0)).collect();
        let r = match_sources(&est, &truths(&t), DEFAULT_GATE_DEG);
        assert_eq!(r.pairs.len(), 9);
        assert!(r.pairs.iter().all(|p| p.combined_error < 4.0));
    }

    #[test]
    fn summary_edge_cases() {
        let single = match_sources(&[dir(12.0, 90.0)], &truths(&[dir(10.0, 90.0)]), DEFAULT_GATE_DEG);
        let s = summarize([&single]);
        let a = s.averages.unwrap();
        assert!((a.combined - single.pairs[0].combined_error).abs() < 1e-12);
        let all_miss = match_sources(&[], &truths(&[dir(0.0, 90.0), dir(90.0, 90.0)]), DEFAULT_GATE_DEG);
        let s = summarize([&all_miss]);
        assert_eq!(s.averages, None);
        assert_eq!(s.misses, 2);
    }

    #[test]
    fn table_renders_misses() {
        let t = truths(&[dir(30.0, 85.0), dir(140.0, 95.0)]);
        let r = match_sources(&[dir(33.0, 85.0)], &t, DEFAULT_GATE_DEG);
        let text = format_table(&[("1".into(), r)]);
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("Recording"));
        assert!(lines[1].ends_with("3.0"));
        assert!(lines[2].ends_with("---"));
        assert!(lines[3].starts_with("Avg"));
        assert!(lines[4].contains("missed 1"));
    }

    #[test]
    fn truth_csv_round_trip_both_conventions() {
        let t = vec![TruthSource {
            source_id: 3,
            direction: dir(45.0, 60.0),
            onset_s: Some(0.5),
            offset_s: Some(2.0),
        }];
        for conv in [ElevationConvention::Elevation, ElevationConvention::Inclination] {
            let mut buf = Vec::new();
            write_truth_csv(&mut buf, &t, conv).unwrap();
            let back = read_truth_csv(buf.as_slice(), conv).unwrap();
            assert_eq!(back.len(), 1);
            assert!(back[0].direction.angle_to(&t[0].direction) < 1e-9);
            assert_eq!(back[0].onset_s, Some(0.5));
        }
        let text = "source_id,az_deg,el_deg\n1,10,30\n";
        let back = read_truth_csv(text.as_bytes(), ElevationConvention::Elevation).unwrap();
        assert!((back[0].direction.inclination() - 60.0).abs() < 1e-12);
        assert_eq!(back[0].onset_s, None);
    }

    #[test]
    fn malformed_csv_is_an_error() {
        assert!(read_truth_csv("source_id,az_deg\n1,x\n".as_bytes(), ElevationConvention::Elevation).is_err());
        assert!(read_truth_csv("source_id,az_deg,el_deg\n1,0,120\n".as_bytes(), ElevationConvention::Elevation).is_err());
        assert!(read_estimates_csv("rank,az\n1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn estimates_csv_is_versioned() {
        let rows = [EstimateRecord {
            rank: 1,
            az_deg: 31.0,
            el_deg: 5.0,
            peak_height: 2.5,
        }];
        let mut buf = Vec::new();
        write_estimates_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(ESTIMATES_FORMAT));
        assert_eq!(text.lines().nth(1), Some("rank,az_deg,el_deg,peak_height"));
        assert_eq!(read_estimates_csv(buf.as_slice()).unwrap(), rows);
    }

    fn arb_dir() -> impl Strategy<Value = Direction> {
        (0.0..360.0f64, -1.0..1.0f64).prop_map(|(az, z)| dir(az, z.acos().to_degrees()))
    }

    proptest! {
        #[test]
        fn combined_is_a_metric(a in arb_dir(), b in arb_dir(), c in arb_dir()) {
            let ab = combined_error(&a, &b);
            prop_assert!((ab - combined_error(&b, &a)).abs() < 1e-12);
            prop_assert!(combined_error(&a, &a) < 1e-6);
            prop_assert!(ab <= combined_error(&a, &c) + combined_error(&c, &b) + 1e-9);
        }

        #[test]
        fn assignment_is_optimal(
            t in prop::collection::vec(arb_dir(), 1..=5),
            e in prop::collection::vec(arb_dir(), 1..=5),
        ) {
            let r = match_sources(&e, &truths(&t), 180.0);
            let total: f64 = r.pairs.iter().map(|p| p.combined_error).sum();
            // brute force over every injection of the smaller side
            let (small, large) = if t.len() <= e.len() { (&t, &e) } else { (&e, &t) };
            let mut best = f64::INFINITY;
            let mut perm: Vec<usize> = (0..large.len()).collect();
            permute(&mut perm, 0, &mut |p| {
                let c: f64 = (0..small.len()).map(|i| combined_error(&small[i], &large[p[i]])).sum();
                best = best.min(c);
            });
            prop_assert!(total <= best + 1e-9);
            prop_assert_eq!(r.pairs.len(), t.len().min(e.len()));
        }
    }

    fn permute(v: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
        if k == v.len() {
            f(v);
            return;
        }
        for i in k..v.len() {
            v.swap(k, i);
            permute(v, k + 1, f);
            v.swap(k, i);
        }
    }
}
