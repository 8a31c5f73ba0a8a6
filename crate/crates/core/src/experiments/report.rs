use super::runner::{Method, TrialRecord};
use crate::error::{Error, Result};
use std::io::{BufRead, Write};

pub const TRIALS_HEADER: &str =
    "trial,seed,method,K,Bcs_hz,isnr_db,sep_tau0,success,rrms_tde,rrms_sr,rsnr_db,wall_ms";
pub const SUMMARY_HEADER: &str = "method,K,Bcs_hz,isnr_db,sep_tau0,trials,success_prob,mean_rrms_tde,median_rrms_sr,mean_rrms_sr,mean_rrms_sr_inliers,outliers,mean_rsnr_db,pooled_rsnr_db";

/// One row of the per-trial CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialRow {
    pub trial: usize,
    pub seed: u64,
    pub method: Method,
    pub k: usize,
    pub cs_bandwidth_hz: f64,
    pub isnr_db: f64,
    pub sep_tau0: f64,
    pub success: bool,
    pub rrms_tde: f64,
    pub rrms_sr: f64,
    pub rsnr_db: f64,
    pub wall_ms: f64,
}

impl From<&TrialRecord> for TrialRow {
    fn from(r: &TrialRecord) -> Self {
        Self {
            trial: r.trial,
            seed: r.seed,
            method: r.method,
            k: r.k,
            cs_bandwidth_hz: r.cs_bandwidth_hz,
            isnr_db: r.isnr_db,
            sep_tau0: r.sep_tau0,
            success: r.success,
            rrms_tde: r.rrms_tde,
            rrms_sr: r.rrms_sr,
            rsnr_db: r.rsnr_db(),
            wall_ms: r.wall_ms,
        }
    }
}

fn fmt_f(x: f64) -> String {
    if x == f64::INFINITY {
        "inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{x}")
    }
}

fn parse_f(s: &str, line: usize) -> Result<f64> {
    match s {
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        _ => s.parse().map_err(|_| Error::Parse {
            line,
            msg: format!("bad number {s:?}"),
        }),
    }
}

pub fn write_trials_csv<W: Write>(rows: &[TrialRow], mut out: W) -> Result<()> {
    writeln!(out, "{TRIALS_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.trial,
            r.seed,
            r.method,
            r.k,
            fmt_f(r.cs_bandwidth_hz),
            fmt_f(r.isnr_db),
            fmt_f(r.sep_tau0),
            r.success as u8,
            fmt_f(r.rrms_tde),
            fmt_f(r.rrms_sr),
            fmt_f(r.rsnr_db),
            fmt_f(r.wall_ms),
        )?;
    }
    Ok(())
}

pub fn read_trials_csv<R: BufRead>(input: R) -> Result<Vec<TrialRow>> {
    let mut rows = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let n = i + 1;
        if i == 0 {
            if line.trim() != TRIALS_HEADER {
                return Err(Error::Parse {
                    line: n,
                    msg: "unexpected header".into(),
                });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 12 {
            return Err(Error::Parse {
                line: n,
                msg: format!("{} fields, expected 12", f.len()),
            });
        }
        let int = |s: &str| {
            s.parse::<u64>().map_err(|_| Error::Parse {
                line: n,
                msg: format!("bad integer {s:?}"),
            })
        };
        rows.push(TrialRow {
            trial: int(f[0])? as usize,
            seed: int(f[1])?,
            method: f[2].parse().map_err(|_| Error::Parse {
                line: n,
                msg: format!("bad method {:?}", f[2]),
            })?,
            k: int(f[3])? as usize,
            cs_bandwidth_hz: parse_f(f[4], n)?,
            isnr_db: parse_f(f[5], n)?,
            sep_tau0: parse_f(f[6], n)?,
            success: match f[7] {
                "1" => true,
                "0" => false,
                s => {
                    return Err(Error::Parse {
                        line: n,
                        msg: format!("bad flag {s:?}"),
                    })
                }
            },
            rrms_tde: parse_f(f[8], n)?,
            rrms_sr: parse_f(f[9], n)?,
            rsnr_db: parse_f(f[10], n)?,
            wall_ms: parse_f(f[11], n)?,
        });
    }
    Ok(rows)
}

/// Aggregates of one (method, cell).
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub method: Method,
    pub k: usize,
    pub cs_bandwidth_hz: f64,
    pub isnr_db: f64,
    pub sep_tau0: f64,
    pub trials: usize,
    pub success_prob: f64,
    /// Over successful trials only; NaN when none succeeded.
    pub mean_rrms_tde: f64,
    pub median_rrms_sr: f64,
    pub mean_rrms_sr: f64,
    /// Mean over trials with RRMS-SR ≤ 1.
    pub mean_rrms_sr_inliers: f64,
    /// Trials with RRMS-SR > 1.
    pub outliers: usize,
    /// Mean of per-trial RSNR in dB.
    pub mean_rsnr_db: f64,
    /// 10·log10(1 / mean(RRMS-SR²)).
    pub pooled_rsnr_db: f64,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

fn median(mut xs: Vec<f64>) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Groups rows by (method, K, B_cs, ISNR, separation) in first-seen order.
pub fn summarize(rows: &[TrialRow]) -> Vec<SummaryRow> {
    let key = |r: &TrialRow| {
        (
            r.method,
            r.k,
            r.cs_bandwidth_hz.to_bits(),
            r.isnr_db.to_bits(),
            r.sep_tau0.to_bits(),
        )
    };
    let mut keys = Vec::new();
    for r in rows {
        let k = key(r);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    let mut out = Vec::with_capacity(keys.len());
    for k in keys {
        let group: Vec<&TrialRow> = rows.iter().filter(|r| key(r) == k).collect();
        let first = group[0];
        let n = group.len();
        let sr: Vec<f64> = group.iter().map(|r| r.rrms_sr).collect();
        out.push(SummaryRow {
            method: first.method,
            k: first.k,
            cs_bandwidth_hz: first.cs_bandwidth_hz,
            isnr_db: first.isnr_db,
            sep_tau0: first.sep_tau0,
            trials: n,
            success_prob: group.iter().filter(|r| r.success).count() as f64 / n as f64,
            mean_rrms_tde: mean(group.iter().filter(|r| r.success).map(|r| r.rrms_tde)),
            median_rrms_sr: median(sr.clone()),
            mean_rrms_sr: mean(sr.iter().copied()),
            mean_rrms_sr_inliers: mean(sr.iter().copied().filter(|&x| x <= 1.0)),
            outliers: sr.iter().filter(|&&x| x > 1.0).count(),
            mean_rsnr_db: mean(group.iter().map(|r| r.rsnr_db)),
            pooled_rsnr_db: -10.0 * mean(sr.iter().map(|x| x * x)).log10(),
        });
    }
    out
}

pub fn write_summary_csv<W: Write>(rows: &[SummaryRow], mut out: W) -> Result<()> {
    writeln!(out, "{SUMMARY_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.method,
            r.k,
            fmt_f(r.cs_bandwidth_hz),
            fmt_f(r.isnr_db),
            fmt_f(r.sep_tau0),
            r.trials,
            fmt_f(r.success_prob),
            fmt_f(r.mean_rrms_tde),
            fmt_f(r.median_rrms_sr),
            fmt_f(r.mean_rrms_sr),
            fmt_f(r.mean_rrms_sr_inliers),
            r.outliers,
            fmt_f(r.mean_rsnr_db),
            fmt_f(r.pooled_rsnr_db),
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(trial: usize, method: Method, success: bool, tde: f64, sr: f64) -> TrialRow {
        TrialRow {
            trial,
            seed: 7,
            method,
            k: 3,
            cs_bandwidth_hz: 12.5e6,
            isnr_db: f64::INFINITY,
            sep_tau0: 3.0,
            success,
            rrms_tde: tde,
            rrms_sr: sr,
            rsnr_db: -20.0 * sr.log10(),
            wall_ms: 0.0,
        }
    }

    #[test]
    fn csv_round_trip() {
        let rows = vec![
            row(0, Method::Glsr1, true, 0.01, 0.02),
            row(1, Method::Omp2, false, f64::NAN, 1.0),
        ];
        let mut buf = Vec::new();
        write_trials_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(TRIALS_HEADER));
        assert!(text.contains(",inf,"));
        let back = read_trials_csv(buf.as_slice()).unwrap();
        assert_eq!(back[0], rows[0]);
        assert!(back[1].rrms_tde.is_nan() && !back[1].success && back[1].method == Method::Omp2);
    }

    #[test]
    fn bad_csv_rejected() {
        assert!(matches!(
            read_trials_csv("nope\n".as_bytes()),
            Err(Error::Parse { line: 1, .. })
        ));
        let text = format!("{TRIALS_HEADER}\n1,2,3\n");
        assert!(matches!(
            read_trials_csv(text.as_bytes()),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn aggregates() {
        let rows = vec![
            row(0, Method::Glsr1, true, 0.1, 0.1),
            row(1, Method::Glsr1, true, 0.3, 0.2),
            row(2, Method::Glsr1, false, f64::NAN, 2.0),
            row(3, Method::Glsr1, true, 0.2, 0.4),
        ];
        let s = summarize(&rows);
        assert_eq!(s.len(), 1);
        let s = &s[0];
        assert_eq!(s.trials, 4);
        assert_eq!(s.success_prob, 0.75);
        assert!((s.mean_rrms_tde - 0.2).abs() < 1e-15);
        assert!((s.median_rrms_sr - 0.3).abs() < 1e-15);
        assert!((s.mean_rrms_sr - 0.675).abs() < 1e-15);
        assert!((s.mean_rrms_sr_inliers - 0.7 / 3.0).abs() < 1e-15);
        assert_eq!(s.outliers, 1);
        let pooled = -10.0 * ((0.01 + 0.04 + 4.0 + 0.16) / 4.0f64).log10();
        assert!((s.pooled_rsnr_db - pooled).abs() < 1e-12);
    }

    #[test]
    fn groups_keep_first_seen_order() {
        let rows = vec![
            row(0, Method::Omp1, true, 0.0, 0.1),
            row(0, Method::Glsr1, true, 0.0, 0.1),
            row(1, Method::Omp1, true, 0.0, 0.1),
        ];
        let s = summarize(&rows);
        assert_eq!(
            s.iter().map(|r| (r.method, r.trials)).collect::<Vec<_>>(),
            vec![(Method::Omp1, 2), (Method::Glsr1, 1)]
        );
    }
}
