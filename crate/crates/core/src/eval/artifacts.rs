//! CSV and SVG outputs of an experiment.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::metrics::{
    average_confusion, binned_accuracy, covariate_bins, BinnedAccuracy, Covariate,
};
use super::{Experiment, Item, ModelKind, ModelRuns, Record, RunResult};
use crate::{Error, Label, Result};

/// Paths written by [`write_artifacts`].
#[derive(Debug, Clone, PartialEq)]
pub struct ArtifactSet {
    pub files: Vec<PathBuf>,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub const RESULTS_HEADER: &str =
    "model,run,item_id,true,pred,separation_arcsec,delta_mag,primary_mag";

/// One line per test prediction, run-major.
pub fn results_csv(items: &[Item], exp: &Experiment) -> String {
    let mut rows: Vec<(usize, usize, &RunResult, ModelKind)> = Vec::new();
    for (mi, m) in exp.models.iter().enumerate() {
        for r in &m.runs {
            rows.push((r.run, mi, r, m.kind));
        }
    }
    rows.sort_by_key(|&(run, mi, _, _)| (run, mi));
    let mut s = String::from(RESULTS_HEADER);
    s.push('\n');
    for (_, _, run, kind) in rows {
        for rec in &run.records {
            let it = &items[rec.item];
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                kind,
                run.run,
                rec.item,
                rec.truth,
                rec.pred,
                opt(it.separation_arcsec),
                opt(it.delta_mag),
                it.primary_mag
            );
        }
    }
    s
}

pub fn write_results_csv(path: &Path, items: &[Item], exp: &Experiment) -> Result<()> {
    write_file(path, &results_csv(items, exp))
}

fn parse_label(s: &str) -> Option<Label> {
    match s {
        "SINGLE" => Some(Label::Single),
        "CSO" => Some(Label::Cso),
        _ => None,
    }
}

/// Rebuilds the per-run predictions from a `results.csv`.
pub fn read_results_csv(path: &Path) -> Result<Experiment> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad =
        |line: usize, why: &str| Error::Config(format!("{}:{}: {why}", path.display(), line + 1));
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == RESULTS_HEADER => {}
        _ => return Err(bad(0, "unexpected header")),
    }
    let mut exp = Experiment { models: Vec::new() };
    for (ln, line) in lines {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 8 {
            return Err(bad(ln, "expected 8 fields"));
        }
        let kind: ModelKind = f[0].parse()?;
        let run: usize = f[1].parse().map_err(|_| bad(ln, "bad run"))?;
        let item: usize = f[2].parse().map_err(|_| bad(ln, "bad item_id"))?;
        let truth = parse_label(f[3]).ok_or_else(|| bad(ln, "bad true label"))?;
        let pred = parse_label(f[4]).ok_or_else(|| bad(ln, "bad predicted label"))?;
        let slot = match exp.models.iter().position(|m| m.kind == kind) {
            Some(i) => i,
            None => {
                exp.models.push(ModelRuns {
                    kind,
                    runs: Vec::new(),
                });
                exp.models.len() - 1
            }
        };
        let runs = &mut exp.models[slot].runs;
        if runs.last().map(|r| r.run) != Some(run) {
            runs.push(RunResult {
                run,
                records: Vec::new(),
            });
        }
        runs.last_mut()
            .expect("pushed")
            .records
            .push(Record { item, truth, pred });
    }
    Ok(exp)
}

fn bins_csv(curves: &[(ModelKind, BinnedAccuracy)]) -> String {
    let mut s = String::from("model,bin_lo,bin_hi,x_mean,acc_mean,acc_std,n,runs\n");
    for (kind, acc) in curves {
        for b in &acc.bins {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                kind,
                b.lo,
                b.hi,
                b.x_mean,
                opt(b.acc_mean),
                opt(b.acc_std),
                b.n,
                b.runs_present
            );
        }
    }
    s
}

fn confusion_csv(exp: &Experiment) -> String {
    let mut s = String::from("model,true,pred,mean_count,mean_rate,std_rate\n");
    for m in &exp.models {
        let c = average_confusion(&m.runs);
        for t in 0..2 {
            for p in 0..2 {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{}",
                    m.kind,
                    Label::from_index(t),
                    Label::from_index(p),
                    c.mean_counts[t][p],
                    c.mean_rates[t][p],
                    c.std_rates[t][p]
                );
            }
        }
    }
    s
}

fn summary_csv(exp: &Experiment) -> String {
    let mut s = String::from(
        "model,runs,acc_mean,acc_std,false_positive_rate,false_negative_rate,true_cso_rate\n",
    );
    for m in &exp.models {
        let (mean, std) = m.accuracy();
        let c = average_confusion(&m.runs);
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            m.kind,
            m.runs.len(),
            mean,
            std,
            c.false_positive_rate(),
            c.false_negative_rate(),
            c.true_cso_rate()
        );
    }
    s
}

fn color(kind: ModelKind) -> &'static str {
    match kind {
        ModelKind::Gp => "#1b9e77",
        ModelKind::LogReg => "#d95f02",
        ModelKind::Cnn => "#7570b3",
    }
}

/// Accuracy against bin mean, one polyline with error bars per model.
pub fn curves_svg(covariate: Covariate, curves: &[(ModelKind, BinnedAccuracy)]) -> String {
    const W: f64 = 640.0;
    const H: f64 = 420.0;
    const L: f64 = 64.0;
    const R: f64 = 24.0;
    const T: f64 = 36.0;
    const B: f64 = 56.0;

    let xs: Vec<f64> = curves
        .iter()
        .flat_map(|(_, a)| a.bins.iter().map(|b| b.x_mean))
        .collect();
    let (mut x0, mut x1) = xs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| {
            (a.min(x), b.max(x))
        });
    if !x0.is_finite() {
        (x0, x1) = (0.0, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    let px = |x: f64| L + (x - x0) / (x1 - x0) * (W - L - R);
    let py = |y: f64| H - B - y.clamp(0.0, 1.0) * (H - T - B);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="20" text-anchor="middle" font-size="14">accuracy vs {}</text>"#,
        W / 2.0,
        covariate.axis_label()
    );
    let _ = writeln!(
        s,
        r#"<path d="M{L:.1},{T:.1} V{:.1} H{:.1}" fill="none" stroke="black"/>"#,
        H - B,
        W - R
    );
    for i in 0..=5 {
        let f = i as f64 / 5.0;
        let (x, y) = (x0 + f * (x1 - x0), f);
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{:.2}</text>"#,
            px(x),
            H - B + 18.0,
            x
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{:.1}</text>"#,
            L - 6.0,
            py(y) + 4.0,
            y
        );
        let _ = writeln!(
            s,
            r##"<line x1="{L:.1}" x2="{:.1}" y1="{:.1}" y2="{:.1}" stroke="#dddddd"/>"##,
            W - R,
            py(y),
            py(y)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        (L + W - R) / 2.0,
        H - 14.0,
        covariate.axis_label()
    );
    let _ = writeln!(
        s,
        r#"<text transform="translate(16,{:.1}) rotate(-90)" text-anchor="middle">accuracy</text>"#,
        (T + H - B) / 2.0
    );

    for (k, (kind, acc)) in curves.iter().enumerate() {
        let c = color(*kind);
        let pts: Vec<(f64, f64, f64)> = acc
            .bins
            .iter()
            .filter_map(|b| Some((b.x_mean, b.acc_mean?, b.acc_std.unwrap_or(0.0))))
            .collect();
        let path: Vec<String> = pts
            .iter()
            .map(|&(x, y, _)| format!("{:.1},{:.1}", px(x), py(y)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{c}" stroke-width="2"/>"#,
            path.join(" ")
        );
        for &(x, y, e) in &pts {
            let _ = writeln!(
                s,
                r#"<line x1="{0:.1}" x2="{0:.1}" y1="{1:.1}" y2="{2:.1}" stroke="{c}"/><circle cx="{0:.1}" cy="{3:.1}" r="3" fill="{c}"/>"#,
                px(x),
                py(y - e),
                py(y + e),
                py(y)
            );
        }
        let ly = T + 8.0 + 16.0 * k as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{:.1}" x2="{:.1}" y1="{ly:.1}" y2="{ly:.1}" stroke="{c}" stroke-width="2"/><text x="{:.1}" y="{:.1}">{kind}</text>"#,
            W - R - 90.0,
            W - R - 70.0,
            W - R - 64.0,
            ly + 4.0
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Writes results, per-covariate bins and curves, confusion and summary
/// tables into `dir`.
pub fn write_artifacts(
    dir: &Path,
    items: &[Item],
    exp: &Experiment,
    n_bins: usize,
) -> Result<ArtifactSet> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    let mut put = |name: String, text: String| -> Result<()> {
        let p = dir.join(name);
        write_file(&p, &text)?;
        files.push(p);
        Ok(())
    };
    put("results.csv".into(), results_csv(items, exp))?;
    for cov in Covariate::ALL {
        let bins = covariate_bins(items, cov, n_bins)?;
        let curves: Vec<(ModelKind, BinnedAccuracy)> = exp
            .models
            .iter()
            .map(|m| (m.kind, binned_accuracy(&m.runs, &bins)))
            .collect();
        put(format!("bins_{}.csv", cov.name()), bins_csv(&curves))?;
        put(
            format!("curves_{}.svg", cov.name()),
            curves_svg(cov, &curves),
        )?;
    }
    put("confusion.csv".into(), confusion_csv(exp))?;
    put("summary.csv".into(), summary_csv(exp))?;
    Ok(ArtifactSet { files })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> (Vec<Item>, Experiment) {
        let items: Vec<Item> = (0..30)
            .map(|i| Item {
                pixels: Vec::new(),
                label: if i % 2 == 0 {
                    Label::Single
                } else {
                    Label::Cso
                },
                separation_arcsec: (i % 2 == 1).then_some(i as f64 * 0.5),
                delta_mag: (i % 2 == 1).then_some(i as f64 * 0.1 - 1.5),
                primary_mag: 12.0 + i as f64 * 0.1,
            })
            .collect();
        let run = |run, flip: usize| RunResult {
            run,
            records: (0..30)
                .filter(|i| i % 3 != run % 3)
                .map(|i| Record {
                    item: i,
                    truth: items[i].label,
                    pred: if i % flip == 0 {
                        Label::Cso
                    } else {
                        items[i].label
                    },
                })
                .collect(),
        };
        let exp = Experiment {
            models: vec![
                ModelRuns {
                    kind: ModelKind::Gp,
                    runs: vec![run(0, 4), run(1, 5)],
                },
                ModelRuns {
                    kind: ModelKind::LogReg,
                    runs: vec![run(0, 3), run(1, 7)],
                },
            ],
        };
        (items, exp)
    }

    #[test]
    fn results_round_trip() {
        let (items, exp) = toy();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("results.csv");
        write_results_csv(&p, &items, &exp).unwrap();
        assert_eq!(read_results_csv(&p).unwrap(), exp);
        let text = fs::read_to_string(&p).unwrap();
        assert!(text.lines().nth(1).unwrap().starts_with("gp,0,"));
        // singles carry empty CSO covariates
        assert!(text.contains(",SINGLE,CSO,,,") || text.contains(",SINGLE,SINGLE,,,"));
    }

    #[test]
    fn artifact_files() {
        let (items, exp) = toy();
        let dir = tempfile::tempdir().unwrap();
        let set = write_artifacts(dir.path(), &items, &exp, 3).unwrap();
        let names: Vec<String> = set
            .files
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect();
        for want in [
            "results.csv",
            "bins_separation.csv",
            "bins_delta_mag.csv",
            "bins_primary_mag.csv",
            "curves_separation.svg",
            "confusion.csv",
            "summary.csv",
        ] {
            assert!(names.iter().any(|n| n == want), "{want}");
        }
        let bins = fs::read_to_string(dir.path().join("bins_primary_mag.csv")).unwrap();
        assert_eq!(bins.lines().count(), 1 + 2 * 3);
        let conf = fs::read_to_string(dir.path().join("confusion.csv")).unwrap();
        assert_eq!(conf.lines().count(), 1 + 2 * 4);
        let svg = fs::read_to_string(dir.path().join("curves_delta_mag.svg")).unwrap();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn bad_results_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        fs::write(&p, format!("{RESULTS_HEADER}\ngp,0,1,CSO,MAYBE,,,12\n")).unwrap();
        assert!(read_results_csv(&p).is_err());
        fs::write(&p, "x,y\n").unwrap();
        assert!(read_results_csv(&p).is_err());
    }
}
