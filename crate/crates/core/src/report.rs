//! Accuracy-vs-epoch SVG plots and run summary tables built from
//! `metrics.csv` files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::pipeline::{EpochMetrics, Hyperparams, TrainReport, METRICS_HEADER};

#[derive(Debug, Clone, PartialEq)]
pub struct Run {
    /// Directory of the run, relative to the searched root.
    pub name: String,
    pub epochs: Vec<EpochMetrics>,
    pub hyperparams: Option<Hyperparams>,
}

impl Run {
    /// Epoch with the highest pseudo-experimental accuracy (validation
    /// accuracy when absent); the first one wins ties.
    pub fn best_epoch(&self) -> Option<&EpochMetrics> {
        let score = |e: &EpochMetrics| e.pexp_acc.unwrap_or(e.val_acc);
        self.epochs
            .iter()
            .fold(None, |best: Option<&EpochMetrics>, e| match best {
                Some(b) if score(b) >= score(e) => Some(b),
                _ => Some(e),
            })
    }

    pub fn label(&self) -> String {
        match &self.hyperparams {
            Some(h) => format!("{} (lr {:.4}, mu {:.3}, batch {})", self.name, h.lr0, h.momentum, h.batch_size),
            None => self.name.clone(),
        }
    }
}

pub fn parse_metrics(text: &str, origin: &Path) -> Result<Vec<EpochMetrics>> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    if !header.starts_with(METRICS_HEADER) {
        return Err(Error::format(origin, "unexpected metrics header"));
    }
    let num = |s: &str| s.parse::<f64>().map_err(|e| Error::format(origin, e));
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() < 6 {
                return Err(Error::format(origin, format!("short row {l:?}")));
            }
            Ok(EpochMetrics {
                epoch: f[0].parse().map_err(|e| Error::format(origin, e))?,
                lr: num(f[1])?,
                train_loss: num(f[2])?,
                train_acc: num(f[3])?,
                val_acc: num(f[4])?,
                pexp_acc: if f[5].is_empty() { None } else { Some(num(f[5])?) },
            })
        })
        .collect()
}

fn find_metrics(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(dir, err)))
        .collect::<Result<_>>()?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            find_metrics(&p, out)?;
        } else if p.file_name().is_some_and(|n| n == "metrics.csv") {
            out.push(p);
        }
    }
    Ok(())
}

/// Every run below `root`, in path order.
pub fn collect_runs(root: &Path) -> Result<Vec<Run>> {
    let mut files = Vec::new();
    find_metrics(root, &mut files)?;
    files
        .into_iter()
        .map(|f| {
            let text = std::fs::read_to_string(&f).map_err(|e| Error::io(&f, e))?;
            let dir = f.parent().unwrap_or(root);
            let report = dir.join("report.json");
            let hyperparams = std::fs::read_to_string(&report)
                .ok()
                .and_then(|t| serde_json::from_str::<TrainReport>(&t).ok())
                .map(|r| r.hyperparams);
            let name = dir.strip_prefix(root).unwrap_or(dir).display().to_string();
            Ok(Run {
                name: if name.is_empty() { ".".into() } else { name },
                epochs: parse_metrics(&text, &f)?,
                hyperparams,
            })
        })
        .collect()
}

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

/// Validation (solid) and pseudo-experimental (dashed) accuracy curves of
/// all runs on one set of axes.
pub fn accuracy_svg(runs: &[Run]) -> String {
    let (w, h) = (720.0, 420.0 + 18.0 * runs.len() as f64);
    let (left, right, top, plot_h) = (60.0, 20.0, 20.0, 340.0);
    let plot_w = w - left - right;
    let max_epoch = runs
        .iter()
        .flat_map(|r| r.epochs.iter().map(|e| e.epoch))
        .max()
        .unwrap_or(0)
        .max(1) as f64;
    let x = |e: usize| left + plot_w * e as f64 / max_epoch;
    let y = |acc: f64| top + plot_h * (1.0 - acc.clamp(0.0, 1.0));

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    for k in 0..=10 {
        let acc = k as f64 / 10.0;
        let yy = y(acc);
        let _ = writeln!(
            s,
            r##"<line x1="{left}" y1="{yy:.1}" x2="{:.1}" y2="{yy:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">{acc:.1}</text>"##,
            left + plot_w,
            left - 6.0,
            yy + 4.0
        );
    }
    let step = ((max_epoch / 10.0).ceil() as usize).max(1);
    for e in (0..=max_epoch as usize).step_by(step) {
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{e}</text>"#,
            x(e),
            top + plot_h + 16.0
        );
    }
    let _ = writeln!(
        s,
        r#"<rect x="{left}" y="{top}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">epoch</text>"#,
        left + plot_w / 2.0,
        top + plot_h + 34.0
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{:.1}" text-anchor="middle" transform="rotate(-90 14 {:.1})">accuracy</text>"#,
        top + plot_h / 2.0,
        top + plot_h / 2.0
    );
    for (i, run) in runs.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts = |f: &dyn Fn(&EpochMetrics) -> Option<f64>| {
            run.epochs
                .iter()
                .filter_map(|e| f(e).map(|a| format!("{:.1},{:.1}", x(e.epoch), y(a))))
                .collect::<Vec<_>>()
                .join(" ")
        };
        let val = pts(&|e| Some(e.val_acc));
        let _ = writeln!(s, r#"<polyline points="{val}" fill="none" stroke="{color}" stroke-width="2"/>"#);
        let pexp = pts(&|e| e.pexp_acc);
        if !pexp.is_empty() {
            let _ = writeln!(
                s,
                r#"<polyline points="{pexp}" fill="none" stroke="{color}" stroke-width="2" stroke-dasharray="6 4"/>"#
            );
        }
        let ly = top + plot_h + 56.0 + 18.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{left}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            left + 30.0,
            left + 38.0,
            ly + 4.0,
            xml_escape(&run.label())
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="end">solid: validation, dashed: pseudo-experimental</text>"#,
        left + plot_w,
        top + 14.0
    );
    s.push_str("</svg>\n");
    s
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

const SUMMARY_COLUMNS: [&str; 9] = [
    "run",
    "learning_rate",
    "momentum",
    "batch_size",
    "epochs",
    "best_epoch",
    "best_exp_acc",
    "corr_acc",
    "final_val_acc",
];

fn summary_rows(runs: &[Run]) -> Vec<[String; 9]> {
    runs.iter()
        .map(|r| {
            let hp = r.hyperparams.as_ref();
            let best = r.best_epoch();
            let opt = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_default();
            [
                r.name.clone(),
                hp.map(|h| h.lr0.to_string()).unwrap_or_default(),
                hp.map(|h| h.momentum.to_string()).unwrap_or_default(),
                hp.map(|h| h.batch_size.to_string()).unwrap_or_default(),
                r.epochs.len().to_string(),
                best.map(|b| b.epoch.to_string()).unwrap_or_default(),
                opt(best.and_then(|b| b.pexp_acc)),
                opt(best.map(|b| b.val_acc)),
                opt(r.epochs.last().map(|e| e.val_acc)),
            ]
        })
        .collect()
}

pub fn summary_csv(runs: &[Run]) -> String {
    let mut s = SUMMARY_COLUMNS.join(",") + "\n";
    for row in summary_rows(runs) {
        s.push_str(&row.map(|c| c.replace(',', ";")).join(","));
        s.push('\n');
    }
    s
}

pub fn summary_markdown(runs: &[Run]) -> String {
    let mut s = format!("| {} |\n", SUMMARY_COLUMNS.join(" | "));
    s.push_str(&format!("|{}\n", "---|".repeat(SUMMARY_COLUMNS.len())));
    for row in summary_rows(runs) {
        s.push_str(&format!("| {} |\n", row.join(" | ")));
    }
    s
}

/// Writes `accuracy.svg`, `summary.csv` and `summary.md` into `out`.
pub fn write_report(runs: &[Run], out: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let files = [
        ("accuracy.svg", accuracy_svg(runs)),
        ("summary.csv", summary_csv(runs)),
        ("summary.md", summary_markdown(runs)),
    ];
    files
        .into_iter()
        .map(|(name, text)| {
            let p = out.join(name);
            std::fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
            Ok(p)
        })
        .collect()
}
