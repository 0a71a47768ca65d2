use crate::config::RunConfig;
use crate::manifest::{load_manifest, RunDir};
use anyhow::{bail, Context, Result};
use serde_json::Value;
use std::fmt::Write as _;
use std::path::Path;

pub fn run(config: &RunConfig, out: &Path) -> Result<()> {
    let Some(section) = &config.report else {
        bail!("config has no [report] section");
    };
    if section.runs.is_empty() {
        bail!("[report].runs lists no run directories");
    }
    let mut run = RunDir::create(out, "report", config.seed, config.resolved_text()?)?;

    let mut html = String::new();
    html.push_str(
        "<!DOCTYPE html><html><head><meta charset='utf-8'><title>Robustness report</title>\
         <style>body{font-family:sans-serif;max-width:1000px;margin:24px auto}\
         table{border-collapse:collapse;margin:12px 0}\
         td,th{border:1px solid #999;padding:4px 10px;text-align:right}\
         th{background:#eee}td:first-child,th:first-child{text-align:left}\
         h2{margin-top:32px}</style></head><body><h1>Robustness report</h1>",
    );

    // Attack runs aggregate into one white-box table with the
    // Clean Acc / FGSM / PGD columns.
    let mut attack_rows: Vec<(String, f64, Vec<(String, f64)>)> = Vec::new();

    for dir in &section.runs {
        let manifest = load_manifest(dir).with_context(|| {
            format!(
                "run directory {} has no readable manifest.json; expected a completed run with \
                 its artifacts (manifest.json plus the command's metric files)",
                dir.display()
            )
        })?;
        for output in &manifest.outputs {
            run.record_input(&dir.join(output))?;
        }
        match manifest.command.as_str() {
            "attack" => {
                let report: Value = read_json(&dir.join("attack-report.json"))?;
                let model = short_digest(report["model_digest"].as_str().unwrap_or("?"));
                let clean = report["clean_acc"].as_f64().unwrap_or(f64::NAN);
                let mut cells = Vec::new();
                for eval in report["evaluations"].as_array().into_iter().flatten() {
                    let method = eval["method"].as_str().unwrap_or("?");
                    let steps = eval["spec"]["steps"].as_u64().unwrap_or(0);
                    let label = match method {
                        "fgsm" => "FGSM".to_string(),
                        "pgd" => format!("PGD{steps}"),
                        other => format!("{} ({steps} steps)", other.to_uppercase()),
                    };
                    cells.push((label, eval["robust_acc"].as_f64().unwrap_or(f64::NAN)));
                }
                attack_rows.push((model, clean, cells));
            }
            "train" => {
                let summary: Value = read_json(&dir.join("summary.json"))?;
                let _ = write!(
                    html,
                    "<h2>Training: {}</h2><table><tr><th>Model</th><th>Clean Acc</th>\
                     <th>Robust Acc (PGD10)</th><th>Params</th></tr><tr><td>{}</td>\
                     <td>{}</td><td>{}</td><td>{}</td></tr></table>",
                    escape(&dir.display().to_string()),
                    short_digest(summary["model_digest"].as_str().unwrap_or("?")),
                    fmt_acc(summary["final_clean_acc"].as_f64()),
                    fmt_acc(summary["final_robust_acc"].as_f64()),
                    summary["param_count"].as_u64().unwrap_or(0),
                );
            }
            "curve" => embed_svg(&mut html, dir, "curve.svg", "Robustness curve")?,
            "corrupt" => embed_svg(&mut html, dir, "severity.svg", "Corruption severity curve")?,
            "transfer" => embed_svg(&mut html, dir, "transfer.svg", "Transfer matrix")?,
            "freq" => {
                let payload: Value = read_json(&dir.join("freq.json"))?;
                let _ = write!(
                    html,
                    "<h2>Frequency bias: {}</h2><table><tr><th>Model</th><th>f_bias</th>\
                     <th>N'</th><th>Clean Acc</th></tr><tr><td>{}</td><td>{}</td><td>{}</td>\
                     <td>{}</td></tr></table>",
                    escape(&dir.display().to_string()),
                    short_digest(payload["model_digest"].as_str().unwrap_or("?")),
                    fmt_acc(payload["report"]["f_bias"].as_f64()),
                    payload["report"]["n_prime"].as_u64().unwrap_or(0),
                    fmt_acc(payload["report"]["clean_accuracy"].as_f64()),
                );
                embed_svg(&mut html, dir, "acc_lpb.svg", "ACC-LPB curve")?;
            }
            "mce" => {
                let payload: Value = read_json(&dir.join("mce.json"))?;
                let report = &payload["report"];
                let _ = write!(
                    html,
                    "<h2>Corruption errors: {}</h2><table><tr><th>Kind</th><th>CE</th>\
                     <th>Baseline CE</th></tr>",
                    escape(&dir.display().to_string()),
                );
                if let Some(map) = report["per_corruption_ce"].as_object() {
                    for (kind, ce) in map {
                        let base = report["baseline_ce"][kind].as_f64();
                        let _ = write!(
                            html,
                            "<tr><td>{}</td><td>{}</td><td>{}</td></tr>",
                            escape(kind),
                            fmt_acc(ce.as_f64()),
                            fmt_acc(base),
                        );
                    }
                }
                let _ = write!(
                    html,
                    "<tr><th>mCE</th><th colspan='2'>{}</th></tr></table>",
                    fmt_acc(report["mce"].as_f64())
                );
            }
            "gen-data" => {
                let _ = write!(
                    html,
                    "<h2>Dataset: {}</h2><p>seed {}</p>",
                    escape(&dir.display().to_string()),
                    manifest.seed
                );
            }
            other => bail!("manifest in {} has unknown command '{other}'", dir.display()),
        }
    }

    if !attack_rows.is_empty() {
        let mut columns: Vec<String> = Vec::new();
        for (_, _, cells) in &attack_rows {
            for (label, _) in cells {
                if !columns.contains(label) {
                    columns.push(label.clone());
                }
            }
        }
        let mut table = String::from("<h2>White-box robustness</h2><table><tr><th>Model</th><th>Clean Acc</th>");
        for c in &columns {
            let _ = write!(table, "<th>{}</th>", escape(c));
        }
        table.push_str("</tr>");
        for (model, clean, cells) in &attack_rows {
            let _ = write!(table, "<tr><td>{}</td><td>{}</td>", escape(model), fmt_acc(Some(*clean)));
            for c in &columns {
                let value = cells.iter().find(|(l, _)| l == c).map(|(_, v)| *v);
                let _ = write!(table, "<td>{}</td>", fmt_acc(value));
            }
            table.push_str("</tr>");
        }
        table.push_str("</table>");
        // The white-box table leads the report.
        html = html.replacen(
            "<h1>Robustness report</h1>",
            &format!("<h1>Robustness report</h1>{table}"),
            1,
        );
    }

    html.push_str("</body></html>\n");
    run.write_artifact("report.html", html.as_bytes())?;
    run.finish()
}

fn read_json(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("expected artifact {} is missing", path.display()))?;
    Ok(serde_json::from_str(&text)?)
}

fn embed_svg(html: &mut String, dir: &Path, name: &str, title: &str) -> Result<()> {
    let path = dir.join(name);
    let svg = std::fs::read_to_string(&path)
        .with_context(|| format!("expected artifact {} is missing", path.display()))?;
    let _ = write!(
        html,
        "<h2>{}: {}</h2>{}",
        escape(title),
        escape(&dir.display().to_string()),
        svg
    );
    Ok(())
}

fn short_digest(digest: &str) -> String {
    digest.chars().take(12).collect()
}

fn fmt_acc(v: Option<f64>) -> String {
    match v {
        Some(v) if v.is_finite() => format!("{v:.4}"),
        _ => "-".to_string(),
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
