//! Terminal and HTML tables: one row per explained feature, contributing
//! features on a red ramp, offsetting features on a blue ramp, darker for
//! larger `|shap|`, the real value last.

use std::fmt::Write as _;

use aex_core::explainer::Contribution;
use aex_core::{Explanation64, FeatureExplanation};

/// Number of shades per polarity in the terminal palette.
pub const TERMINAL_LEVELS: usize = 8;

// xterm-256 indices, light to saturated
const RED_256: [u8; TERMINAL_LEVELS] = [224, 217, 210, 203, 196, 160, 124, 88];
const BLUE_256: [u8; TERMINAL_LEVELS] = [189, 153, 117, 111, 75, 33, 27, 19];

const RED_LIGHT: [u8; 3] = [255, 224, 224];
const RED_DARK: [u8; 3] = [178, 0, 0];
const BLUE_LIGHT: [u8; 3] = [224, 234, 255];
const BLUE_DARK: [u8; 3] = [0, 48, 178];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarity {
    Contributing,
    Offsetting,
}

/// Position of `|shap|` on the ramp, in [0, 1]: linear in `|shap|` relative
/// to the largest magnitude among the explained feature's displayed entries.
pub fn intensity(shap: f64, max_abs: f64) -> f64 {
    if max_abs > 0.0 {
        (shap.abs() / max_abs).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

pub fn rgb(polarity: Polarity, t: f64) -> [u8; 3] {
    let (light, dark) = match polarity {
        Polarity::Contributing => (RED_LIGHT, RED_DARK),
        Polarity::Offsetting => (BLUE_LIGHT, BLUE_DARK),
    };
    let mix = |a: u8, b: u8| (a as f64 + (b as f64 - a as f64) * t).round() as u8;
    [mix(light[0], dark[0]), mix(light[1], dark[1]), mix(light[2], dark[2])]
}

/// Nearest of the eight terminal shades.
pub fn terminal_level(t: f64) -> usize {
    ((t * (TERMINAL_LEVELS - 1) as f64).round() as usize).min(TERMINAL_LEVELS - 1)
}

pub fn terminal_color(polarity: Polarity, t: f64) -> u8 {
    let palette = match polarity {
        Polarity::Contributing => &RED_256,
        Polarity::Offsetting => &BLUE_256,
    };
    palette[terminal_level(t)]
}

pub struct RenderOptions<'a> {
    pub feature_names: &'a [String],
    /// Contributing and offsetting entries shown per explained feature.
    pub display_count: usize,
    /// ANSI colours in the terminal sink.
    pub color: bool,
    /// Free text placed under the HTML heading.
    pub stamp: Option<String>,
}

impl RenderOptions<'_> {
    fn name(&self, i: usize) -> String {
        self.feature_names
            .get(i)
            .cloned()
            .unwrap_or_else(|| format!("X{}", i + 1))
    }
}

struct Row<'a> {
    fe: &'a FeatureExplanation<f64>,
    contributing: &'a [Contribution<f64>],
    offsetting: &'a [Contribution<f64>],
    max_abs: f64,
}

fn rows<'a>(expl: &'a Explanation64, n: usize) -> Vec<Row<'a>> {
    expl.per_feature
        .iter()
        .map(|fe| {
            let contributing = &fe.contributing[..fe.contributing.len().min(n)];
            let offsetting = &fe.offsetting[..fe.offsetting.len().min(n)];
            let max_abs = contributing
                .iter()
                .chain(offsetting)
                .map(|c| c.shap.abs())
                .fold(0.0, f64::max);
            Row {
                fe,
                contributing,
                offsetting,
                max_abs,
            }
        })
        .collect()
}

fn cell(opts: &RenderOptions<'_>, c: &Contribution<f64>) -> String {
    format!("{}={:.4} ({:+.4})", opts.name(c.feature), c.true_value, c.shap)
}

fn title(expl: &Explanation64) -> String {
    match expl.instance {
        Some(i) => format!("Instance {i} (anomaly score {:.6})", expl.anomaly_score),
        None => format!("Instance (anomaly score {:.6})", expl.anomaly_score),
    }
}

fn header(n: usize) -> Vec<String> {
    let mut h = vec!["Feature".to_string(), "Predicted".to_string()];
    h.extend((1..=n).map(|i| format!("Contributing {i}")));
    h.extend((1..=n).map(|i| format!("Offsetting {i}")));
    h.push("Real value".to_string());
    h
}

/// Plain-text table; with `color` each entry is painted on the 256-colour
/// background of its shade.
pub fn render_terminal(expl: &Explanation64, opts: &RenderOptions<'_>) -> String {
    let n = opts.display_count;
    let rows = rows(expl, n);
    let mut table: Vec<Vec<(String, Option<u8>)>> = vec![header(n).into_iter().map(|h| (h, None)).collect()];
    for r in &rows {
        let mut line = vec![
            (opts.name(r.fe.explained_feature), None),
            (format!("{:.4}", r.fe.predicted_value), None),
        ];
        for (entries, polarity) in [
            (r.contributing, Polarity::Contributing),
            (r.offsetting, Polarity::Offsetting),
        ] {
            for k in 0..n {
                line.push(match entries.get(k) {
                    Some(c) => (
                        cell(opts, c),
                        Some(terminal_color(polarity, intensity(c.shap, r.max_abs))),
                    ),
                    None => (String::new(), None),
                });
            }
        }
        line.push((format!("{:.4}", r.fe.true_value), None));
        table.push(line);
    }
    let widths: Vec<usize> = (0..table[0].len())
        .map(|j| table.iter().map(|l| l[j].0.chars().count()).max().unwrap_or(0))
        .collect();

    let mut out = String::new();
    let _ = writeln!(out, "{}", title(expl));
    for line in &table {
        let cells: Vec<String> = line
            .iter()
            .zip(&widths)
            .map(|((text, color), &w)| {
                let padded = format!("{text:<w$}");
                match color {
                    Some(c) if opts.color => {
                        // dark shades get white text
                        let fg = if terminal_level_of(*c) >= TERMINAL_LEVELS / 2 {
                            15
                        } else {
                            16
                        };
                        format!("\x1b[38;5;{fg};48;5;{c}m{padded}\x1b[0m")
                    }
                    _ => padded,
                }
            })
            .collect();
        let _ = writeln!(out, "{}", cells.join(" | ").trim_end());
    }
    out
}

fn terminal_level_of(color: u8) -> usize {
    RED_256
        .iter()
        .position(|&c| c == color)
        .or_else(|| BLUE_256.iter().position(|&c| c == color))
        .unwrap_or(0)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Self-contained HTML page with inline styles, byte-stable for identical
/// inputs.
pub fn render_html(explanations: &[Explanation64], opts: &RenderOptions<'_>) -> String {
    let n = opts.display_count;
    let mut out = String::new();
    out.push_str(
        "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n<title>Anomaly explanations</title>\n</head>\n",
    );
    out.push_str("<body style=\"font-family: sans-serif; font-size: 13px;\">\n<h1>Anomaly explanations</h1>\n");
    if let Some(stamp) = &opts.stamp {
        let _ = writeln!(out, "<p>{}</p>", escape(stamp));
    }
    let th = "style=\"border: 1px solid #999; padding: 4px 8px; background: #eee;\"";
    let td = "border: 1px solid #999; padding: 4px 8px;";
    for expl in explanations {
        let _ = writeln!(out, "<h2>{}</h2>", escape(&title(expl)));
        out.push_str("<table style=\"border-collapse: collapse;\">\n<tr>");
        for h in header(n) {
            let _ = write!(out, "<th {th}>{}</th>", escape(&h));
        }
        out.push_str("</tr>\n");
        for r in rows(expl, n) {
            let _ = write!(
                out,
                "<tr><td style=\"{td}\">{}</td><td style=\"{td}\">{:.4}</td>",
                escape(&opts.name(r.fe.explained_feature)),
                r.fe.predicted_value
            );
            for (entries, polarity) in [
                (r.contributing, Polarity::Contributing),
                (r.offsetting, Polarity::Offsetting),
            ] {
                for k in 0..n {
                    match entries.get(k) {
                        Some(c) => {
                            let t = intensity(c.shap, r.max_abs);
                            let [cr, cg, cb] = rgb(polarity, t);
                            let fg = if t > 0.5 { "#fff" } else { "#000" };
                            let _ = write!(
                                out,
                                "<td style=\"{td} background: #{cr:02x}{cg:02x}{cb:02x}; color: {fg};\">{}</td>",
                                escape(&cell(opts, c))
                            );
                        }
                        None => {
                            let _ = write!(out, "<td style=\"{td}\"></td>");
                        }
                    }
                }
            }
            let _ = writeln!(out, "<td style=\"{td}\">{:.4}</td></tr>", r.fe.true_value);
        }
        out.push_str("</table>\n");
    }
    out.push_str("</body>\n</html>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use aex_core::{Attribution, TargetId};

    fn contribution(feature: usize, shap: f64) -> Contribution<f64> {
        Contribution {
            feature,
            shap,
            true_value: 0.5,
        }
    }

    fn explanation() -> Explanation64 {
        Explanation64 {
            instance: Some(3),
            anomaly_score: 0.25,
            per_feature: vec![FeatureExplanation {
                explained_feature: 4,
                true_value: 0.1,
                predicted_value: 0.6,
                contributing: vec![contribution(0, 0.3), contribution(1, 0.1)],
                offsetting: vec![contribution(2, -0.2)],
                attribution: Attribution {
                    target: TargetId::Feature(4),
                    base: 0.0,
                    phi: vec![0.3, 0.1, -0.2, 0.0, 0.0],
                    n_samples_used: 0,
                },
            }],
        }
    }

    #[test]
    fn ramps_are_monotone_and_polarised() {
        let mut last_red = 765u32;
        let mut last_blue = 765u32;
        for i in 0..=20 {
            let t = i as f64 / 20.0;
            let [r, g, b] = rgb(Polarity::Contributing, t);
            assert!(r >= g && r >= b, "red family at {t}");
            let lum = r as u32 + g as u32 + b as u32;
            assert!(lum <= last_red);
            last_red = lum;
            let [r, g, b] = rgb(Polarity::Offsetting, t);
            assert!(b >= r && b >= g, "blue family at {t}");
            let lum = r as u32 + g as u32 + b as u32;
            assert!(lum <= last_blue);
            last_blue = lum;
        }
        assert_eq!(terminal_level(0.0), 0);
        assert_eq!(terminal_level(1.0), TERMINAL_LEVELS - 1);
        assert_eq!(intensity(-0.2, 0.4), 0.5);
        assert_eq!(intensity(0.3, 0.0), 0.0);
    }

    #[test]
    fn terminal_table_layout() {
        let names: Vec<String> = (1..=5).map(|i| format!("F{i}")).collect();
        let opts = RenderOptions {
            feature_names: &names,
            display_count: 2,
            color: false,
            stamp: None,
        };
        let text = render_terminal(&explanation(), &opts);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "Instance 3 (anomaly score 0.250000)");
        let cells = |l: &str| l.split(" | ").map(|c| c.trim().to_string()).collect::<Vec<_>>();
        assert_eq!(
            cells(lines[1]),
            [
                "Feature",
                "Predicted",
                "Contributing 1",
                "Contributing 2",
                "Offsetting 1",
                "Offsetting 2",
                "Real value"
            ]
        );
        assert_eq!(
            cells(lines[2]),
            [
                "F5",
                "0.6000",
                "F1=0.5000 (+0.3000)",
                "F2=0.5000 (+0.1000)",
                "F3=0.5000 (-0.2000)",
                "",
                "0.1000"
            ]
        );
    }

    #[test]
    fn colored_terminal_uses_ramp_shades() {
        let opts = RenderOptions {
            feature_names: &[],
            display_count: 3,
            color: true,
            stamp: None,
        };
        let text = render_terminal(&explanation(), &opts);
        // strongest contributing entry gets the darkest red, the offsetting
        // entry two thirds of the way along the blue ramp
        assert!(text.contains(&format!("48;5;{}m", RED_256[7])));
        assert!(text.contains(&format!("48;5;{}m", BLUE_256[terminal_level(2.0 / 3.0)])));
    }

    #[test]
    fn empty_explanation_renders_header_only() {
        let empty = Explanation64 {
            instance: None,
            anomaly_score: 0.0,
            per_feature: vec![],
        };
        let opts = RenderOptions {
            feature_names: &[],
            display_count: 3,
            color: false,
            stamp: None,
        };
        assert_eq!(render_terminal(&empty, &opts).lines().count(), 2);
        let html = render_html(&[empty], &opts);
        assert_eq!(html.matches("<tr>").count(), 1);
    }

    #[test]
    fn html_is_stable_and_escaped() {
        let names = vec!["a<b".to_string()];
        let opts = RenderOptions {
            feature_names: &names,
            display_count: 3,
            color: false,
            stamp: None,
        };
        let a = render_html(&[explanation()], &opts);
        assert_eq!(a, render_html(&[explanation()], &opts));
        assert!(a.contains("a&lt;b=0.5000"));
        assert!(a.contains("background: #b20000"));
        assert!(!a.contains("<p>"));
    }
}
