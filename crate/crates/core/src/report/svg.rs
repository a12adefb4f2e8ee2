//! Direct SVG emission for run artifacts: training curves, normalized
//! confusion heatmaps, and ROC curves. No rendering dependency — every plot
//! is polylines, rects, and text, so tests can assert on the bytes.

use crate::eval::{ConfusionMatrix, RocCurve};
use crate::train::EpochRow;

const PALETTE: [&str; 8] =
    ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"];

pub fn escape_xml(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

struct Svg {
    width: f64,
    height: f64,
    body: String,
}

impl Svg {
    fn new(width: f64, height: f64) -> Self {
        Svg { width, height, body: String::new() }
    }

    fn text(&mut self, x: f64, y: f64, size: f64, anchor: &str, extra: &str, content: &str) {
        self.body.push_str(&format!(
            "<text x=\"{x:.2}\" y=\"{y:.2}\" font-size=\"{size}\" font-family=\"sans-serif\" \
             text-anchor=\"{anchor}\"{extra}>{}</text>\n",
            escape_xml(content)
        ));
    }

    fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str, extra: &str) {
        self.body.push_str(&format!(
            "<line x1=\"{x1:.2}\" y1=\"{y1:.2}\" x2=\"{x2:.2}\" y2=\"{y2:.2}\" \
             stroke=\"{stroke}\"{extra}/>\n"
        ));
    }

    fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str, extra: &str) {
        self.body.push_str(&format!(
            "<rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{w:.2}\" height=\"{h:.2}\" \
             fill=\"{fill}\"{extra}/>\n"
        ));
    }

    fn polyline(&mut self, points: &[(f64, f64)], stroke: &str) {
        let coords: Vec<String> =
            points.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
        self.body.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{stroke}\" stroke-width=\"1.5\"/>\n",
            coords.join(" ")
        ));
    }

    fn finish(self) -> String {
        format!(
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n\
             <svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0}\" height=\"{:.0}\" \
             viewBox=\"0 0 {:.0} {:.0}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{}</svg>\n",
            self.width, self.height, self.width, self.height, self.body
        )
    }
}

/// One panel of line series over epochs.
struct Panel {
    x0: f64,
    y0: f64,
    w: f64,
    h: f64,
    y_min: f64,
    y_max: f64,
}

impl Panel {
    fn map(&self, epochs: usize, i: usize, v: f64) -> (f64, f64) {
        let denom = (epochs.saturating_sub(1)).max(1) as f64;
        let x = self.x0 + self.w * i as f64 / denom;
        let range = (self.y_max - self.y_min).max(1e-12);
        let y = self.y0 + self.h - self.h * ((v - self.y_min) / range).clamp(0.0, 1.0);
        (x, y)
    }

    fn frame(&self, svg: &mut Svg, title: &str, epochs: usize) {
        svg.line(self.x0, self.y0, self.x0, self.y0 + self.h, "#333", "");
        svg.line(self.x0, self.y0 + self.h, self.x0 + self.w, self.y0 + self.h, "#333", "");
        svg.text(self.x0 + self.w / 2.0, self.y0 - 12.0, 13.0, "middle", "", title);
        svg.text(self.x0 - 6.0, self.y0 + 4.0, 10.0, "end", "", &format!("{:.3}", self.y_max));
        svg.text(
            self.x0 - 6.0,
            self.y0 + self.h + 4.0,
            10.0,
            "end",
            "",
            &format!("{:.3}", self.y_min),
        );
        svg.text(self.x0, self.y0 + self.h + 14.0, 10.0, "middle", "", "0");
        svg.text(
            self.x0 + self.w,
            self.y0 + self.h + 14.0,
            10.0,
            "middle",
            "",
            &format!("{}", epochs.saturating_sub(1)),
        );
        svg.text(
            self.x0 + self.w / 2.0,
            self.y0 + self.h + 26.0,
            11.0,
            "middle",
            "",
            "epoch",
        );
    }
}

/// Train/validation loss and accuracy curves for one fold. Each series is a
/// single polyline with one point per epoch.
pub fn curves_svg(fold: usize, rows: &[EpochRow]) -> String {
    let epochs = rows.len();
    let mut svg = Svg::new(880.0, 380.0);
    svg.text(440.0, 22.0, 15.0, "middle", "", &format!("fold {fold} training curves"));

    let max_loss = rows
        .iter()
        .flat_map(|r| [r.train_loss, r.val_loss])
        .filter(|v| v.is_finite())
        .fold(0.0f64, f64::max)
        .max(1e-6);
    let loss_panel =
        Panel { x0: 70.0, y0: 60.0, w: 330.0, h: 240.0, y_min: 0.0, y_max: max_loss * 1.05 };
    let acc_panel = Panel { x0: 500.0, y0: 60.0, w: 330.0, h: 240.0, y_min: 0.0, y_max: 1.0 };
    loss_panel.frame(&mut svg, "loss", epochs);
    acc_panel.frame(&mut svg, "accuracy", epochs);

    let series: [(&str, &str, Box<dyn Fn(&EpochRow) -> f64>, &Panel); 4] = [
        ("train loss", PALETTE[0], Box::new(|r: &EpochRow| r.train_loss), &loss_panel),
        ("val loss", PALETTE[1], Box::new(|r: &EpochRow| r.val_loss), &loss_panel),
        ("train acc", PALETTE[0], Box::new(|r: &EpochRow| r.train_acc), &acc_panel),
        ("val acc", PALETTE[1], Box::new(|r: &EpochRow| r.val_acc), &acc_panel),
    ];
    for (label, color, value, panel) in &series {
        let points: Vec<(f64, f64)> =
            rows.iter().enumerate().map(|(i, r)| panel.map(epochs, i, value(r))).collect();
        svg.polyline(&points, color);
        let _ = label;
    }
    // Shared legend.
    for (i, label) in ["train", "validation"].iter().enumerate() {
        let y = 340.0 + 0.0;
        let x = 340.0 + 120.0 * i as f64;
        svg.line(x, y - 4.0, x + 24.0, y - 4.0, PALETTE[i], " stroke-width=\"2\"");
        svg.text(x + 30.0, y, 11.0, "start", "", label);
    }
    svg.finish()
}

/// Normalized confusion-matrix heatmap: rows are actual classes, columns
/// predicted, cell shade proportional to the row-normalized rate.
pub fn confusion_heatmap_svg(cm: &ConfusionMatrix, class_names: &[String]) -> String {
    let k = cm.n_classes;
    let cell = 56.0;
    let left = 170.0;
    let top = 120.0;
    let mut svg = Svg::new(left + cell * k as f64 + 40.0, top + cell * k as f64 + 40.0);
    svg.text(
        (left + cell * k as f64) / 2.0 + 40.0,
        28.0,
        15.0,
        "middle",
        "",
        "normalized confusion matrix",
    );
    let (norm, _) = cm.normalized();
    for (i, row) in norm.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            let x = left + cell * j as f64;
            let y = top + cell * i as f64;
            let shade = |c0: f64, c1: f64| (c0 + (c1 - c0) * v).round() as u8;
            let fill = format!("rgb({},{},{})", shade(255.0, 8.0), shade(255.0, 81.0), shade(255.0, 156.0));
            svg.rect(x, y, cell, cell, &fill, " stroke=\"#999\" stroke-width=\"0.5\"");
            let color = if v > 0.5 { " fill=\"white\"" } else { " fill=\"black\"" };
            svg.text(x + cell / 2.0, y + cell / 2.0 + 4.0, 11.0, "middle", color, &format!("{v:.2}"));
        }
    }
    for (i, name) in class_names.iter().enumerate() {
        svg.text(left - 8.0, top + cell * i as f64 + cell / 2.0 + 4.0, 10.0, "end", "", name);
        let x = left + cell * i as f64 + cell / 2.0;
        let extra = format!(" transform=\"rotate(-35 {x:.2} {:.2})\"", top - 10.0);
        svg.text(x, top - 10.0, 10.0, "start", &extra, name);
    }
    svg.text(left - 120.0, top + cell * k as f64 / 2.0, 11.0, "middle", "", "actual");
    svg.finish()
}

/// One-vs-rest ROC curves with an AUC legend. Legend AUC values carry 9
/// decimals, matching the CSV artifact digit for digit.
pub fn roc_svg(roc: &RocCurve, class_names: &[String]) -> String {
    let plot = Panel { x0: 70.0, y0: 50.0, w: 400.0, h: 400.0, y_min: 0.0, y_max: 1.0 };
    let mut svg = Svg::new(880.0, 510.0);
    svg.text(290.0, 26.0, 15.0, "middle", "", "one-vs-rest ROC");
    svg.line(plot.x0, plot.y0, plot.x0, plot.y0 + plot.h, "#333", "");
    svg.line(plot.x0, plot.y0 + plot.h, plot.x0 + plot.w, plot.y0 + plot.h, "#333", "");
    for t in [0.0, 0.5, 1.0] {
        svg.text(
            plot.x0 + plot.w * t,
            plot.y0 + plot.h + 16.0,
            10.0,
            "middle",
            "",
            &format!("{t:.1}"),
        );
        svg.text(
            plot.x0 - 8.0,
            plot.y0 + plot.h * (1.0 - t) + 4.0,
            10.0,
            "end",
            "",
            &format!("{t:.1}"),
        );
    }
    svg.text(plot.x0 + plot.w / 2.0, plot.y0 + plot.h + 34.0, 11.0, "middle", "", "false positive rate");
    svg.text(plot.x0 - 44.0, plot.y0 + plot.h / 2.0, 11.0, "middle", "", "TPR");
    svg.line(
        plot.x0,
        plot.y0 + plot.h,
        plot.x0 + plot.w,
        plot.y0,
        "#bbb",
        " stroke-dasharray=\"5,4\"",
    );

    let legend_x = 510.0;
    let mut legend_y = 70.0;
    for (ci, curve) in roc.per_class.iter().enumerate() {
        let color = PALETTE[ci % PALETTE.len()];
        let points: Vec<(f64, f64)> = curve
            .points
            .iter()
            .map(|&(fpr, tpr)| {
                (plot.x0 + plot.w * fpr, plot.y0 + plot.h * (1.0 - tpr))
            })
            .collect();
        svg.polyline(&points, color);
        svg.line(legend_x, legend_y - 4.0, legend_x + 24.0, legend_y - 4.0, color, " stroke-width=\"2\"");
        svg.text(
            legend_x + 30.0,
            legend_y,
            11.0,
            "start",
            "",
            &format!("{} (AUC={:.9})", class_names[curve.class], curve.auc),
        );
        legend_y += 20.0;
    }
    svg.text(
        legend_x + 30.0,
        legend_y,
        11.0,
        "start",
        "",
        &format!("macro (AUC={:.9})", roc.macro_auc),
    );
    legend_y += 20.0;
    for &skipped in &roc.skipped {
        svg.text(
            legend_x + 30.0,
            legend_y,
            11.0,
            "start",
            "",
            &format!("{} (skipped: one class absent)", class_names[skipped]),
        );
        legend_y += 20.0;
    }
    svg.finish()
}

/// Minimal well-formedness check for emitted SVG: tags balance, attributes
/// are quoted, and exactly one root element exists. Good enough to catch
/// emitter bugs without an XML dependency.
pub fn svg_is_well_formed(text: &str) -> bool {
    let mut stack: Vec<String> = Vec::new();
    let mut roots = 0usize;
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] != b'<' {
            i += 1;
            continue;
        }
        let Some(end) = text[i..].find('>') else { return false };
        let tag = &text[i + 1..i + end];
        i += end + 1;
        if tag.starts_with('?') || tag.starts_with('!') {
            continue;
        }
        if let Some(name) = tag.strip_prefix('/') {
            match stack.pop() {
                Some(open) if open == name.trim() => {
                    if stack.is_empty() {
                        roots += 1;
                    }
                }
                _ => return false,
            }
        } else {
            // Quote balance inside the tag.
            if tag.bytes().filter(|&b| b == b'"').count() % 2 != 0 {
                return false;
            }
            if tag.ends_with('/') {
                if stack.is_empty() {
                    roots += 1;
                }
            } else {
                let name = tag.split_whitespace().next().unwrap_or("");
                if name.is_empty() {
                    return false;
                }
                stack.push(name.to_string());
            }
        }
    }
    stack.is_empty() && roots == 1
}

/// Count coordinate pairs in every `<polyline points="...">` of an SVG, in
/// document order. Lets tests verify that a curve has one vertex per epoch.
pub fn polyline_point_counts(svg: &str) -> Vec<usize> {
    let mut counts = Vec::new();
    let mut rest = svg;
    while let Some(at) = rest.find("<polyline") {
        rest = &rest[at..];
        let Some(p) = rest.find("points=\"") else { break };
        rest = &rest[p + 8..];
        let Some(q) = rest.find('"') else { break };
        counts.push(rest[..q].split_whitespace().count());
        rest = &rest[q..];
    }
    counts
}
