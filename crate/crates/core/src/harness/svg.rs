//! Log-log line charts drawn from the main CSV, and a small well-formedness
//! checker for the markup.

use std::fmt::Write as _;

use super::report::MainRecord;

const PANEL_W: f64 = 320.0;
const PANEL_H: f64 = 220.0;
const MARGIN: f64 = 40.0;
const COLUMNS: usize = 3;

struct Series<'a> {
    name: &'a str,
    color: &'a str,
    points: Vec<(f64, f64)>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// One panel per `(function, r, p, α)` with `Ω`, `ω` and `K̃` against `t`.
pub fn render_svg(records: &[MainRecord]) -> String {
    let mut keys: Vec<(String, usize, String, f64)> = Vec::new();
    for rec in records {
        let key = (rec.function_id.clone(), rec.r, rec.p.to_string(), rec.alpha);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    let rows = keys.len().div_ceil(COLUMNS).max(1);
    let width = COLUMNS as f64 * PANEL_W;
    let height = rows as f64 * PANEL_H;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="10">"#
    );
    for (i, (id, r, p, alpha)) in keys.iter().enumerate() {
        let group: Vec<&MainRecord> = records
            .iter()
            .filter(|x| &x.function_id == id && x.r == *r && &x.p.to_string() == p && x.alpha == *alpha)
            .collect();
        let pick = |f: &dyn Fn(&MainRecord) -> Option<f64>| {
            let mut v: Vec<(f64, f64)> = group
                .iter()
                .filter_map(|x| f(x).filter(|y| *y > 0.0 && y.is_finite()).map(|y| (x.t, y)))
                .collect();
            v.sort_by(|a, b| a.0.total_cmp(&b.0));
            v
        };
        let series = [
            Series {
                name: "Omega",
                color: "#1f77b4",
                points: pick(&|x| x.omega_main),
            },
            Series {
                name: "omega",
                color: "#2ca02c",
                points: pick(&|x| x.omega_complete),
            },
            Series {
                name: "K restricted",
                color: "#d62728",
                points: pick(&|x| x.k_restricted),
            },
        ];
        let ox = (i % COLUMNS) as f64 * PANEL_W;
        let oy = (i / COLUMNS) as f64 * PANEL_H;
        let title = format!("{id}  r={r} p={p} alpha={alpha}");
        panel(&mut out, ox, oy, &escape(&title), &series);
    }
    out.push_str("</svg>\n");
    out
}

fn panel(out: &mut String, ox: f64, oy: f64, title: &str, series: &[Series]) {
    let all: Vec<(f64, f64)> = series.iter().flat_map(|s| s.points.iter().copied()).collect();
    let _ = writeln!(out, r#"<g transform="translate({ox},{oy})">"#);
    let _ = writeln!(out, r#"<text x="{MARGIN}" y="14">{title}</text>"#);
    let (x0, y0) = (MARGIN, 20.0);
    let (w, h) = (PANEL_W - MARGIN - 10.0, PANEL_H - y0 - 30.0);
    let _ = writeln!(
        out,
        r##"<rect x="{x0}" y="{y0}" width="{w}" height="{h}" fill="none" stroke="#999"/>"##
    );
    if all.is_empty() {
        let _ = writeln!(out, r#"<text x="{}" y="{}">no positive values</text>"#, x0 + 10.0, y0 + h / 2.0);
        out.push_str("</g>\n");
        return;
    }
    let lx: Vec<f64> = all.iter().map(|p| p.0.log10()).collect();
    let ly: Vec<f64> = all.iter().map(|p| p.1.log10()).collect();
    let range = |v: &[f64]| {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if hi - lo < 1e-9 {
            (lo - 0.5, hi + 0.5)
        } else {
            (lo, hi)
        }
    };
    let (xl, xh) = range(&lx);
    let (yl, yh) = range(&ly);
    let sx = |v: f64| x0 + (v.log10() - xl) / (xh - xl) * w;
    let sy = |v: f64| y0 + h - (v.log10() - yl) / (yh - yl) * h;
    let _ = writeln!(
        out,
        r#"<text x="{x0}" y="{}">t 1e{xl:.2} .. 1e{xh:.2}, values 1e{yl:.2} .. 1e{yh:.2}</text>"#,
        y0 + h + 14.0
    );
    for (k, s) in series.iter().enumerate() {
        if !s.points.is_empty() {
            let pts: Vec<String> = s.points.iter().map(|&(t, v)| format!("{:.2},{:.2}", sx(t), sy(v))).collect();
            let _ = writeln!(
                out,
                r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#,
                s.color,
                pts.join(" ")
            );
        }
        let ly = y0 + h + 26.0;
        let lx = x0 + k as f64 * 85.0;
        let _ = writeln!(
            out,
            r#"<line x1="{lx}" y1="{}" x2="{}" y2="{}" stroke="{}"/><text x="{}" y="{ly}">{}</text>"#,
            ly - 3.0,
            lx + 12.0,
            ly - 3.0,
            s.color,
            lx + 15.0,
            escape(s.name)
        );
    }
    out.push_str("</g>\n");
}

/// Checks tag nesting, attribute quoting and entity references. Enough for
/// the markup emitted here; not a general XML parser.
pub fn check_well_formed(text: &str) -> std::result::Result<(), String> {
    let mut stack: Vec<String> = Vec::new();
    let mut rest = text;
    let mut roots = 0;
    while let Some(open) = rest.find('<') {
        check_text(&rest[..open])?;
        if stack.is_empty() && !rest[..open].trim().is_empty() {
            return Err("text outside the root element".into());
        }
        let after = &rest[open + 1..];
        let close = after.find('>').ok_or("unterminated tag")?;
        let tag = &after[..close];
        rest = &after[close + 1..];
        if let Some(body) = tag.strip_prefix('?') {
            if !body.ends_with('?') {
                return Err("bad processing instruction".into());
            }
            continue;
        }
        if let Some(name) = tag.strip_prefix('/') {
            let name = name.trim();
            match stack.pop() {
                Some(top) if top == name => {}
                Some(top) => return Err(format!("</{name}> closes <{top}>")),
                None => return Err(format!("</{name}> without an open tag")),
            }
            continue;
        }
        let self_closing = tag.ends_with('/');
        let inner = tag.trim_end_matches('/');
        let name_end = inner.find(char::is_whitespace).unwrap_or(inner.len());
        let name = &inner[..name_end];
        if name.is_empty() || !name.chars().all(|c| c.is_alphanumeric() || "-_:.".contains(c)) {
            return Err(format!("bad element name `{name}`"));
        }
        check_attributes(&inner[name_end..])?;
        if stack.is_empty() {
            roots += 1;
            if roots > 1 {
                return Err("more than one root element".into());
            }
        }
        if !self_closing {
            stack.push(name.to_string());
        }
    }
    check_text(rest)?;
    if !rest.trim().is_empty() {
        return Err("text after the root element".into());
    }
    match (stack.last(), roots) {
        (Some(open), _) => Err(format!("<{open}> is never closed")),
        (None, 0) => Err("no root element".into()),
        _ => Ok(()),
    }
}

fn check_text(s: &str) -> std::result::Result<(), String> {
    let mut rest = s;
    while let Some(i) = rest.find('&') {
        let after = &rest[i + 1..];
        let end = after.find(';').ok_or("unterminated entity")?;
        let ent = &after[..end];
        let ok = matches!(ent, "amp" | "lt" | "gt" | "quot" | "apos")
            || ent.strip_prefix('#').is_some_and(|n| n.chars().all(|c| c.is_ascii_digit()) && !n.is_empty());
        if !ok {
            return Err(format!("unknown entity &{ent};"));
        }
        rest = &after[end + 1..];
    }
    Ok(())
}

fn check_attributes(s: &str) -> std::result::Result<(), String> {
    let mut rest = s.trim_start();
    let mut seen: Vec<&str> = Vec::new();
    while !rest.is_empty() {
        let eq = rest.find('=').ok_or_else(|| format!("attribute without value near `{rest}`"))?;
        let name = rest[..eq].trim();
        if name.is_empty() || name.contains(char::is_whitespace) {
            return Err(format!("bad attribute name `{name}`"));
        }
        if seen.contains(&name) {
            return Err(format!("duplicate attribute `{name}`"));
        }
        seen.push(name);
        let after = rest[eq + 1..].trim_start();
        let quote = after.chars().next().filter(|c| *c == '"' || *c == '\'').ok_or("unquoted attribute")?;
        let body = &after[1..];
        let end = body.find(quote).ok_or("unterminated attribute value")?;
        let value = &body[..end];
        if value.contains('<') {
            return Err("`<` inside an attribute value".into());
        }
        check_text(value)?;
        rest = body[end + 1..].trim_start();
    }
    Ok(())
}
