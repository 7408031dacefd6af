use std::fmt::Write;

use super::{classification_name, fmt_witnesses, ReportDocument};

pub(super) fn text(doc: &ReportDocument) -> String {
    let mut s = String::new();
    let r = &doc.reproducibility;
    let _ = writeln!(s, "{} {} ({} {}, schema {})", doc.tool.name, doc.command, doc.tool.name, doc.tool.version, doc.schema_version);
    if let Some(t) = doc.generated_at_unix {
        let _ = writeln!(s, "generated at unix {t}");
    }
    let _ = writeln!(s, "potential: {}", r.potential);
    let _ = writeln!(s, "weight:    {}", r.weight);
    for sec in &doc.criteria {
        let v = &sec.verdict;
        let _ = write!(s, "\n[{}] {} {}", sec.selected, v.criterion, classification_name(v.classification));
        if let Some(g) = v.evidence_grade {
            let _ = write!(s, " ({g:?})");
        }
        if let Some(b) = v.bound {
            let _ = write!(s, " bound {b:.9}");
        }
        s.push('\n');
        if !v.witnesses.is_empty() {
            let _ = writeln!(s, "  witnesses: {}", fmt_witnesses(&v.witnesses));
        }
        for n in &v.notes {
            let _ = writeln!(s, "  note: {n}");
        }
    }
    if let Some(c) = &doc.certificate {
        let _ = writeln!(s, "\ncertificate: {} (m = {}, shift {})", c.conclusion, c.dimension, c.shift);
        if let (Some((big_s, t)), Some(rb), Some(d)) = (c.witness, c.r_bar, c.diameter_bound) {
            let _ = writeln!(s, "  witness (S, t) = ({big_s:.6}, {t:.6}), R_bar = {rb:.9}, diameter <= {d:.9}");
        }
    }
    if let Some(o) = &doc.oracle {
        let _ = writeln!(s, "\noracle: {}", o.problem);
        let _ = writeln!(s, "  reached {:e} of {:e} ({:?}), {} zeros", o.reached, o.horizon, o.terminated, o.zero_count);
        if let Some(z) = o.first_zero {
            let _ = writeln!(s, "  first zero {z:.12}");
        }
        if let Some(e) = &o.envelope {
            match (e.c_fit, &e.error) {
                (Some(c), _) => {
                    let _ = writeln!(s, "  envelope {}: C_fit = {c:.6e}, residual {:.3e}", e.expr, e.residual.unwrap_or(f64::NAN));
                }
                (None, Some(err)) => {
                    let _ = writeln!(s, "  envelope {}: {err}", e.expr);
                }
                _ => {}
            }
        }
    }
    if !doc.agreement.is_empty() {
        s.push_str("\nagreement:\n");
        for a in &doc.agreement {
            let _ = writeln!(s, "  {:<32} {:?}: {}", a.criterion, a.agreement, a.detail);
        }
    }
    for a in &doc.annotations {
        let _ = writeln!(s, "\n* {a}");
    }
    let _ = writeln!(s, "\nexit code {}", doc.exit_code);
    s
}
