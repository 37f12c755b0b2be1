//! Plain-text dump in the common CPLEX-LP layout, for eyeballing a model or
//! feeding it to an external solver.

use std::fmt::Write as _;

use super::{MilpModel, Relation, Sense, VarKind};

fn term(out: &mut String, coef: f64, name: &str, first: bool) {
    let sign = if coef < 0.0 { "-" } else if first { "" } else { "+" };
    let mag = coef.abs();
    if first {
        let _ = write!(out, "{sign}");
    } else {
        let _ = write!(out, " {sign} ");
    }
    if mag == 1.0 {
        out.push_str(name);
    } else {
        let _ = write!(out, "{mag} {name}");
    }
}

pub fn write_lp(model: &MilpModel) -> String {
    let names: Vec<&str> = model.variables().iter().map(|v| v.name.as_str()).collect();
    let mut out = String::new();
    out.push_str(match model.sense {
        Sense::Maximize => "Maximize\n obj: ",
        Sense::Minimize => "Minimize\n obj: ",
    });
    if model.objective().is_empty() {
        out.push('0');
    }
    for (k, &(v, c)) in model.objective().iter().enumerate() {
        term(&mut out, c, names[v.0], k == 0);
    }
    out.push_str("\nSubject To\n");
    for c in model.constraints() {
        let _ = write!(out, " {}: ", c.name);
        if c.terms.is_empty() {
            out.push('0');
        }
        for (k, &(v, a)) in c.terms.iter().enumerate() {
            term(&mut out, a, names[v.0], k == 0);
        }
        let rel = match c.relation {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        };
        let _ = writeln!(out, " {rel} {}", c.rhs);
    }
    out.push_str("Bounds\n");
    for v in model.variables().iter().filter(|v| v.kind == VarKind::Continuous) {
        let lo = if v.lower.is_finite() { v.lower.to_string() } else { "-inf".into() };
        let hi = if v.upper.is_finite() { v.upper.to_string() } else { "+inf".into() };
        let _ = writeln!(out, " {lo} <= {} <= {hi}", v.name);
    }
    let bins: Vec<&str> = model
        .variables()
        .iter()
        .filter(|v| v.kind == VarKind::Binary)
        .map(|v| v.name.as_str())
        .collect();
    if !bins.is_empty() {
        out.push_str("Binary\n");
        for chunk in bins.chunks(8) {
            let _ = writeln!(out, " {}", chunk.join(" "));
        }
    }
    out.push_str("End\n");
    out
}
