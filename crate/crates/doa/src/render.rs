//! Plain-text report.

use std::fmt::Write;

use doa_core::involution::{Report, Status};

pub fn status_word(s: Status) -> &'static str {
    match s {
        Status::Exact => "exact",
        Status::UpperBound => "upper bound",
        Status::Inconclusive => "inconclusive",
        Status::Incompatible => "incompatible",
    }
}

pub fn text(r: &Report) -> String {
    let mut s = String::new();
    let b: Vec<String> = r.bindings.iter().map(|(k, v)| format!("{k}={v}")).collect();
    let _ = writeln!(s, "problem     {}{}", r.problem, if b.is_empty() { String::new() } else { format!(" ({})", b.join(", ")) });
    let _ = writeln!(s, "status      {}", status_word(r.status));
    let c = &r.characters;
    let _ = writeln!(s, "degree      {} at dimension {}", c.degree, c.dimension);
    let _ = writeln!(s, "ordering    {}", r.ordering.as_deref().unwrap_or("none admissible"));
    let _ = writeln!(s, "seeds       {} at order {}", r.seed_count, r.seed_order);
    let _ = writeln!(s, "characters  {:?}", c.s_prime);
    let _ = writeln!(s, "evolution   {}", if c.evolution.is_empty() { "-".to_string() } else { c.evolution.join(" ") });
    if r.per_symbol.len() > 1 {
        for (sym, v) in &r.per_symbol {
            let _ = writeln!(s, "  {sym:<9} {v:?}");
        }
    }
    if let Some(k) = &r.cartan {
        let _ = writeln!(s, "cartan      N = {}, sum k s'_k = {} ({})", k.n, k.weighted_sum, if k.pass { "pass" } else { "fail" });
    }
    let cr = &r.condition_r;
    let _ = writeln!(
        s,
        "condition R rank {} of {}{}",
        cr.rho,
        cr.m,
        if cr.symmetry_dimension > 0 { format!(", symmetry dimension {}", cr.symmetry_dimension) } else { String::new() }
    );
    if let Some(e) = &r.eom {
        let _ = writeln!(
            s,
            "eom         without: degree {} at dimension {}; dimension drops by one: {}; new evolution: {}",
            e.base_degree,
            e.base_dimension,
            e.dimension_drop_one,
            if e.new_evolution.is_empty() { "-".to_string() } else { e.new_evolution.join(" ") }
        );
    }
    for cand in r.candidates.iter().filter(|c| !c.passed) {
        let _ = writeln!(s, "rejected    {}", cand.ordering);
        for f in cand.failures.iter().chain(&cand.accepted_seeds_o1).take(8) {
            let _ = writeln!(s, "              {f}");
        }
    }
    if let Some(a) = &r.advisory {
        let _ = writeln!(s, "advisory    {}", a.message);
    }
    if r.seed_count > 0 && r.seed_count <= 40 {
        let _ = writeln!(s, "seed list   {}", r.seeds.join(" "));
    }
    for c in &r.caveats {
        let _ = writeln!(s, "caveat      {c}");
    }
    for d in &r.diagnostics {
        let _ = writeln!(s, "note        {d}");
    }
    for t in &r.trace {
        let _ = writeln!(s, "trace       {t}");
    }
    s
}
