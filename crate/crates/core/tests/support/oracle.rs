//! Brute-force reference for the threshold metrics. Every candidate
//! threshold is evaluated by counting over all scores directly, with no
//! sorting or incremental state.

#![allow(dead_code)]

pub fn candidates(bf: &[f64], ma: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for &s in bf.iter().chain(ma) {
        if !out.contains(&s) {
            out.push(s);
        }
    }
    out.push(f64::INFINITY);
    out
}

/// `(apcer, bpcer)` at threshold `t`, attack iff `score >= t`.
pub fn rates(bf: &[f64], ma: &[f64], t: f64) -> (f64, f64) {
    let mut missed = 0usize;
    for &s in ma {
        if s < t {
            missed += 1;
        }
    }
    let mut false_alarms = 0usize;
    for &s in bf {
        if s >= t {
            false_alarms += 1;
        }
    }
    (
        missed as f64 / ma.len() as f64,
        false_alarms as f64 / bf.len() as f64,
    )
}

pub fn eer(bf: &[f64], ma: &[f64]) -> f64 {
    let mut best: Option<(f64, f64, f64, f64)> = None; // gap, sum, t, value
    for t in candidates(bf, ma) {
        let (a, b) = rates(bf, ma, t);
        let cand = ((a - b).abs(), a + b, t, (a + b) / 2.0 * 100.0);
        best = match best {
            None => Some(cand),
            Some(cur) => {
                let better = cand.0 < cur.0
                    || (cand.0 == cur.0 && cand.1 < cur.1)
                    || (cand.0 == cur.0 && cand.1 == cur.1 && cand.2 < cur.2);
                Some(if better { cand } else { cur })
            }
        };
    }
    best.unwrap().3
}

/// Reported metric (percent) at a fixed value of the other one.
/// `fix_bpcer = true` gives APCER @ BPCER.
pub fn at_fixed(bf: &[f64], ma: &[f64], fix_bpcer: bool, target_percent: f64) -> f64 {
    let mut best_feasible: Option<f64> = None;
    let mut fallback: Option<(f64, f64)> = None;
    for t in candidates(bf, ma) {
        let (a, b) = rates(bf, ma, t);
        let (fixed, reported) = if fix_bpcer { (b, a) } else { (a, b) };
        if fixed <= target_percent / 100.0 {
            best_feasible = Some(match best_feasible {
                Some(v) if v <= reported => v,
                _ => reported,
            });
        }
        fallback = Some(match fallback {
            Some(f) if f.0 < fixed || (f.0 == fixed && f.1 <= reported) => f,
            _ => (fixed, reported),
        });
    }
    best_feasible.unwrap_or_else(|| fallback.unwrap().1) * 100.0
}
