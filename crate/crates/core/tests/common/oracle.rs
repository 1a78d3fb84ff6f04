//! Reference computations written independently of the engine.

use std::collections::{BTreeMap, BTreeSet};

use magnitude::model::Polarity;

/// Every simple directed cycle, found by unpruned DFS from every node and
/// deduplicated by rotating each cycle to start at its smallest node.
pub fn brute_force_cycles(edges: &BTreeSet<(String, String)>) -> BTreeSet<Vec<String>> {
    let mut succ: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (a, b) in edges {
        succ.entry(a).or_default().push(b);
    }
    let mut found = BTreeSet::new();
    for start in succ.keys() {
        let mut path = vec![*start];
        walk(&succ, &mut path, &mut found);
    }
    found
}

fn walk<'a>(
    succ: &BTreeMap<&'a str, Vec<&'a str>>,
    path: &mut Vec<&'a str>,
    found: &mut BTreeSet<Vec<String>>,
) {
    let last = *path.last().unwrap();
    for &next in succ.get(last).map(Vec::as_slice).unwrap_or(&[]) {
        if next == path[0] {
            let min = path.iter().enumerate().min_by_key(|(_, n)| **n).unwrap().0;
            let cycle: Vec<String> = path[min..]
                .iter()
                .chain(&path[..min])
                .map(|s| s.to_string())
                .collect();
            found.insert(cycle);
        } else if !path.contains(&next) {
            path.push(next);
            walk(succ, path, found);
            path.pop();
        }
    }
}

/// Loop class by counting negative links.
pub fn parity_class(polarities: &[Polarity]) -> &'static str {
    let mut negatives = 0;
    for p in polarities {
        match p {
            Polarity::Unspecified => return "undetermined",
            Polarity::Negative => negatives += 1,
            Polarity::Positive => {}
        }
    }
    if negatives % 2 == 0 {
        "reinforcing"
    } else {
        "balancing"
    }
}

/// `s_n` of the Euler recurrence `s += dt/tau * (u - s)` for constant `u`,
/// in closed form.
pub fn smooth_closed_form(u: f64, init: f64, tau: f64, dt: f64, n: i32) -> f64 {
    u + (init - u) * (1.0 - dt / tau).powi(n)
}

/// Euler solution of `ds/dt = -s/tau` after `n` steps.
pub fn euler_decay(s0: f64, tau: f64, dt: f64, n: i32) -> f64 {
    s0 * (1.0 - dt / tau).powi(n)
}

/// `input` shifted right by `k` samples with `init` filling the front.
pub fn shifted(input: &[f64], k: usize, init: f64) -> Vec<f64> {
    (0..input.len())
        .map(|n| if n < k { init } else { input[n - k] })
        .collect()
}

/// Left-rectangle integral of a series on a uniform grid.
pub fn left_rectangle(values: &[f64], dt: f64) -> f64 {
    values[..values.len() - 1].iter().map(|v| v * dt).sum()
}
