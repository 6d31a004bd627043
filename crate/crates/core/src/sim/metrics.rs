use alloc::collections::VecDeque;
use alloc::vec::Vec;

use super::episode::TelemetryRecord;

fn window_end(records: &[TelemetryRecord], from: usize, target: f64) -> Option<usize> {
    // tolerate rounding in the uniformly spaced timestamps
    let eps = 1e-9 * target.abs().max(1.0);
    (from..records.len()).find(|&j| records[j].t >= target - eps)
}

/// Earliest `t*` such that every weight stays within `tol` (infinity norm) of
/// its value at `t* + window` over `[t*, t* + window]`.
///
/// Runs in `O(len · N)` using monotone deques for the running per-weight
/// extrema.
pub fn convergence_time(records: &[TelemetryRecord], window: f64, tol: f64) -> Option<f64> {
    let first = records.first()?;
    let n_w = first.weights.len();
    let mut max_q: Vec<VecDeque<usize>> = (0..n_w).map(|_| VecDeque::new()).collect();
    let mut min_q: Vec<VecDeque<usize>> = (0..n_w).map(|_| VecDeque::new()).collect();
    let mut pushed = 0usize;

    for i in 0..records.len() {
        let j = window_end(
            records,
            i.max(pushed.saturating_sub(1)),
            records[i].t + window,
        )?;
        while pushed <= j {
            let w = &records[pushed].weights;
            for c in 0..n_w {
                let v = w[c];
                let q = &mut max_q[c];
                while q.back().is_some_and(|&b| records[b].weights[c] <= v) {
                    q.pop_back();
                }
                q.push_back(pushed);
                let q = &mut min_q[c];
                while q.back().is_some_and(|&b| records[b].weights[c] >= v) {
                    q.pop_back();
                }
                q.push_back(pushed);
            }
            pushed += 1;
        }
        for c in 0..n_w {
            while max_q[c].front().is_some_and(|&f| f < i) {
                max_q[c].pop_front();
            }
            while min_q[c].front().is_some_and(|&f| f < i) {
                min_q[c].pop_front();
            }
        }
        let end = &records[j].weights;
        let settled = (0..n_w).all(|c| {
            let hi = records[*max_q[c].front().expect("window is non-empty")].weights[c];
            let lo = records[*min_q[c].front().expect("window is non-empty")].weights[c];
            hi - end[c] <= tol && end[c] - lo <= tol
        });
        if settled {
            return Some(records[i].t);
        }
    }
    None
}

/// RMS of `‖e‖` over the records in the final `window` seconds.
pub fn steady_state_error(records: &[TelemetryRecord], window: f64) -> f64 {
    let Some(last) = records.last() else {
        return 0.0;
    };
    let start = last.t - window;
    let eps = 1e-9 * start.abs().max(1.0);
    let (sum, count) =
        records
            .iter()
            .filter(|r| r.t >= start - eps)
            .fold((0.0, 0usize), |(s, c), r| {
                let e = r.error_norm();
                (s + e * e, c + 1)
            });
    libm::sqrt(sum / count as f64)
}

/// Largest `|u_applied,i|` over the records.
pub fn max_abs_input(records: &[TelemetryRecord]) -> f64 {
    records
        .iter()
        .flat_map(|r| r.u_applied.iter())
        .fold(0.0, |a, u| a.max(libm::fabs(*u)))
}
