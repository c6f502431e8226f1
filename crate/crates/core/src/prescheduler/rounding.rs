//! Integerization of fractional plans: largest-remainder apportionment and
//! controlled rounding of a matrix with prescribed row and column totals.

use crate::flow::FlowNetwork;
use ndarray::Array2;

/// Splits `total` into integers proportional to `weights` by the largest
/// remainder method. Ties in the remainder go to the lowest index. All-zero
/// weights yield all zeros.
pub fn apportion(total: u32, weights: &[f64]) -> Vec<u32> {
    let sum: f64 = weights.iter().filter(|w| **w > 0.0).sum();
    if total == 0 || sum <= 0.0 {
        return vec![0; weights.len()];
    }
    let quotas: Vec<f64> = weights
        .iter()
        .map(|&w| if w > 0.0 { f64::from(total) * w / sum } else { 0.0 })
        .collect();
    let mut counts: Vec<u32> = quotas.iter().map(|q| q.floor() as u32).collect();
    let assigned: u32 = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).filter(|&k| weights[k] > 0.0).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &k in order.iter().cycle().take(total.saturating_sub(assigned) as usize) {
        counts[k] += 1;
    }
    counts
}

/// Integer matrix whose entries are the floor or ceiling of
/// `rows[e]·cols[m]/Σcols`, with row sums exactly `rows` and column sums at
/// most `cols` (exactly `cols` when both totals agree).
///
/// The fractional parts are rounded jointly through a transportation flow
/// so both margins hold at once.
pub fn controlled_round(rows: &[u32], cols: &[u32]) -> Array2<u32> {
    let (n_rows, n_cols) = (rows.len(), cols.len());
    let mut out = Array2::zeros((n_rows, n_cols));
    let col_total: u64 = cols.iter().map(|&c| u64::from(c)).sum();
    let row_total: u64 = rows.iter().map(|&r| u64::from(r)).sum();
    assert!(row_total <= col_total, "row total {row_total} exceeds column total {col_total}");
    if row_total == 0 {
        return out;
    }
    let mut row_rest: Vec<i64> = rows.iter().map(|&r| i64::from(r)).collect();
    let mut col_rest: Vec<i64> = cols.iter().map(|&c| i64::from(c)).collect();
    let mut fractional = Array2::from_elem((n_rows, n_cols), false);
    for e in 0..n_rows {
        for m in 0..n_cols {
            let num = u64::from(rows[e]) * u64::from(cols[m]);
            let q = num / col_total;
            out[[e, m]] = q as u32;
            fractional[[e, m]] = num % col_total != 0;
            row_rest[e] -= q as i64;
            col_rest[m] -= q as i64;
        }
    }
    if row_rest.iter().all(|&r| r == 0) {
        return out;
    }
    // source → rows → fractional cells → columns → sink
    let source = n_rows + n_cols;
    let sink = source + 1;
    let mut net = FlowNetwork::new(n_rows + n_cols + 2);
    for (e, &r) in row_rest.iter().enumerate() {
        net.add_edge(source, e, r);
    }
    let mut cells = Vec::new();
    for e in 0..n_rows {
        for m in 0..n_cols {
            if fractional[[e, m]] {
                cells.push((e, m, net.add_edge(e, n_rows + m, 1)));
            }
        }
    }
    for (m, &c) in col_rest.iter().enumerate() {
        net.add_edge(n_rows + m, sink, c.max(0));
    }
    let routed = net.max_flow(source, sink);
    debug_assert_eq!(routed, row_rest.iter().sum::<i64>());
    for (e, m, id) in cells {
        out[[e, m]] += net.flow(id) as u32;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn apportion_examples() {
        assert_eq!(apportion(10, &[0.3, 0.7]), vec![3, 7]);
        assert_eq!(apportion(7, &[1.0]), vec![7]);
        assert_eq!(apportion(0, &[0.2, 0.8]), vec![0, 0]);
        // equal remainders: lowest index first
        assert_eq!(apportion(1, &[1.0, 1.0]), vec![1, 0]);
        assert_eq!(apportion(5, &[0.0, 0.0]), vec![0, 0]);
        assert_eq!(apportion(3, &[0.0, 2.0, 1.0]), vec![0, 2, 1]);
    }

    #[test]
    fn controlled_round_small() {
        let y = controlled_round(&[3, 2], &[1, 4]);
        assert_eq!(y.sum_axis(ndarray::Axis(1)).to_vec(), vec![3, 2]);
        assert_eq!(y.sum_axis(ndarray::Axis(0)).to_vec(), vec![1, 4]);
        let z = controlled_round(&[0, 0], &[0, 0]);
        assert_eq!(z.sum(), 0);
    }

    proptest! {
        #[test]
        fn apportion_preserves_total(total in 0u32..200, w in prop::collection::vec(0f64..5.0, 1..8)) {
            let counts = apportion(total, &w);
            let positive = w.iter().any(|x| *x > 0.0);
            prop_assert_eq!(counts.iter().sum::<u32>(), if positive { total } else { 0 });
            let sum: f64 = w.iter().sum();
            for (c, x) in counts.iter().zip(&w) {
                if positive {
                    let q = f64::from(total) * x / sum;
                    prop_assert!((f64::from(*c) - q).abs() < 1.0 + 1e-9);
                }
            }
        }

        #[test]
        fn controlled_round_margins(cols in prop::collection::vec(0u32..30, 1..6), split in prop::collection::vec(0f64..1.0, 1..6), keep in 0f64..=1.0) {
            let col_total: u32 = cols.iter().sum();
            let target = (f64::from(col_total) * keep).floor() as u32;
            let rows = apportion(target, &split);
            let y = controlled_round(&rows, &cols);
            for (e, &r) in rows.iter().enumerate() {
                prop_assert_eq!(y.row(e).sum(), r);
                for (m, &c) in cols.iter().enumerate() {
                    let q = f64::from(r) * f64::from(c) / f64::from(col_total.max(1));
                    let v = f64::from(y[[e, m]]);
                    prop_assert!(v >= q.floor() && v <= q.ceil());
                }
            }
            for (m, &c) in cols.iter().enumerate() {
                let s = y.column(m).sum();
                prop_assert!(s <= c);
                if target == col_total {
                    prop_assert_eq!(s, c);
                }
            }
        }
    }
}
