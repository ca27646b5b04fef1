//! Exhaustive all-pairs KNN, written without any of the crate's search code.

/// `(label, class probabilities)` for one query.
pub fn brute_force(
    train: &[Vec<f64>],
    labels: &[u8],
    query: &[f64],
    k: usize,
    distance_weighted: bool,
    manhattan: bool,
) -> (u8, [f64; 4]) {
    let mut all: Vec<(f64, usize)> = train
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let d = if manhattan {
                row.iter().zip(query).map(|(a, b)| (a - b).abs()).sum::<f64>()
            } else {
                row.iter().zip(query).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
            };
            (d, i)
        })
        .collect();
    all.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
    let top = &all[..k];
    let mut mass = [0.0f64; 4];
    let exact: Vec<&(f64, usize)> = top.iter().filter(|t| t.0 == 0.0).collect();
    if distance_weighted && !exact.is_empty() {
        for t in exact {
            mass[labels[t.1] as usize] += 1.0;
        }
    } else {
        for &(d, i) in top {
            mass[labels[i] as usize] += if distance_weighted { 1.0 / d } else { 1.0 };
        }
    }
    let mut best = 0;
    for c in 1..4 {
        if mass[c] > mass[best] {
            best = c;
        }
    }
    let total: f64 = mass.iter().sum();
    (best as u8, mass.map(|m| m / total))
}
