use std::collections::BTreeSet;

use egoassist_core::metrics::{edit_distance, mean_accuracy, miou, success_rate, Stream};
use egoassist_core::{ActionLabel, ActionSequence};
use proptest::prelude::*;

const VERBS: [&str; 4] = ["take", "pour", "froth", "cut"];
const NOUNS: [&str; 4] = ["cup", "milk", "tomato", "knife"];

fn label(v: usize, n: usize) -> ActionLabel {
    ActionLabel::new(v, n, VERBS[v], NOUNS[n])
}

fn seq(pairs: &[(usize, usize)], z: usize) -> ActionSequence {
    ActionSequence::new(pairs.iter().map(|&(v, n)| label(v, n)).collect(), z.max(1)).unwrap()
}

/// Independent positional padding: `None` marks a padded slot.
fn padded(pairs: &[(usize, usize)], z: usize) -> Vec<Option<(usize, usize)>> {
    (0..z).map(|i| pairs.get(i).copied()).collect()
}

/// Textbook Wagner-Fischer over full tables; `None` never matches.
fn dp_levenshtein<T: PartialEq>(a: &[Option<T>], b: &[Option<T>]) -> usize {
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for (j, cell) in d[0].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let same = matches!((&a[i - 1], &b[j - 1]), (Some(x), Some(y)) if x == y);
            d[i][j] = (d[i - 1][j] + 1)
                .min(d[i][j - 1] + 1)
                .min(d[i - 1][j - 1] + usize::from(!same));
        }
    }
    d[a.len()][b.len()]
}

fn oracle_ed(p: &[(usize, usize)], g: &[(usize, usize)], z: usize, stream: Stream) -> f64 {
    let project = |s: &[(usize, usize)]| -> Vec<Option<usize>> {
        padded(s, z)
            .into_iter()
            .map(|x| {
                x.map(|(v, n)| match stream {
                    Stream::Verb => v,
                    Stream::Noun => n,
                    Stream::Action => v * 100 + n,
                })
            })
            .collect()
    };
    dp_levenshtein(&project(p), &project(g)) as f64 / z as f64
}

fn oracle_macc(p: &[(usize, usize)], g: &[(usize, usize)], z: usize) -> f64 {
    let (a, b) = (padded(p, z), padded(g, z));
    let hits = (0..z).filter(|&i| a[i].is_some() && a[i] == b[i]).count();
    hits as f64 / z as f64
}

fn oracle_iou(p: &[(usize, usize)], g: &[(usize, usize)]) -> f64 {
    let a: BTreeSet<_> = p.iter().collect();
    let b: BTreeSet<_> = g.iter().collect();
    let union = a.union(&b).count();
    if union == 0 {
        return 0.0;
    }
    a.intersection(&b).count() as f64 / union as f64
}

fn oracle_sr(p: &[(usize, usize)], g: &[(usize, usize)], z: usize) -> bool {
    let (a, b) = (padded(p, z), padded(g, z));
    (0..z).all(|i| a[i].is_some() && a[i] == b[i])
}

fn pair() -> impl Strategy<Value = (usize, usize)> {
    (0..4usize, 0..4usize)
}

type Case = (Vec<(usize, usize)>, Vec<(usize, usize)>, usize);

fn case() -> impl Strategy<Value = Case> {
    (1..7usize).prop_flat_map(|z| {
        (
            prop::collection::vec(pair(), 0..=z + 1),
            prop::collection::vec(pair(), z..=z + 2),
            Just(z),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1500))]

    #[test]
    fn metrics_agree_with_brute_force_oracles((p, g, z) in case()) {
        let (ps, gs) = (seq(&p, z + 2), seq(&g, z + 2));
        for stream in [Stream::Verb, Stream::Noun, Stream::Action] {
            let got = edit_distance(&ps, &gs, z, stream).unwrap();
            prop_assert!((got - oracle_ed(&p, &g, z, stream)).abs() < 1e-12);
        }
        prop_assert!((mean_accuracy(&ps, &gs, z).unwrap() - oracle_macc(&p, &g, z)).abs() < 1e-12);
        prop_assert_eq!(success_rate(&ps, &gs, z).unwrap(), oracle_sr(&p, &g, z));
        prop_assert!((miou(&ps, &gs) - oracle_iou(&p, &g)).abs() < 1e-12);
    }

    #[test]
    fn success_implies_accuracy_implies_zero_distance((p, g, z) in case()) {
        let (ps, gs) = (seq(&p, z + 2), seq(&g, z + 2));
        if success_rate(&ps, &gs, z).unwrap() {
            prop_assert_eq!(mean_accuracy(&ps, &gs, z).unwrap(), 1.0);
        }
        if mean_accuracy(&ps, &gs, z).unwrap() == 1.0 {
            prop_assert_eq!(edit_distance(&ps, &gs, z, Stream::Action).unwrap(), 0.0);
        }
    }

    #[test]
    fn edit_distance_is_symmetric_and_bounded((mut p, g, z) in case()) {
        p.extend(g.iter().rev().take(z.saturating_sub(p.len())));
        let (ps, gs) = (seq(&p, z + 2), seq(&g, z + 2));
        let ab = edit_distance(&ps, &gs, z, Stream::Action).unwrap();
        let ba = edit_distance(&gs, &ps, z, Stream::Action).unwrap();
        prop_assert_eq!(ab, ba);
        prop_assert!((0.0..=1.0).contains(&ab));
    }

    #[test]
    fn miou_is_permutation_invariant((p, g, z) in case(), rot in 0..5usize) {
        let mut q = p.clone();
        if !q.is_empty() {
            let r = rot % q.len();
            q.rotate_left(r);
        }
        let (ps, qs, gs) = (seq(&p, z + 2), seq(&q, z + 2), seq(&g, z + 2));
        prop_assert_eq!(miou(&ps, &gs), miou(&qs, &gs));
    }
}

#[test]
fn worked_examples() {
    // take cup, pour milk, froth milk against take cup, froth milk, pour milk
    let p = [(0, 0), (1, 1), (2, 1)];
    let g = [(0, 0), (2, 1), (1, 1)];
    let ed = edit_distance(&seq(&p, 3), &seq(&g, 3), 3, Stream::Action).unwrap();
    assert!((ed - oracle_ed(&p, &g, 3, Stream::Action)).abs() < 1e-12);
    assert!((ed - 2.0 / 3.0).abs() < 1e-12);

    let p = [(0, 0), (3, 3), (1, 1), (0, 2)];
    let g = [(0, 0), (1, 1), (1, 1), (2, 1)];
    assert_eq!(
        mean_accuracy(&seq(&p, 4), &seq(&g, 4), 4).unwrap(),
        oracle_macc(&p, &g, 4)
    );
    assert_eq!(oracle_macc(&p, &g, 4), 0.5);

    let p = [(0, 0), (1, 1), (3, 2)];
    let g = [(0, 0), (1, 1), (2, 1)];
    assert_eq!(miou(&seq(&p, 3), &seq(&g, 3)), 0.5);
}

#[test]
fn order_sensitive_pair_exists() {
    let p = seq(&[(0, 0), (1, 1), (2, 1)], 3);
    let g = seq(&[(0, 0), (2, 1), (1, 1)], 3);
    assert_eq!(miou(&p, &g), 1.0);
    assert!(!success_rate(&p, &g, 3).unwrap());
}
