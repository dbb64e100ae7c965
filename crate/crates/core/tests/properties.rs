use krk_core::chess::{
    canonicalize, is_adjacent, is_canonical, legal_black_moves, status, Position, Side, Square, Status,
    SymmetryTransform,
};
use krk_core::data::{encode, split_indices, EncodingScheme, Record, SplitSpec};
use krk_core::eval::{average_from_overall, confusion_with_classes, metrics, ConfusionMatrix};
use krk_core::label::ClassLabel;
use proptest::prelude::*;

fn square() -> impl Strategy<Value = Square> {
    (0usize..64).prop_map(Square::from_index)
}

fn transform() -> impl Strategy<Value = SymmetryTransform> {
    prop::sample::select(SymmetryTransform::ALL.to_vec())
}

fn legal_position() -> impl Strategy<Value = Position> {
    (square(), square(), square())
        .prop_filter_map("illegal", |(wk, wr, bk)| Position::new(wk, wr, bk, Side::Black).ok())
}

fn compose(a: SymmetryTransform, b: SymmetryTransform, sq: Square) -> Square {
    b.apply(a.apply(sq))
}

proptest! {
    #[test]
    fn transforms_are_bijections_with_inverses(t in transform(), sq in square()) {
        prop_assert_eq!(t.inverse().apply(t.apply(sq)), sq);
        let image: std::collections::HashSet<Square> = Square::all().map(|s| t.apply(s)).collect();
        prop_assert_eq!(image.len(), 64);
    }

    #[test]
    fn group_is_closed(a in transform(), b in transform()) {
        let closed = SymmetryTransform::ALL
            .iter()
            .any(|&c| Square::all().all(|s| compose(a, b, s) == c.apply(s)));
        prop_assert!(closed);
    }

    #[test]
    fn transforms_preserve_adjacency(t in transform(), a in square(), b in square()) {
        prop_assert_eq!(is_adjacent(a, b), is_adjacent(t.apply(a), t.apply(b)));
    }

    #[test]
    fn canonicalization_is_idempotent_and_orbit_invariant(p in legal_position(), t in transform()) {
        let (c, via) = canonicalize(&p);
        prop_assert_eq!(p.transform(via), c);
        prop_assert!(is_canonical(&c));
        prop_assert_eq!(canonicalize(&c), (c, SymmetryTransform::Identity));
        prop_assert_eq!(canonicalize(&p.transform(t)).0, c);
    }

    #[test]
    fn status_and_moves_commute_with_symmetry(p in legal_position(), t in transform()) {
        let q = p.transform(t);
        prop_assert_eq!(status(&p), status(&q));
        prop_assert_eq!(p.black_in_check(), q.black_in_check());
        let mp = legal_black_moves(&p);
        let mq = legal_black_moves(&q);
        prop_assert_eq!(mp.captures_rook, mq.captures_rook);
        let mut mapped: Vec<Square> = mp.destinations.iter().map(|&s| t.apply(s)).collect();
        mapped.sort();
        prop_assert_eq!(mapped, mq.destinations);
    }

    #[test]
    fn black_never_steps_next_to_the_white_king(p in legal_position()) {
        let moves = legal_black_moves(&p);
        for d in &moves.destinations {
            prop_assert!(!is_adjacent(*d, p.wk));
            prop_assert!(*d != p.wk && *d != p.wr);
        }
        match status(&p) {
            Status::Checkmate => prop_assert!(p.black_in_check() && moves.is_empty()),
            Status::Stalemate => prop_assert!(!p.black_in_check() && moves.is_empty()),
            Status::Ongoing => prop_assert!(!moves.is_empty()),
        }
    }

    #[test]
    fn adjacent_kings_are_rejected(wk in square(), wr in square(), bk in square()) {
        let res = Position::new(wk, wr, bk, Side::Black);
        if is_adjacent(wk, bk) {
            prop_assert!(res.is_err());
        }
        if let Ok(p) = res {
            prop_assert!(!is_adjacent(p.wk, p.bk));
        }
    }

    #[test]
    fn micro_metrics_equal_overall_accuracy(
        pairs in prop::collection::vec((0usize..18, 0usize..18), 1..400),
    ) {
        let (truth, pred): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
        let cm = confusion_with_classes(18, &truth, &pred).unwrap();
        let m = metrics(&cm).unwrap();
        let correct = truth.iter().zip(&pred).filter(|(a, b)| a == b).count();
        prop_assert_eq!(m.overall_accuracy, correct as f64 / truth.len() as f64);
        prop_assert_eq!(m.micro_precision, m.overall_accuracy);
        prop_assert_eq!(m.micro_recall, m.overall_accuracy);
        prop_assert!((m.average_accuracy - average_from_overall(m.overall_accuracy, 18)).abs() < 1e-12);
    }

    #[test]
    fn metrics_ignore_class_order(
        pairs in prop::collection::vec((0usize..6, 0usize..6), 1..200),
        perm in Just((0..6).collect::<Vec<usize>>()).prop_shuffle(),
    ) {
        let (truth, pred): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
        let cm = confusion_with_classes(6, &truth, &pred).unwrap();
        let a = metrics(&cm).unwrap();
        let b = metrics(&cm.permuted(&perm)).unwrap();
        let close = |x: Option<f64>, y: Option<f64>| match (x, y) {
            (Some(x), Some(y)) => (x - y).abs() < 1e-12,
            (None, None) => true,
            _ => false,
        };
        for (x, y) in a.values().into_iter().zip(b.values()) {
            prop_assert!(close(x, y), "{:?} vs {:?}", x, y);
        }
    }

    #[test]
    fn split_partitions_rows(
        labels in prop::collection::vec(0usize..5, 20..300),
        fraction in 0.2f64..0.8,
        seed in any::<u64>(),
        stratified in any::<bool>(),
    ) {
        let spec = SplitSpec { train_fraction: fraction, seed, stratified };
        let Ok((train, test)) = split_indices(&labels, &spec) else {
            // a class too small for its share is reported, never dropped
            prop_assert!(stratified);
            return Ok(());
        };
        prop_assert_eq!(train.len(), (labels.len() as f64 * fraction).floor() as usize);
        let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
        prop_assert_eq!(split_indices(&labels, &spec).unwrap(), (train.clone(), test));
        if stratified {
            for c in 0..5 {
                let n = labels.iter().filter(|&&l| l == c).count() as f64;
                let got = train.iter().filter(|&&i| labels[i] == c).count() as f64;
                prop_assert!((got - n * fraction).abs() <= 1.0 + 1e-9);
            }
        }
    }

    #[test]
    fn ordinal_minmax_decodes_exactly(ps in prop::collection::vec(legal_position(), 2..40)) {
        let records: Vec<Record> = ps.iter().map(|p| Record::new(p, ClassLabel::from_index(0).unwrap())).collect();
        let m = encode(&records, EncodingScheme::ORDINAL_MINMAX).unwrap();
        for (i, r) in records.iter().enumerate() {
            let row = m.row(i);
            prop_assert!(row.iter().all(|&v| (0.0..=1.0).contains(&v)));
            prop_assert_eq!(m.encoder.decode_ordinal(row), Some(r.attributes()));
        }
    }

    #[test]
    fn encodings_have_declared_widths(p in legal_position()) {
        let records = [Record::new(&p, ClassLabel::from_index(3).unwrap())];
        for scheme in [EncodingScheme::ORDINAL_MINMAX, EncodingScheme::ONE_HOT, EncodingScheme::MIXED_MINMAX] {
            let m = encode(&records, scheme).unwrap();
            prop_assert_eq!(m.n_cols, scheme.width());
            prop_assert_eq!(m.encoder.encode_position(&p), m.row(0).to_vec());
        }
        let one_hot = encode(&records, EncodingScheme::ONE_HOT).unwrap();
        prop_assert_eq!(one_hot.row(0).iter().sum::<f64>(), 6.0);
    }
}

#[test]
fn published_metric_pairs_satisfy_identity() {
    // (correct, total) counts reproducing each published overall accuracy
    for (overall, average) in [
        (0.321255, 0.924584),
        (0.496376, 0.944042),
        (0.622668, 0.958074),
        (0.793038, 0.977004),
    ] {
        let total = 8417u64;
        let correct = (overall * total as f64).round() as u64;
        let mut cm = ConfusionMatrix::new(18);
        cm.add(0, 0, correct);
        cm.add(1, 0, total - correct);
        let m = metrics(&cm).unwrap();
        assert!((m.overall_accuracy - overall).abs() < 5e-7, "{}", m.overall_accuracy);
        assert!(
            (m.average_accuracy - average).abs() < 5e-7,
            "{} vs {average}",
            m.average_accuracy
        );
    }
}
