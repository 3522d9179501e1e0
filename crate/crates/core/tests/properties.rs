use acrostic_core::corpus::{
    build_vocabulary_from_lines, split_into_training_poems, tokenize, RawDocument, SourceTag, Vocabulary, SPECIALS,
};
use acrostic_core::decode::{force_line_boundaries, scheme_for};
use acrostic_core::embed::{char_onehot_block, knn_with_initial, EmbeddingTable};
use acrostic_core::net::{log_softmax, softmax, softmax_masked};
use acrostic_core::seed::derive_seed;
use proptest::collection::vec;
use proptest::prelude::*;

fn logits() -> impl Strategy<Value = Vec<f64>> {
    vec(-30.0f64..30.0, 1..20)
}

proptest! {
    #[test]
    fn softmax_is_a_distribution(x in logits()) {
        let p = softmax(&x);
        prop_assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let lp = log_softmax(&x);
        for (a, b) in p.iter().zip(&lp) {
            prop_assert!((a.ln() - b).abs() < 1e-9 || *a == 0.0);
        }
    }

    #[test]
    fn masked_softmax_zeroes_masked_entries(x in logits(), bits in vec(any::<bool>(), 20)) {
        let mask: Vec<bool> = bits[..x.len()].to_vec();
        match softmax_masked(&x, &mask) {
            Ok(p) => {
                prop_assert!(mask.iter().any(|&m| m));
                prop_assert!(p.iter().zip(&mask).all(|(v, &m)| m || *v == 0.0));
                prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
            Err(_) => prop_assert!(mask.iter().all(|&m| !m)),
        }
    }

    #[test]
    fn tokenize_is_stable_under_rejoin(s in "[a-zA-Z0-9 ,.;:!?'()-]{0,40}") {
        let t = tokenize(&s);
        prop_assert!(t.iter().all(|w| !w.is_empty() && !w.contains(' ')));
        prop_assert_eq!(tokenize(&t.join(" ")), t);
    }

    #[test]
    fn split_poems_have_four_to_eight_lines(
        lines in vec(prop_oneof!["", "[a-c]{1,3}( [a-c]{1,3}){0,3} [.,;]?"], 1..25)
    ) {
        let doc = RawDocument { lines, topic: Some("t".into()), source_tag: SourceTag::KnownTopic };
        for p in split_into_training_poems(&doc) {
            prop_assert!((4..=8).contains(&p.n_lines()));
            prop_assert!(p.lines.iter().all(|l| !l.is_empty()));
            prop_assert_eq!(p.topic.as_deref(), Some("t"));
        }
    }

    #[test]
    fn vocabulary_round_trips(words in vec("[a-e]{1,3}", 0..60), max in 0usize..10) {
        let lines = vec![words.clone()];
        let v = build_vocabulary_from_lines(lines.iter(), max);
        prop_assert!(v.len() <= SPECIALS.len() + max);
        for (i, s) in SPECIALS.iter().enumerate() {
            prop_assert_eq!(v.id(s), Some(i));
        }
        for (i, t) in v.tokens().iter().enumerate() {
            prop_assert_eq!(v.encode(t), i);
        }
        for w in &words {
            let id = v.encode(w);
            prop_assert!(v.token(id) == w || id == v.id(SPECIALS[4]).unwrap());
        }
    }

    #[test]
    fn char_block_rows_are_one_hot(w in "[a-z]{1,8}") {
        let b = char_onehot_block(&w).unwrap();
        for (r, row) in b.rows().iter().enumerate() {
            prop_assert_eq!(row.iter().map(|&x| u32::from(x)).sum::<u32>(), 1);
            prop_assert_eq!(b.is_pad(r), r >= w.len());
        }
        prop_assert_eq!(b.flatten().len(), 216);
    }

    #[test]
    fn knn_respects_letter_order_and_k(
        vecs in vec(vec(-1.0f64..1.0, 3), 1..30),
        names in vec("[abc][a-z]{0,2}", 30),
        k in 1usize..6,
    ) {
        let mut table = EmbeddingTable::new(3);
        let mut words = Vec::new();
        for (i, v) in vecs.iter().enumerate() {
            let w = format!("{}{i}", names[i]);
            table.insert(&w, v.clone()).unwrap();
            words.push(w);
        }
        table.insert("topic", vec![0.3, -0.2, 0.9]).unwrap();
        let vocab = Vocabulary::from_tokens(words);
        let got = knn_with_initial("topic", 'a', k, &vocab, &table).unwrap();
        prop_assert!(got.len() <= k);
        prop_assert!(got.iter().all(|(w, s)| w.starts_with('a') && (-1.0..=1.0).contains(s)));
        prop_assert!(got.windows(2).all(|p| p[0].1 > p[1].1 || (p[0].1 == p[1].1 && p[0].0 < p[1].0)));
    }

    #[test]
    fn forced_boundaries_shape_lines(
        stream in vec(prop_oneof![Just("a"), Just(","), Just(";"), Just("."), Just("</s>"), Just("<eol>")], 0..60),
        target in 1usize..9,
        cap in 1usize..16,
    ) {
        let stream: Vec<String> = stream.into_iter().map(String::from).collect();
        let out = force_line_boundaries(&stream, target, cap);
        let lines: Vec<&[String]> = out.split(|t| t == "<eol>" || t == "</s>").collect();
        let closed = out.iter().filter(|t| *t == "<eol>" || *t == "</s>").count();
        prop_assert!(closed <= target);
        prop_assert!(lines[..closed].iter().all(|l| !l.is_empty() && l.len() <= cap));
        prop_assert_eq!(out.iter().filter(|t| *t == "</s>").count(), usize::from(closed == target));
        if closed == target {
            prop_assert_eq!(out.last().map(String::as_str), Some("</s>"));
            let last = lines[closed - 1].last().unwrap();
            prop_assert!(last != "," && last != ";");
        }
    }

    #[test]
    fn seeds_are_deterministic(root in any::<u64>(), a in "[a-z]{1,8}", b in "[a-z]{1,8}") {
        prop_assert_eq!(derive_seed(root, &a), derive_seed(root, &a));
        if a != b {
            prop_assert_ne!(derive_seed(root, &a), derive_seed(root, &b));
        }
    }
}

#[test]
fn substitution_slots_follow_their_partner() {
    for n in 4..=8 {
        let s = scheme_for(n).unwrap();
        let letters: Vec<char> = s.letters.chars().collect();
        assert_eq!(letters.len(), n);
        for slot in s.substitution_slots() {
            let partner = s.partner(slot).unwrap();
            assert!(partner < slot);
            assert_eq!(letters[partner - 1], letters[slot - 1]);
        }
    }
    assert!(scheme_for(3).is_err() && scheme_for(9).is_err());
}
