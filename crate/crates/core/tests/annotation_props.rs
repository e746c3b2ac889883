use omrkit_core::annotation::{
    dataset_from_json, dataset_to_json, parse_label, serialize_label, Annotation, BBox, Dataset, Label, Page, Rational,
};
use omrkit_core::imbalance::{class_histogram, ClassStats};
use proptest::prelude::*;
use std::collections::BTreeMap;

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Independent canonicalizer for one rational token.
fn canonical_rational(tok: &str) -> String {
    let (neg, body) = match tok.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, tok),
    };
    let (n, d) = match body.split_once('/') {
        Some((n, d)) => (n.parse::<u64>().unwrap(), d.parse::<u64>().unwrap()),
        None => (body.parse::<u64>().unwrap(), 1),
    };
    let g = gcd(n, d).max(1);
    let (n, d) = (n / g, d / g);
    let sign = if neg && n != 0 { "-" } else { "" };
    if d == 1 {
        format!("{sign}{n}")
    } else {
        format!("{sign}{n}/{d}")
    }
}

fn canonical_label(s: &str) -> String {
    let f: Vec<&str> = s.split('.').collect();
    match f.len() {
        1 => f[0].to_string(),
        2 => format!("{}.{}", f[0], canonical_rational(f[1])),
        4 => format!(
            "{}.{}.{}.{}",
            f[0],
            canonical_rational(f[1]),
            f[2].parse::<i64>().unwrap(),
            canonical_rational(f[3])
        ),
        _ => unreachable!(),
    }
}

fn class_name() -> impl Strategy<Value = String> {
    "[A-Za-z][A-Za-z0-9_]{0,12}"
}

fn rational_token() -> impl Strategy<Value = String> {
    (any::<bool>(), 0u64..10_000, prop::option::of(1u64..10_000)).prop_map(|(neg, n, d)| {
        let sign = if neg { "-" } else { "" };
        match d {
            Some(d) => format!("{sign}{n}/{d}"),
            None => format!("{sign}{n}"),
        }
    })
}

fn label_string() -> impl Strategy<Value = String> {
    prop_oneof![
        class_name(),
        (class_name(), rational_token()).prop_map(|(c, o)| format!("{c}.{o}")),
        (class_name(), rational_token(), -40i64..40, rational_token())
            .prop_map(|(c, o, p, d)| format!("{c}.{o}.{p}.{d}")),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn label_round_trip_is_canonical(s in label_string()) {
        let parsed = parse_label(&s).unwrap();
        prop_assert_eq!(serialize_label(&parsed), canonical_label(&s));
        prop_assert_eq!(parse_label(&serialize_label(&parsed)).unwrap(), parsed);
    }

    #[test]
    fn three_field_labels_are_rejected(c in class_name(), a in rational_token(), b in rational_token()) {
        let s = format!("{c}.{a}.{b}");
        prop_assert!(parse_label(&s).is_err());
    }

    #[test]
    fn scaled_fractions_are_equal(n in -5000i64..5000, d in 1i64..5000, k in 1i64..50) {
        let a: Rational = format!("{n}/{d}").parse().unwrap();
        let b: Rational = format!("{}/{}", k * n, k * d).parse().unwrap();
        prop_assert_eq!(a, b);
    }
}

fn bbox_in(w: u32, h: u32) -> impl Strategy<Value = BBox> {
    (0.0..w as f64, 0.0..h as f64, 0.0..1.0f64, 0.0..1.0f64).prop_map(move |(x0, y0, fw, fh)| {
        let x1 = x0 + (w as f64 - x0) * fw;
        let y1 = y0 + (h as f64 - y0) * fh;
        BBox::new(x0, y0, x1, y1).unwrap().quantized()
    })
}

fn dataset() -> impl Strategy<Value = Dataset> {
    let registry = vec!["clefG".to_string(), "noteheadBlack".to_string(), "rest8th".to_string()];
    let labels = prop_oneof![
        Just(Label::bare("rest8th").unwrap()),
        (0i64..16, 1i64..8).prop_map(|(n, d)| Label::with_onset("clefG", Rational::new(n, d).unwrap()).unwrap()),
        (0i64..16, -6i64..6).prop_map(|(n, p)| {
            Label::note(
                "noteheadBlack",
                Rational::new(n, 4).unwrap(),
                p,
                Rational::new(1, 4).unwrap(),
            )
            .unwrap()
        }),
    ];
    let page = (1u32..500, 1u32..500).prop_flat_map(move |(w, h)| {
        (
            Just((w, h)),
            prop::collection::vec((labels.clone(), bbox_in(w, h)), 0..6),
            prop::option::of("[a-z]{1,8}\\.pgm"),
        )
    });
    prop::collection::vec(page, 0..4).prop_map(move |pages| {
        let pages = pages
            .into_iter()
            .enumerate()
            .map(|(i, ((w, h), anns, image))| {
                let mut p = Page::new(format!("p{i}"), w, h);
                p.image = image;
                p.annotations = anns.into_iter().map(|(l, b)| Annotation::new(l, b)).collect();
                p
            })
            .collect();
        Dataset::new(registry.clone(), pages).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn dataset_round_trip(d in dataset()) {
        let text = dataset_to_json(&d).unwrap();
        let back = dataset_from_json(&text).unwrap();
        prop_assert_eq!(&back, &d);
        prop_assert_eq!(dataset_to_json(&back).unwrap(), text);
    }

    #[test]
    fn histogram_ignores_order(d in dataset(), seed in any::<u64>()) {
        let mut shuffled = d.clone();
        shuffled.pages.reverse();
        for (i, p) in shuffled.pages.iter_mut().enumerate() {
            if (seed >> (i % 64)) & 1 == 1 {
                p.annotations.reverse();
            }
        }
        prop_assert_eq!(class_histogram(&d), class_histogram(&shuffled));
    }
}

fn stats() -> impl Strategy<Value = ClassStats> {
    prop::collection::btree_map("[a-h]", 0u64..200, 1..8).prop_filter_map("non-empty", |m: BTreeMap<String, u64>| {
        (m.values().sum::<u64>() > 0).then(|| ClassStats::from_counts(m))
    })
}

proptest! {
    #[test]
    fn coverage_is_monotone_and_complete(s in stats()) {
        let mut prev = 0.0;
        for k in 1..=s.ranking().len() {
            let c = s.coverage_topk(k).unwrap();
            prop_assert!(c >= prev);
            prev = c;
        }
        prop_assert_eq!(s.coverage_topk(s.ranking().len()).unwrap(), 1.0);
        prop_assert_eq!(s.coverage_topk(100).unwrap(), 1.0);
    }

    #[test]
    fn rare_sets_are_nested(s in stats(), a in 0.01..0.99f64, b in 0.01..0.99f64) {
        let (h1, h2) = if a <= b { (a, b) } else { (b, a) };
        let r1 = s.select_rare(h1).unwrap();
        let r2 = s.select_rare(h2).unwrap();
        prop_assert!(r2.iter().all(|c| r1.contains(c)));
    }

    #[test]
    fn ranking_orders_counts(s in stats()) {
        prop_assert_eq!(s.total(), s.counts().values().sum::<u64>());
        for w in s.ranking().windows(2) {
            let (a, b) = (s.count(&w[0]), s.count(&w[1]));
            prop_assert!(a > b || (a == b && w[0] < w[1]));
        }
    }
}
