use proptest::prelude::*;

use rawq_core::sql::{parse, queries, SqlError};

fn column() -> impl Strategy<Value = String> {
    prop::sample::select(vec!["l_orderkey", "l_quantity", "o_orderdate", "c_name", "x1"]).prop_map(String::from)
}

fn scalar() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        column(),
        (0i64..1000).prop_map(|v| v.to_string()),
        (0u32..1000).prop_map(|v| format!("{}.5", v)),
        Just("'abc'".to_string()),
        Just("date '1995-03-15'".to_string()),
    ];
    leaf.prop_recursive(3, 12, 2, |inner| {
        (inner.clone(), prop::sample::select(vec!["+", "-", "*", "/"]), inner)
            .prop_map(|(a, op, b)| format!("({a} {op} {b})"))
    })
}

fn query() -> impl Strategy<Value = String> {
    let item = prop_oneof![
        scalar(),
        scalar().prop_map(|e| format!("sum({e}) as s")),
        Just("count(*)".to_string()),
    ];
    (
        prop::collection::vec(item, 1..4),
        prop::collection::vec(prop::sample::select(vec!["lineitem", "orders", "customer"]), 1..3),
        prop::collection::vec(
            (scalar(), prop::sample::select(vec!["=", "<", "<=", ">", ">=", "<>"]), scalar()),
            0..3,
        ),
        prop::option::of(1u64..100),
    )
        .prop_map(|(items, tables, preds, limit)| {
            let mut sql = format!("select {} from {}", items.join(", "), tables.join(", "));
            if !preds.is_empty() {
                let p: Vec<String> = preds.iter().map(|(a, op, b)| format!("{a} {op} {b}")).collect();
                sql.push_str(&format!(" where {}", p.join(" and ")));
            }
            if let Some(n) = limit {
                sql.push_str(&format!(" limit {n}"));
            }
            sql
        })
}

proptest! {
    #[test]
    fn canonical_text_round_trips(sql in query()) {
        let (q, meta) = parse(&sql).unwrap();
        let text = q.to_string();
        let (again, meta2) = parse(&text).unwrap();
        prop_assert_eq!(&q, &again);
        prop_assert_eq!(meta, meta2);
        prop_assert_eq!(text, again.to_string());
    }

    #[test]
    fn arbitrary_input_never_panics(s in "\\PC{0,80}") {
        let _ = parse(&s);
    }

    #[test]
    fn truncated_queries_fail_cleanly(cut in 1usize..60) {
        let sql = queries::Q3;
        let end = sql.char_indices().nth(cut).map_or(sql.len(), |(i, _)| i);
        if let Err(e) = parse(&sql[..end]) {
            let is_syntax = matches!(e, SqlError::Syntax { .. });
            prop_assert!(is_syntax, "{}", e);
        }
    }
}

#[test]
fn bundled_queries_parse() {
    for (_, sql) in queries::TPCH_QUERIES.iter().chain(queries::UDF_QUERIES.iter()) {
        let (q, _) = parse(sql).unwrap();
        assert_eq!(parse(&q.to_string()).unwrap().0, q);
    }
}
