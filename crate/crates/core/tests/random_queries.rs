//! Random select-project-join-aggregate queries over a small TPC-H
//! instance, checked against the reference evaluator.
mod common;

use std::sync::OnceLock;

use proptest::prelude::*;
use tempfile::TempDir;

use common::tpch_engine;
use rawq_core::bench::verify_query;
use rawq_core::datagen::tpch::generate_tpch;
use rawq_core::Engine;

struct Fixture {
    _dir: TempDir,
    engine: Engine,
}

fn engine() -> &'static Engine {
    static F: OnceLock<Fixture> = OnceLock::new();
    &F.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        generate_tpch(dir.path(), 0.005, 3).unwrap();
        // small partitions so joins span many of them
        let engine = tpch_engine(dir.path(), 3, 97);
        Fixture { _dir: dir, engine }
    })
    .engine
}

#[derive(Debug, Clone, Copy)]
enum Col {
    Int(&'static str, i64, i64),
    Float(&'static str, f64, f64),
    Date(&'static str),
    Text(&'static str, &'static [&'static str]),
}

impl Col {
    fn name(self) -> &'static str {
        match self {
            Col::Int(n, ..) | Col::Float(n, ..) | Col::Date(n) | Col::Text(n, _) => n,
        }
    }

    fn numeric(self) -> bool {
        matches!(self, Col::Int(..) | Col::Float(..))
    }
}

const LINEITEM: &[Col] = &[
    Col::Int("l_orderkey", 1, 30000),
    Col::Float("l_quantity", 1.0, 50.0),
    Col::Float("l_extendedprice", 900.0, 100000.0),
    Col::Float("l_discount", 0.0, 0.1),
    Col::Date("l_shipdate"),
    Col::Text("l_returnflag", &["A", "N", "R"]),
];
const ORDERS: &[Col] = &[
    Col::Int("o_orderkey", 1, 30000),
    Col::Int("o_custkey", 1, 750),
    Col::Date("o_orderdate"),
    Col::Float("o_totalprice", 800.0, 500000.0),
    Col::Int("o_shippriority", 0, 1),
];
const CUSTOMER: &[Col] = &[
    Col::Int("c_custkey", 1, 750),
    Col::Int("c_nationkey", 0, 24),
    Col::Float("c_acctbal", -999.0, 9999.0),
    Col::Text("c_mktsegment", &["AUTOMOBILE", "BUILDING", "FURNITURE", "HOUSEHOLD", "MACHINERY"]),
];

/// Connected table sets and the equalities that join them.
const FROMS: &[(&[&str], &[&str])] = &[
    (&["lineitem"], &[]),
    (&["orders"], &[]),
    (&["customer"], &[]),
    (&["orders", "lineitem"], &["l_orderkey = o_orderkey"]),
    (&["lineitem", "orders"], &["o_orderkey = l_orderkey"]),
    (&["customer", "orders"], &["c_custkey = o_custkey"]),
    (
        &["customer", "orders", "lineitem"],
        &["c_custkey = o_custkey", "l_orderkey = o_orderkey"],
    ),
];

fn columns(tables: &[&str]) -> Vec<Col> {
    tables
        .iter()
        .flat_map(|t| match *t {
            "lineitem" => LINEITEM,
            "orders" => ORDERS,
            _ => CUSTOMER,
        })
        .copied()
        .collect()
}

fn literal(c: Col, u: f64) -> String {
    match c {
        Col::Int(_, lo, hi) => format!("{}", lo + ((hi - lo) as f64 * u) as i64),
        Col::Float(_, lo, hi) => format!("{:.2}", lo + (hi - lo) * u),
        Col::Date(_) => {
            let day = (u * 2400.0) as i64;
            let d = chrono::NaiveDate::from_ymd_opt(1992, 1, 1).unwrap() + chrono::Duration::days(day);
            format!("date '{d}'")
        }
        Col::Text(_, vals) => format!("'{}'", vals[((vals.len() as f64 * u) as usize).min(vals.len() - 1)]),
    }
}

#[derive(Debug, Clone)]
struct Choices {
    from: usize,
    preds: Vec<(usize, usize, f64)>,
    grouped: bool,
    group_cols: Vec<usize>,
    items: Vec<(usize, usize)>,
    order: Option<(usize, bool)>,
    limit: Option<u64>,
}

fn choices() -> impl Strategy<Value = Choices> {
    (
        0..FROMS.len(),
        prop::collection::vec((any::<usize>(), 0usize..6, 0.0..1.0f64), 0..3),
        any::<bool>(),
        prop::collection::vec(any::<usize>(), 1..3),
        prop::collection::vec((any::<usize>(), 0usize..6), 1..4),
        prop::option::of((any::<usize>(), any::<bool>())),
        prop::option::of(1u64..30),
    )
        .prop_map(|(from, preds, grouped, group_cols, items, order, limit)| Choices {
            from,
            preds,
            grouped,
            group_cols,
            items,
            order,
            limit,
        })
}

fn render(ch: &Choices) -> String {
    let (tables, joins) = FROMS[ch.from];
    let cols = columns(tables);
    let numeric: Vec<Col> = cols.iter().copied().filter(|c| c.numeric()).collect();
    let mut conds: Vec<String> = joins.iter().map(|s| s.to_string()).collect();
    for &(c, op, u) in &ch.preds {
        let col = cols[c % cols.len()];
        let op = ["=", "<", "<=", ">", ">=", "<>"][op];
        conds.push(format!("{} {op} {}", col.name(), literal(col, u)));
    }
    let mut select = Vec::new();
    let mut aliases = Vec::new();
    let mut group_by = Vec::new();
    if ch.grouped {
        for &g in &ch.group_cols {
            let name = cols[g % cols.len()].name();
            if !group_by.contains(&name) {
                group_by.push(name);
                select.push(name.to_string());
                aliases.push(name.to_string());
            }
        }
        for (i, &(c, f)) in ch.items.iter().enumerate() {
            let arg = numeric[c % numeric.len()].name();
            let func = ["sum", "count", "min", "max", "avg", "median"][f];
            let alias = format!("a{i}");
            select.push(if func == "count" {
                format!("count(*) as {alias}")
            } else if i % 2 == 1 {
                format!("{func}({arg} * 2 - 1) as {alias}")
            } else {
                format!("{func}({arg}) as {alias}")
            });
            aliases.push(alias);
        }
    } else {
        for &(c, f) in &ch.items {
            let col = cols[c % cols.len()].name();
            if f == 5 && cols[c % cols.len()].numeric() {
                select.push(format!("{col} + 1 as p{}", select.len()));
                aliases.push(format!("p{}", aliases.len()));
            } else if !aliases.iter().any(|a| a == col) {
                select.push(col.to_string());
                aliases.push(col.to_string());
            }
        }
    }
    let mut sql = format!("select {} from {}", select.join(", "), tables.join(", "));
    if !conds.is_empty() {
        sql.push_str(&format!(" where {}", conds.join(" and ")));
    }
    if !group_by.is_empty() {
        sql.push_str(&format!(" group by {}", group_by.join(", ")));
    }
    if let Some((o, desc)) = ch.order {
        sql.push_str(&format!(" order by {}{}", aliases[o % aliases.len()], if desc { " desc" } else { "" }));
    }
    if let Some(n) = ch.limit {
        sql.push_str(&format!(" limit {n}"));
    }
    sql
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 100, ..ProptestConfig::default() })]

    #[test]
    fn engine_agrees_with_reference(ch in choices()) {
        let sql = render(&ch);
        if let Err(e) = verify_query(engine(), "random", &sql) {
            return Err(TestCaseError::fail(format!("{sql}\n{e}")));
        }
    }
}
