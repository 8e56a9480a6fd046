//! Deterministic TPC-H-schema data at desk scale (SF <= 0.1).
//!
//! Value domains follow the benchmark's conventions closely enough for the
//! standard query predicates to be selective in the usual way; text fields
//! are short filler. Files are pipe-delimited `.tbl` with a trailing `|`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::DatagenError;
use crate::storage::{CatalogConfig, TableConfig};
use crate::value::{format_date, parse_date, DataType};

struct TableDef {
    name: &'static str,
    columns: &'static [&'static str],
    /// One type code per column: i=int64, f=float64, d=date, s=string.
    types: &'static str,
    index: Option<&'static str>,
}

const TABLES: &[TableDef] = &[
    TableDef {
        name: "region",
        columns: &["r_regionkey", "r_name", "r_comment"],
        types: "iss",
        index: Some("r_regionkey"),
    },
    TableDef {
        name: "nation",
        columns: &["n_nationkey", "n_name", "n_regionkey", "n_comment"],
        types: "isis",
        index: Some("n_nationkey"),
    },
    TableDef {
        name: "supplier",
        columns: &[
            "s_suppkey", "s_name", "s_address", "s_nationkey", "s_phone", "s_acctbal", "s_comment",
        ],
        types: "issisfs",
        index: Some("s_suppkey"),
    },
    TableDef {
        name: "customer",
        columns: &[
            "c_custkey", "c_name", "c_address", "c_nationkey", "c_phone", "c_acctbal",
            "c_mktsegment", "c_comment",
        ],
        types: "issisfss",
        index: Some("c_custkey"),
    },
    TableDef {
        name: "part",
        columns: &[
            "p_partkey", "p_name", "p_mfgr", "p_brand", "p_type", "p_size", "p_container",
            "p_retailprice", "p_comment",
        ],
        types: "issssisfs",
        index: Some("p_partkey"),
    },
    TableDef {
        name: "partsupp",
        columns: &["ps_partkey", "ps_suppkey", "ps_availqty", "ps_supplycost", "ps_comment"],
        types: "iiifs",
        index: None,
    },
    TableDef {
        name: "orders",
        columns: &[
            "o_orderkey", "o_custkey", "o_orderstatus", "o_totalprice", "o_orderdate",
            "o_orderpriority", "o_clerk", "o_shippriority", "o_comment",
        ],
        types: "iisfdssis",
        index: Some("o_orderkey"),
    },
    TableDef {
        name: "lineitem",
        columns: &[
            "l_orderkey", "l_partkey", "l_suppkey", "l_linenumber", "l_quantity",
            "l_extendedprice", "l_discount", "l_tax", "l_returnflag", "l_linestatus",
            "l_shipdate", "l_commitdate", "l_receiptdate", "l_shipinstruct", "l_shipmode",
            "l_comment",
        ],
        types: "iiiiffffssdddsss",
        index: Some("l_orderkey"),
    },
];

pub const TABLE_NAMES: [&str; 8] = [
    "region", "nation", "supplier", "customer", "part", "partsupp", "orders", "lineitem",
];

/// Largest scale factor the bundled generator accepts.
pub const MAX_SCALE_FACTOR: f64 = 0.1;

fn def(table: &str) -> Option<&'static TableDef> {
    TABLES.iter().find(|t| t.name == table)
}

/// Column names of a TPC-H table, used to name headerless `.tbl` columns.
pub fn table_columns(table: &str) -> Option<&'static [&'static str]> {
    def(table).map(|t| t.columns)
}

pub fn table_types(table: &str) -> Option<Vec<DataType>> {
    def(table).map(|t| {
        t.types
            .chars()
            .map(|c| match c {
                'i' => DataType::Int64,
                'f' => DataType::Float64,
                'd' => DataType::Date,
                _ => DataType::Str,
            })
            .collect()
    })
}

/// Catalog entries for generated tables under `dir` (paths are relative).
pub fn catalog_config() -> CatalogConfig {
    let tables = TABLES
        .iter()
        .map(|t| {
            let types = table_types(t.name).unwrap();
            let columns = t
                .columns
                .iter()
                .zip(types)
                .map(|(c, ty)| format!("{c}:{}", ty.name()))
                .collect();
            (
                t.name.to_string(),
                TableConfig {
                    path: format!("{}.tbl", t.name),
                    format: "tbl".to_string(),
                    header: None,
                    index: t.index.map(str::to_string),
                    columns: Some(columns),
                },
            )
        })
        .collect::<BTreeMap<_, _>>();
    CatalogConfig { tables }
}

const REGIONS: [&str; 5] = ["AFRICA", "AMERICA", "ASIA", "EUROPE", "MIDDLE EAST"];

const NATIONS: [(&str, i64); 25] = [
    ("ALGERIA", 0),
    ("ARGENTINA", 1),
    ("BRAZIL", 1),
    ("CANADA", 1),
    ("EGYPT", 4),
    ("ETHIOPIA", 0),
    ("FRANCE", 3),
    ("GERMANY", 3),
    ("INDIA", 2),
    ("INDONESIA", 2),
    ("IRAN", 4),
    ("IRAQ", 4),
    ("JAPAN", 2),
    ("JORDAN", 4),
    ("KENYA", 0),
    ("MOROCCO", 0),
    ("MOZAMBIQUE", 0),
    ("PERU", 1),
    ("CHINA", 2),
    ("ROMANIA", 3),
    ("SAUDI ARABIA", 4),
    ("VIETNAM", 2),
    ("RUSSIA", 3),
    ("UNITED KINGDOM", 3),
    ("UNITED STATES", 1),
];

const SEGMENTS: [&str; 5] = ["AUTOMOBILE", "BUILDING", "FURNITURE", "MACHINERY", "HOUSEHOLD"];
const PRIORITIES: [&str; 5] = ["1-URGENT", "2-HIGH", "3-MEDIUM", "4-NOT SPECIFIED", "5-LOW"];
const INSTRUCTIONS: [&str; 4] = ["DELIVER IN PERSON", "COLLECT COD", "NONE", "TAKE BACK RETURN"];
const MODES: [&str; 7] = ["REG AIR", "AIR", "RAIL", "SHIP", "TRUCK", "MAIL", "FOB"];
const CONTAINERS_A: [&str; 5] = ["SM", "LG", "MED", "JUMBO", "WRAP"];
const CONTAINERS_B: [&str; 8] = ["CASE", "BOX", "BAG", "JAR", "PKG", "PACK", "CAN", "DRUM"];
const TYPES_A: [&str; 6] = ["STANDARD", "SMALL", "MEDIUM", "LARGE", "ECONOMY", "PROMO"];
const TYPES_B: [&str; 5] = ["ANODIZED", "BURNISHED", "PLATED", "POLISHED", "BRUSHED"];
const TYPES_C: [&str; 5] = ["TIN", "NICKEL", "BRASS", "STEEL", "COPPER"];
const COLORS: [&str; 16] = [
    "almond", "azure", "blush", "chiffon", "coral", "cyan", "forest", "ghost", "ivory", "khaki",
    "lace", "linen", "navy", "olive", "peach", "tan",
];
const WORDS: [&str; 16] = [
    "carefully", "final", "deposits", "quickly", "regular", "ideas", "furiously", "express",
    "accounts", "blithely", "pending", "requests", "slyly", "ironic", "packages", "bold",
];

fn pick<'a>(rng: &mut ChaCha8Rng, xs: &[&'a str]) -> &'a str {
    xs[rng.random_range(0..xs.len())]
}

fn comment(rng: &mut ChaCha8Rng) -> String {
    let n = rng.random_range(2..=5);
    (0..n).map(|_| pick(rng, &WORDS)).collect::<Vec<_>>().join(" ")
}

fn address(rng: &mut ChaCha8Rng) -> String {
    const ALNUM: &[u8] = b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789";
    let n = rng.random_range(10..=25);
    (0..n)
        .map(|_| ALNUM[rng.random_range(0..ALNUM.len())] as char)
        .collect()
}

fn phone(rng: &mut ChaCha8Rng, nation: i64) -> String {
    format!(
        "{}-{}-{}-{}",
        nation + 10,
        rng.random_range(100..1000),
        rng.random_range(100..1000),
        rng.random_range(1000..10000)
    )
}

fn money(rng: &mut ChaCha8Rng, lo_cents: i64, hi_cents: i64) -> f64 {
    rng.random_range(lo_cents..=hi_cents) as f64 / 100.0
}

fn retail_price(partkey: i64) -> f64 {
    (90000 + (partkey / 10) % 20001 + 100 * (partkey % 1000)) as f64 / 100.0
}

/// Sparse order keys: eight consecutive keys in every block of 32.
pub fn order_key(i: u64) -> i64 {
    ((i / 8) * 32 + i % 8 + 1) as i64
}

/// Row counts for a scale factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TableSizes {
    pub supplier: u64,
    pub customer: u64,
    pub part: u64,
    pub orders: u64,
}

impl TableSizes {
    pub fn at(sf: f64) -> TableSizes {
        let n = |base: f64| ((base * sf).round() as u64).max(1);
        TableSizes {
            supplier: n(10_000.0),
            customer: n(150_000.0),
            part: n(200_000.0),
            orders: n(1_500_000.0),
        }
    }
}

struct Out {
    w: BufWriter<File>,
    path: String,
}

impl Out {
    fn create(dir: &Path, table: &str) -> Result<Out, DatagenError> {
        let path = dir.join(format!("{table}.tbl"));
        let file = File::create(&path)
            .map_err(|e| DatagenError::Io(format!("{}: {e}", path.display())))?;
        Ok(Out {
            w: BufWriter::new(file),
            path: path.display().to_string(),
        })
    }

    fn row(&mut self, fields: std::fmt::Arguments<'_>) -> Result<(), DatagenError> {
        writeln!(self.w, "{fields}|").map_err(|e| DatagenError::Io(format!("{}: {e}", self.path)))
    }

    fn finish(mut self) -> Result<(), DatagenError> {
        self.w
            .flush()
            .map_err(|e| DatagenError::Io(format!("{}: {e}", self.path)))
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Writes all eight tables plus `catalog.toml` into `dir`.
pub fn generate_tpch(dir: &Path, sf: f64, seed: u64) -> Result<TableSizes, DatagenError> {
    if !(sf > 0.0 && sf <= MAX_SCALE_FACTOR) {
        return Err(DatagenError::InvalidSpec(format!(
            "scale factor {sf} outside (0, {MAX_SCALE_FACTOR}]"
        )));
    }
    std::fs::create_dir_all(dir).map_err(|e| DatagenError::Io(format!("{}: {e}", dir.display())))?;
    let sizes = TableSizes::at(sf);

    let mut out = Out::create(dir, "region")?;
    let mut rng = stream(seed, 1);
    for (k, name) in REGIONS.iter().enumerate() {
        out.row(format_args!("{k}|{name}|{}", comment(&mut rng)))?;
    }
    out.finish()?;

    let mut out = Out::create(dir, "nation")?;
    for (k, (name, region)) in NATIONS.iter().enumerate() {
        out.row(format_args!("{k}|{name}|{region}|{}", comment(&mut rng)))?;
    }
    out.finish()?;

    let mut out = Out::create(dir, "supplier")?;
    let mut rng = stream(seed, 2);
    for k in 1..=sizes.supplier {
        let nation = rng.random_range(0..25i64);
        out.row(format_args!(
            "{k}|Supplier#{k:09}|{}|{nation}|{}|{:.2}|{}",
            address(&mut rng),
            phone(&mut rng, nation),
            money(&mut rng, -99_999, 999_999),
            comment(&mut rng)
        ))?;
    }
    out.finish()?;

    let mut out = Out::create(dir, "customer")?;
    let mut rng = stream(seed, 3);
    for k in 1..=sizes.customer {
        let nation = rng.random_range(0..25i64);
        out.row(format_args!(
            "{k}|Customer#{k:09}|{}|{nation}|{}|{:.2}|{}|{}",
            address(&mut rng),
            phone(&mut rng, nation),
            money(&mut rng, -99_999, 999_999),
            pick(&mut rng, &SEGMENTS),
            comment(&mut rng)
        ))?;
    }
    out.finish()?;

    let mut part = Out::create(dir, "part")?;
    let mut partsupp = Out::create(dir, "partsupp")?;
    let mut rng = stream(seed, 4);
    let s = sizes.supplier as i64;
    for k in 1..=sizes.part as i64 {
        let name: Vec<&str> = (0..5).map(|_| pick(&mut rng, &COLORS)).collect();
        let m = rng.random_range(1..=5);
        part.row(format_args!(
            "{k}|{}|Manufacturer#{m}|Brand#{m}{}|{} {} {}|{}|{} {}|{:.2}|{}",
            name.join(" "),
            rng.random_range(1..=5),
            pick(&mut rng, &TYPES_A),
            pick(&mut rng, &TYPES_B),
            pick(&mut rng, &TYPES_C),
            rng.random_range(1..=50),
            pick(&mut rng, &CONTAINERS_A),
            pick(&mut rng, &CONTAINERS_B),
            retail_price(k),
            comment(&mut rng)
        ))?;
        for i in 0..4i64 {
            let supp = (k + i * (s / 4 + (k - 1) / s)) % s + 1;
            partsupp.row(format_args!(
                "{k}|{supp}|{}|{:.2}|{}",
                rng.random_range(1..=9999),
                money(&mut rng, 100, 100_000),
                comment(&mut rng)
            ))?;
        }
    }
    part.finish()?;
    partsupp.finish()?;

    write_orders(dir, &sizes, seed)?;

    let config = catalog_config().to_text();
    let path = dir.join("catalog.toml");
    std::fs::write(&path, config).map_err(|e| DatagenError::Io(format!("{}: {e}", path.display())))?;
    Ok(sizes)
}

fn write_orders(dir: &Path, sizes: &TableSizes, seed: u64) -> Result<(), DatagenError> {
    let start = parse_date("1992-01-01").unwrap();
    let end = parse_date("1998-08-02").unwrap();
    let current = parse_date("1995-06-17").unwrap();
    let mut orders = Out::create(dir, "orders")?;
    let mut lineitem = Out::create(dir, "lineitem")?;
    let mut rng = stream(seed, 5);
    let ncust = sizes.customer as i64;
    let clerks = ((sizes.orders / 1500).max(1)) as i64;
    let mut lines = String::new();
    for i in 0..sizes.orders {
        let okey = order_key(i);
        // A third of the customers never order.
        let cust = loop {
            let c = rng.random_range(1..=ncust);
            if c % 3 != 0 || ncust < 3 {
                break c;
            }
        };
        let odate = rng.random_range(start..=end - 151);
        let n = rng.random_range(1..=7);
        let mut total = 0.0;
        let (mut all_f, mut all_o) = (true, true);
        lines.clear();
        for ln in 1..=n {
            let partkey = rng.random_range(1..=sizes.part as i64);
            let suppkey = rng.random_range(1..=sizes.supplier as i64);
            let qty = rng.random_range(1..=50) as f64;
            let price = ((qty * retail_price(partkey)) * 100.0).round() / 100.0;
            let disc = rng.random_range(0..=10) as f64 / 100.0;
            let tax = rng.random_range(0..=8) as f64 / 100.0;
            let ship = odate + rng.random_range(1..=121);
            let commit = odate + rng.random_range(30..=90);
            let receipt = ship + rng.random_range(1..=30);
            let flag = if receipt <= current {
                if rng.random_bool(0.5) { "R" } else { "A" }
            } else {
                "N"
            };
            let status = if ship > current { "O" } else { "F" };
            all_f &= status == "F";
            all_o &= status == "O";
            total += price * (1.0 + tax) * (1.0 - disc);
            use std::fmt::Write as _;
            let _ = writeln!(
                lines,
                "{okey}|{partkey}|{suppkey}|{ln}|{qty:.0}|{price:.2}|{disc:.2}|{tax:.2}|{flag}|{status}|{}|{}|{}|{}|{}|{}|",
                format_date(ship),
                format_date(commit),
                format_date(receipt),
                pick(&mut rng, &INSTRUCTIONS),
                pick(&mut rng, &MODES),
                comment(&mut rng)
            );
        }
        let ostatus = if all_f {
            "F"
        } else if all_o {
            "O"
        } else {
            "P"
        };
        orders.row(format_args!(
            "{okey}|{cust}|{ostatus}|{total:.2}|{}|{}|Clerk#{:09}|0|{}",
            format_date(odate),
            pick(&mut rng, &PRIORITIES),
            rng.random_range(1..=clerks),
            comment(&mut rng)
        ))?;
        lineitem
            .w
            .write_all(lines.as_bytes())
            .map_err(|e| DatagenError::Io(format!("{}: {e}", lineitem.path)))?;
    }
    orders.finish()?;
    lineitem.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn column_counts() {
        assert_eq!(table_columns("lineitem").unwrap().len(), 16);
        assert_eq!(table_columns("orders").unwrap().len(), 9);
        for t in TABLES {
            assert_eq!(t.columns.len(), t.types.len(), "{}", t.name);
        }
        assert!(table_columns("nope").is_none());
    }

    #[test]
    fn sparse_keys() {
        let keys: Vec<i64> = (0..10).map(order_key).collect();
        assert_eq!(keys, [1, 2, 3, 4, 5, 6, 7, 8, 33, 34]);
    }

    #[test]
    fn generates_tiny_scale() {
        let dir = tempfile::tempdir().unwrap();
        let sizes = generate_tpch(dir.path(), 0.001, 7).unwrap();
        let orders = std::fs::read_to_string(dir.path().join("orders.tbl")).unwrap();
        assert_eq!(orders.lines().count() as u64, sizes.orders);
        let li = std::fs::read_to_string(dir.path().join("lineitem.tbl")).unwrap();
        assert!(li.lines().all(|l| l.split('|').count() == 17));
        let again = tempfile::tempdir().unwrap();
        generate_tpch(again.path(), 0.001, 7).unwrap();
        assert_eq!(li, std::fs::read_to_string(again.path().join("lineitem.tbl")).unwrap());
        assert!(generate_tpch(dir.path(), 0.5, 7).is_err());
    }
}
