//! Bundled benchmark query texts: the TPC-H subset (standard text with
//! date arithmetic pre-evaluated) and the UDF suite.

/// Per-order revenue over recent orders; the running example of the
/// engine's docs and golden explain output.
pub const REVENUE_QUERY: &str = "SELECT l_orderkey, sum(l_extendedprice * (1 - l_discount)) as revenue
  FROM orders, lineitem
  WHERE l_orderkey = o_orderkey and o_orderdate >= '1995-01-01'
  GROUP BY l_orderkey
  ORDER BY revenue LIMIT 5;";

pub const Q1: &str = "select l_returnflag, l_linestatus, sum(l_quantity) as sum_qty,
  sum(l_extendedprice) as sum_base_price,
  sum(l_extendedprice * (1 - l_discount)) as sum_disc_price,
  sum(l_extendedprice * (1 - l_discount) * (1 + l_tax)) as sum_charge,
  avg(l_quantity) as avg_qty, avg(l_extendedprice) as avg_price,
  avg(l_discount) as avg_disc, count(*) as count_order
from lineitem
where l_shipdate <= date '1998-09-02'
group by l_returnflag, l_linestatus
order by l_returnflag, l_linestatus";

pub const Q3: &str = "select l_orderkey, sum(l_extendedprice * (1 - l_discount)) as revenue,
  o_orderdate, o_shippriority
from customer, orders, lineitem
where c_mktsegment = 'BUILDING' and c_custkey = o_custkey and l_orderkey = o_orderkey
  and o_orderdate < date '1995-03-15' and l_shipdate > date '1995-03-15'
group by l_orderkey, o_orderdate, o_shippriority
order by revenue desc, o_orderdate
limit 10";

pub const Q5: &str = "select n_name, sum(l_extendedprice * (1 - l_discount)) as revenue
from customer, orders, lineitem, supplier, nation, region
where c_custkey = o_custkey and l_orderkey = o_orderkey and l_suppkey = s_suppkey
  and c_nationkey = s_nationkey and s_nationkey = n_nationkey
  and n_regionkey = r_regionkey and r_name = 'ASIA'
  and o_orderdate >= date '1994-01-01' and o_orderdate < date '1995-01-01'
group by n_name
order by revenue desc";

pub const Q6: &str = "select sum(l_extendedprice * l_discount) as revenue
from lineitem
where l_shipdate >= date '1994-01-01' and l_shipdate < date '1995-01-01'
  and l_discount between 0.05 and 0.07 and l_quantity < 24";

pub const Q10: &str = "select c_custkey, c_name, sum(l_extendedprice * (1 - l_discount)) as revenue,
  c_acctbal, n_name, c_address, c_phone, c_comment
from customer, orders, lineitem, nation
where c_custkey = o_custkey and l_orderkey = o_orderkey
  and o_orderdate >= date '1993-10-01' and o_orderdate < date '1994-01-01'
  and l_returnflag = 'R' and c_nationkey = n_nationkey
group by c_custkey, c_name, c_acctbal, c_phone, n_name, c_address, c_comment
order by revenue desc
limit 20";

pub const TPCH_QUERIES: [(&str, &str); 5] =
    [("Q1", Q1), ("Q3", Q3), ("Q5", Q5), ("Q6", Q6), ("Q10", Q10)];

/// UDF suite; names resolve against `UdfRegistry::with_suite`.
pub const UDF_QUERIES: [(&str, &str); 4] = [
    (
        "LR",
        "select myLinearFit(l_discount, l_tax) from lineitem where l_orderkey < 10 limit 50",
    ),
    (
        "KMeans",
        "select myKMeans(l_discount, l_tax) from lineitem, orders where l_orderkey = o_orderkey limit 50",
    ),
    (
        "Quantiles",
        "select myQuantile(l_discount) from lineitem, orders where l_orderkey = o_orderkey limit 50",
    ),
    (
        "CGO",
        "select myCGO(l_discount, l_tax) from lineitem where l_orderkey < 10 limit 1",
    ),
];
