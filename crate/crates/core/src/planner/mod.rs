//! Bound query → logical tree → grouped physical operators → engine plan.

mod engine_plan;
mod logical;
mod physical;

pub use engine_plan::{
    convert_to_engine_plan, render_explain, EngineMeta, EngineOpKind, EngineOperator, EnginePlan,
    JoinSide, PlanError, TableInfo,
};
pub use logical::{build_logical_plan, LogicalPlan};
pub use physical::{to_physical, Meta, MetaValue, OperatorGroup, PhysicalOp, PhysicalPlan};

use crate::sql::BoundQuery;

#[derive(Debug, Clone)]
pub struct QueryPlan {
    pub logical: LogicalPlan,
    pub physical: PhysicalPlan,
    pub engine: EnginePlan,
}

pub fn plan_query(q: &BoundQuery) -> Result<QueryPlan, PlanError> {
    let logical = build_logical_plan(q);
    let physical = to_physical(&logical);
    let engine = convert_to_engine_plan(&physical)?;
    Ok(QueryPlan {
        logical,
        physical,
        engine,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::tpch::generate_tpch;
    use crate::sql::{parse_and_bind, queries};
    use crate::storage::{Catalog, Field};
    use crate::udf::UdfRegistry;
    use crate::value::DataType;

    fn catalog() -> (tempfile::TempDir, Catalog) {
        let dir = tempfile::tempdir().unwrap();
        generate_tpch(dir.path(), 0.001, 7).unwrap();
        let cat = Catalog::from_config_file(&dir.path().join("catalog.toml")).unwrap();
        (dir, cat)
    }

    fn plan(cat: &Catalog, sql: &str) -> QueryPlan {
        let q = parse_and_bind(sql, cat, &UdfRegistry::with_suite()).unwrap();
        plan_query(&q).unwrap()
    }

    #[test]
    fn revenue_query_grouping() {
        let (_d, cat) = catalog();
        let p = plan(&cat, queries::REVENUE_QUERY);
        let shape = p.physical.shape();
        assert_eq!(
            shape,
            vec![
                vec!["scan", "filter", "project"],
                vec!["scan"],
                vec!["join", "aggregate", "sort", "limit"],
            ]
        );
        let keys: Vec<u32> = p.physical.ops().map(|o| o.key).collect();
        assert_eq!(keys, (1..=8).collect::<Vec<_>>());
        let join = p.engine.get(5).unwrap();
        assert!(matches!(
            join.meta,
            EngineMeta::MergeJoin {
                indexed: Some(JoinSide::Right),
                ..
            }
        ));
        assert_eq!(join.inputs[1].base_table.as_deref(), Some("lineitem"));
        assert_eq!(join.inputs[0].relation, "r3");
        assert_eq!(p.engine.roots(), vec![8]);
    }

    #[test]
    fn scans_read_only_needed_columns() {
        let (_d, cat) = catalog();
        let p = plan(&cat, queries::Q6);
        let scan = &p.engine.ops[0];
        let EngineMeta::ReadTable { columns, .. } = &scan.meta else {
            panic!()
        };
        let names: Vec<&str> = columns.iter().map(|f| f.name.as_str()).collect();
        assert_eq!(names, ["l_quantity", "l_extendedprice", "l_discount", "l_shipdate"]);
    }

    #[test]
    fn udf_pipeline() {
        let (_d, cat) = catalog();
        let p = plan(&cat, queries::UDF_QUERIES[0].1);
        let names: Vec<&str> = p.engine.ops.iter().map(|o| o.kind.name()).collect();
        assert_eq!(names.last(), Some(&"apply_udf"));
        assert!(names.contains(&"head"));
    }

    #[test]
    fn conversion_errors() {
        let mut pp = PhysicalPlan::default();
        pp.groups.push(OperatorGroup {
            ops: vec![PhysicalOp::new(1, "teleport", Meta::new(), vec![])],
        });
        assert!(matches!(
            convert_to_engine_plan(&pp),
            Err(PlanError::UnknownOperatorType { key: 1, .. })
        ));

        let scan = PhysicalOp::scan(1, "t", vec![Field::new("a", DataType::Int64)], None);
        let mut pp = PhysicalPlan::default();
        pp.groups.push(OperatorGroup {
            ops: vec![scan.clone(), PhysicalOp::limit(2, 9, 3, false)],
        });
        assert_eq!(
            convert_to_engine_plan(&pp),
            Err(PlanError::DanglingChild { key: 2, child: 9 })
        );

        let mut pp = PhysicalPlan::default();
        pp.groups.push(OperatorGroup {
            ops: vec![scan.clone(), scan.clone()],
        });
        assert_eq!(convert_to_engine_plan(&pp), Err(PlanError::DuplicateKey(1)));

        let mut bad = PhysicalOp::limit(2, 1, 3, false);
        bad.meta.insert("n".into(), MetaValue::Text("x".into()));
        let mut pp = PhysicalPlan::default();
        pp.groups.push(OperatorGroup { ops: vec![scan, bad] });
        assert!(matches!(
            convert_to_engine_plan(&pp),
            Err(PlanError::MalformedMetadata { key: 2, .. })
        ));
    }

    #[test]
    fn empty_plan_explains() {
        assert_eq!(render_explain(&EnginePlan::default()), "(empty plan)\n");
    }
}
