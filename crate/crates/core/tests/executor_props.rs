mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{check_log, random_dag};
use rawq_core::executor::{execute, Data, ExecError, TaskGraph};

fn run(seed: u64, workers: usize) -> Result<Vec<i64>, TestCaseError> {
    let (g, expected) = random_dag(&mut ChaCha8Rng::seed_from_u64(seed));
    let inputs: Vec<Vec<usize>> = (0..g.len()).map(|t| g.task(t).inputs.clone()).collect();
    let res = execute(g, workers).unwrap();
    check_log(&inputs, &res).map_err(TestCaseError::fail)?;
    prop_assert_eq!(res.stats.tasks_run, inputs.len());
    let outs: Vec<i64> = res
        .outputs
        .values()
        .map(|d| match &**d {
            Data::Rows(r) => r[0][0].as_key().unwrap(),
            _ => i64::MIN,
        })
        .collect();
    let sinks: Vec<i64> = res.outputs.keys().map(|t| expected[*t]).collect();
    prop_assert_eq!(&outs, &sinks);
    Ok(outs)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn results_do_not_depend_on_worker_count(seed in any::<u64>()) {
        let one = run(seed, 1)?;
        for w in [2, 3, 8] {
            prop_assert_eq!(&run(seed, w)?, &one);
        }
    }
}

#[test]
fn failures_surface_after_draining() {
    let mut g = TaskGraph::new();
    let a = g.add("ok", 1, vec![], |_| Ok(Data::rows(vec![])));
    g.add("bad", 2, vec![a], |_| Err("nope".to_string()));
    g.add("boom", 3, vec![a], |_| panic!("kaboom"));
    match execute(g, 2) {
        Err(ExecError::TaskFailed { message, .. }) => assert_eq!(message, "nope"),
        Err(ExecError::TaskPanicked { cause, .. }) => assert!(cause.contains("kaboom")),
        other => panic!("unexpected {other:?}"),
    }
    assert!(matches!(execute(TaskGraph::new(), 0), Err(ExecError::ZeroWorkers)));
}
