use ivsurv::dataset::{build_preference_iv, read_cohort, read_encounters, write_cohort, Cohort, CohortSchema, ObservedRecord};
use proptest::prelude::*;

fn record() -> impl Strategy<Value = (f64, bool, bool, Vec<f64>)> {
    (0.0f64..1e6, any::<bool>(), any::<bool>(), prop::collection::vec(-1e9f64..1e9, 3))
}

proptest! {
    #[test]
    fn cohort_csv_round_trip(rows in prop::collection::vec(record(), 2..40)) {
        let mut records: Vec<ObservedRecord> = rows
            .into_iter()
            .enumerate()
            .map(|(i, (t, e, a, x))| ObservedRecord::new(t, e || i == 0, a || i == 0, i % 2 == 0, x))
            .collect();
        records[1].instrument = false;
        records[1].treatment = false;
        let cohort = Cohort::new(records).unwrap();
        let mut buf = Vec::new();
        write_cohort(&cohort, &mut buf).unwrap();
        let back = read_cohort(buf.as_slice(), &CohortSchema::default()).unwrap();
        prop_assert_eq!(back.records(), cohort.records());
    }
}

#[test]
fn renamed_columns_and_errors_name_the_row() {
    let text = "days,died,drug,iv,age,sofa\n1.5,1,1,0,60,3\n2.0,0,0,1,70,4\n3.1,1,0,1,65,2\n";
    let schema: CohortSchema = toml::from_str(
        r#"
        time = "days"
        event = "died"
        treatment = "drug"
        instrument = "iv"
        covariates = ["sofa", "age"]
        "#,
    )
    .unwrap();
    let c = read_cohort(text.as_bytes(), &schema).unwrap();
    assert_eq!(c.get(0).covariates, vec![3.0, 60.0]);

    let bad = "days,died,drug,iv,age,sofa\n1.5,1,1,0,60,3\n2.0,0,0,1,seventy,4\n";
    let msg = read_cohort(bad.as_bytes(), &schema).unwrap_err().to_string();
    assert!(msg.contains("age") && msg.contains("row 1"), "{msg}");
}

#[test]
fn small_providers_are_dropped_before_assignment() {
    let mut text = String::from("provider,time,event,a,x1\n");
    for i in 0..10 {
        text += &format!("big,{}.0,1,{},0.{i}\n", i + 1, (i < 7) as u8);
    }
    for i in 0..10 {
        text += &format!("mid,{}.5,{},{},0.{i}\n", i + 1, i % 2, (i < 2) as u8);
    }
    for i in 0..4 {
        text += &format!("tiny,{}.2,1,1,0.{i}\n", i + 1);
    }
    let enc = read_encounters(text.as_bytes(), &CohortSchema::default()).unwrap();
    let (cohort, assignment) = build_preference_iv(&enc, 0.5, 5).unwrap();
    assert_eq!(assignment.excluded_rows, 4);
    assert_eq!(cohort.len(), 20);
    assert_eq!(cohort.records().iter().filter(|r| r.instrument).count(), 10);
}
