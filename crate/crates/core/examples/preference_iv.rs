//! Provider-preference instrument from encounter-level data.
//!
//! cargo run --example preference_iv

use ivsurv::dataset::{build_preference_iv, read_encounters, write_cohort, CohortSchema};

const ENCOUNTERS: &str = "\
provider,time,event,a,x1
north,3.0,1,1,0.2
north,5.5,0,1,-0.4
north,2.1,1,0,1.1
north,7.0,0,1,0.3
south,4.2,1,0,0.8
south,6.3,0,0,-1.2
south,1.9,1,1,0.5
south,8.8,0,0,0.0
east,2.5,1,1,0.9
east,3.3,0,0,-0.1
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let encounters = read_encounters(ENCOUNTERS.as_bytes(), &CohortSchema::default())?;
    let (cohort, assignment) = build_preference_iv(&encounters, 0.5, 3)?;
    for p in &assignment.providers {
        println!(
            "{:<6} n={} treated={:.2} high preference: {:?}",
            p.provider_id, p.n, p.fraction_treated, p.high_preference
        );
    }
    println!("{} rows excluded\n", assignment.excluded_rows);
    write_cohort(&cohort, std::io::stdout())?;
    Ok(())
}
