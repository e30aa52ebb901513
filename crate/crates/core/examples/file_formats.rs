//! Long CSV ingestion with replicate averaging, and a JSON round trip.

use si_impute::io::{read_json, read_long_csv, to_json_string, write_long_csv};

pub fn run() -> si_impute::Result<()> {
    let csv = "context,action,f1,f2,f3\n\
               liver,drug_a,1.0,0.0,2.0\n\
               liver,drug_a,3.0,0.0,4.0\n\
               liver,control,0.5,0.5,0.5\n\
               lung,drug_a,2.0,1.0,0.0\n";
    let tensor = read_long_csv(csv.as_bytes())?;
    println!("p = {}, {} pairs, missing {:?}", tensor.p(), tensor.len(), tensor.missing_pairs());
    println!("(liver, drug_a) averaged: {:?}", tensor.get("liver", "drug_a").expect("observed"));

    let json = to_json_string(&tensor);
    assert_eq!(read_json(json.as_bytes())?, tensor);
    let mut out = Vec::new();
    write_long_csv(&tensor, &mut out)?;
    print!("{}", String::from_utf8_lossy(&out));
    Ok(())
}

fn main() -> si_impute::Result<()> {
    run()
}
