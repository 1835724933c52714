//! Spearman correlation between an estimated and a reference OD matrix,
//! with and without the diagonal.
//!
//! ```text
//! cargo run --example compare_matrices
//! ```

use cdr_journeys::odflow::{spearman, ODMatrix};

const ESTIMATED: &str = "\
origin,M1,M2,M3
M1,120,14,3
M2,11,95,7
M3,2,9,60
";

const SURVEY: &str = "\
M1,M2,M3
140,10,5
12,80,6
1,12,75
";

fn main() -> cdr_journeys::Result<()> {
    let est = ODMatrix::read_csv(ESTIMATED.as_bytes())?;
    let survey = ODMatrix::read_csv(SURVEY.as_bytes())?;
    for diagonal in [true, false] {
        let r = spearman(&est, &survey, diagonal)?;
        println!("diagonal={diagonal:<5} rho={:.4} p={:.2e} n={}", r.rho, r.p_value, r.n);
    }
    Ok(())
}
