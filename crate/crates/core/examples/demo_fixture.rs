//! Writes the synthetic demo inputs used by the CLI fixture and tests.
//!
//! `cargo run -p trialeq-core --example demo_fixture -- <dir>`
//!
//! Participation follows burden loosely and research capacity strongly, so
//! the attribution and classification stages have signal to find.

use std::fmt::Write as _;
use std::path::PathBuf;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use trialeq_core::panel::DiseaseCategory;
use trialeq_core::rng;

const SEED: u64 = 20_240_601;

// (iso3, income group, log gdp per capita, log population)
const COUNTRIES: &[(&str, &str, f64, f64)] = &[
    ("USA", "High", 11.1, 19.6),
    ("GBR", "High", 10.7, 18.0),
    ("DEU", "High", 10.8, 18.2),
    ("FRA", "High", 10.6, 18.0),
    ("JPN", "High", 10.5, 18.7),
    ("CAN", "High", 10.8, 17.4),
    ("AUS", "High", 10.9, 17.0),
    ("NLD", "High", 10.9, 16.7),
    ("ESP", "High", 10.3, 17.7),
    ("ITA", "High", 10.4, 17.9),
    ("KOR", "High", 10.4, 17.7),
    ("SWE", "High", 10.9, 16.1),
    ("ISR", "High", 10.8, 16.0),
    ("POL", "High", 9.9, 17.4),
    ("CHN", "UpperMiddle", 9.5, 21.1),
    ("BRA", "UpperMiddle", 9.0, 19.2),
    ("MEX", "UpperMiddle", 9.2, 18.7),
    ("TUR", "UpperMiddle", 9.3, 18.2),
    ("ZAF", "UpperMiddle", 8.8, 17.9),
    ("ARG", "UpperMiddle", 9.3, 17.6),
    ("THA", "UpperMiddle", 8.9, 18.0),
    ("COL", "UpperMiddle", 8.8, 17.7),
    ("MYS", "UpperMiddle", 9.3, 17.3),
    ("IND", "LowerMiddle", 7.7, 21.1),
    ("EGY", "LowerMiddle", 8.2, 18.4),
    ("PHL", "LowerMiddle", 8.2, 18.6),
    ("VNM", "LowerMiddle", 8.2, 18.4),
    ("PAK", "LowerMiddle", 7.3, 19.2),
    ("NGA", "LowerMiddle", 7.7, 19.2),
    ("KEN", "LowerMiddle", 7.6, 17.7),
    ("BGD", "LowerMiddle", 7.8, 19.0),
    ("ETH", "Low", 6.9, 18.6),
    ("UGA", "Low", 6.8, 17.6),
    ("MWI", "Low", 6.4, 16.8),
    ("MOZ", "Low", 6.3, 17.3),
    ("NER", "Low", 6.3, 17.0),
];

const YEARS: std::ops::RangeInclusive<u16> = 2010..=2024;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "crates/cli/fixtures/demo".into()));
    std::fs::create_dir_all(&dir)?;
    let diseases: Vec<DiseaseCategory> = DiseaseCategory::all().collect();
    let noise = Normal::new(0.0, 1.0)?;

    // country-level capacity drives both predictors and participation
    let mut r = rng::stream(SEED, "demo-countries", 0);
    let mut capacity = Vec::new();
    let mut predictors = String::from(
        "iso3,income_group,gdp,population,rd_expenditure,publications,total_citations,health_exp,\
         hospital_beds,hospitals,doctors_per_10k,hdi,democracy_index\n",
    );
    for &(iso, income, lgdp_pc, lpop) in COUNTRIES {
        let research = 0.9 * (lgdp_pc - 9.0) + 0.5 * noise.sample(&mut r);
        capacity.push(research);
        let pop = lpop.exp();
        let gdp = (lgdp_pc + lpop).exp();
        let rd = (2.2 + 0.9 * research + 0.2 * noise.sample(&mut r)).max(0.1);
        let pubs = (lpop - 9.5 + 1.6 * research + 0.3 * noise.sample(&mut r)).exp().round().max(10.0);
        let cites = pubs * (8.0 + 3.0 * research + r.random_range(0.0..2.0)).max(1.0);
        let health = gdp * (0.05 + 0.015 * (lgdp_pc - 8.0).max(0.0) + r.random_range(0.0..0.02));
        let beds = pop * (0.0008 + 0.0006 * (lgdp_pc - 6.0) + r.random_range(0.0..0.001));
        let hospitals = (pop * (0.00001 + 0.000004 * (lgdp_pc - 6.0)) * (1.0 + 0.2 * noise.sample(&mut r))).round().max(5.0);
        let doctors = (2.0 + 7.0 * (lgdp_pc - 6.0) + 3.0 * noise.sample(&mut r)).clamp(0.5, 60.0);
        let hdi = (0.35 + 0.11 * (lgdp_pc - 6.0) + 0.02 * noise.sample(&mut r)).clamp(0.3, 0.97);
        let democracy = (2.0 + 1.4 * (lgdp_pc - 6.0) + 1.5 * noise.sample(&mut r)).clamp(1.0, 9.9);
        writeln!(
            predictors,
            "{iso},{income},{gdp:.0},{pop:.0},{rd:.3},{pubs:.0},{cites:.0},{health:.0},{beds:.0},{hospitals:.0},{doctors:.2},{hdi:.3},{democracy:.2}"
        )?;
    }

    // disease burden leans towards poorer countries for communicable groups
    let mut r = rng::stream(SEED, "demo-diseases", 0);
    let disease_rate: Vec<f64> = diseases.iter().map(|_| r.random_range(-1.0..1.5)).collect();
    let poverty_tilt: Vec<f64> = diseases.iter().enumerate().map(|(i, _)| if i < 5 { 0.6 } else { -0.2 }).collect();
    let research_pull: Vec<f64> = diseases.iter().map(|_| r.random_range(0.6..1.4)).collect();

    let mut panel = String::from("country,disease,year,participants,dalys\n");
    let mut components = String::from("country,disease,authorship,burden,recruitment\n");
    for (ci, &(iso, _, lgdp_pc, lpop)) in COUNTRIES.iter().enumerate() {
        for (di, d) in diseases.iter().enumerate() {
            let mut r = rng::stream(SEED, "demo-pairs", (ci * diseases.len() + di) as u64);
            let pair_effect = 0.4 * noise.sample(&mut r);
            let mut total_p = 0.0;
            let mut total_d = 0.0;
            for (t, year) in YEARS.enumerate() {
                let trend = 0.03 * t as f64 * capacity[ci].signum();
                let ldaly = lpop - 6.0 + disease_rate[di] + poverty_tilt[di] * (9.0 - lgdp_pc) + 0.1 * noise.sample(&mut r);
                let lpart = 0.5 * ldaly + research_pull[di] * 1.3 * capacity[ci] - 0.5 + pair_effect + trend
                    + 0.3 * noise.sample(&mut r);
                let dalys = ldaly.exp().round().max(1.0);
                let participants = lpart.exp().round();
                total_p += participants;
                total_d += dalys;
                writeln!(panel, "{iso},{},{year},{participants:.0},{dalys:.0}", d.name())?;
            }
            let authorship = (0.4 * total_p * (0.5 + 0.5 * capacity[ci].tanh()) * r.random_range(0.6..1.4)).round();
            writeln!(components, "{iso},{},{authorship:.0},{total_d:.0},{total_p:.0}", d.name())?;
        }
    }

    std::fs::write(dir.join("panel.csv"), panel)?;
    std::fs::write(dir.join("predictors.csv"), predictors)?;
    std::fs::write(dir.join("components.csv"), components)?;
    println!("wrote {}", dir.display());
    Ok(())
}
