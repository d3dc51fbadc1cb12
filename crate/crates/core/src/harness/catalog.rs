use crate::error::{Error, Result};
use crate::solver::{BoundaryDesign, HumidityStep};

/// Surface transfer coefficient of the facility, s/m.
pub const FACILITY_H: f64 = 9e-9;
/// Facility air and sample temperature (24.5 °C), K.
pub const FACILITY_TEMPERATURE: f64 = 297.65;
/// Duration of the single-step experiments, s.
pub const SINGLE_STEP_DURATION: f64 = 200.0 * 3600.0;
const DAY: f64 = 86400.0;

/// Initial humidity and step target of the single-step designs S1–S4.
pub const SINGLE_STEPS: [(f64, f64); 4] = [(0.10, 0.33), (0.10, 0.75), (0.33, 0.75), (0.75, 0.33)];
/// Step sequences of the multi-step families (M1–M8, M9–M16), all starting at 10 %.
pub const MULTI_STEP_FAMILIES: [[f64; 3]; 2] = [[0.33, 0.75, 0.33], [0.75, 0.33, 0.75]];

fn design(id: String, initial_phi: f64, schedule: Vec<HumidityStep>) -> BoundaryDesign {
    BoundaryDesign { id, initial_phi, schedule, h: FACILITY_H, ambient_temperature: FACILITY_TEMPERATURE }
}

/// Single-step design `S<k>`, k = 1..4.
pub fn single_step(k: usize) -> Result<BoundaryDesign> {
    let &(initial, target) = SINGLE_STEPS
        .get(k.wrapping_sub(1))
        .ok_or_else(|| Error::domain(format!("no single-step design {k}")))?;
    Ok(design(format!("S{k}"), initial, vec![HumidityStep { duration: SINGLE_STEP_DURATION, ambient_phi: target }]))
}

/// Multi-step design `M<k>`, k = 1..16: family `(k − 1) / 8`, `((k − 1) % 8) + 1` days per step.
pub fn multi_step(k: usize) -> Result<BoundaryDesign> {
    if !(1..=16).contains(&k) {
        return Err(Error::domain(format!("no multi-step design {k}")));
    }
    let family = MULTI_STEP_FAMILIES[(k - 1) / 8];
    let days = ((k - 1) % 8 + 1) as f64;
    let schedule = family.iter().map(|&phi| HumidityStep { duration: days * DAY, ambient_phi: phi }).collect();
    Ok(design(format!("M{k}"), 0.10, schedule))
}

/// The 20 facility designs: `S1`–`S4` then `M1`–`M16`.
pub fn catalog() -> Vec<BoundaryDesign> {
    (1..=4)
        .map(|k| single_step(k).unwrap())
        .chain((1..=16).map(|k| multi_step(k).unwrap()))
        .collect()
}

pub fn single_step_designs() -> Vec<BoundaryDesign> {
    (1..=4).map(|k| single_step(k).unwrap()).collect()
}

pub fn multi_step_designs() -> Vec<BoundaryDesign> {
    (1..=16).map(|k| multi_step(k).unwrap()).collect()
}

/// Looks up a design by id. Accepts `S2`, `M16`, `single-2`, `multi-16`
/// (case-insensitive); a bare number refers to the single-step designs.
pub fn find_design(id: &str) -> Result<BoundaryDesign> {
    let lower = id.trim().to_ascii_lowercase();
    let parse = |s: &str| s.parse::<usize>().map_err(|_| Error::domain(format!("unknown design id {id:?}")));
    if let Some(rest) = lower.strip_prefix("single-").or_else(|| lower.strip_prefix('s')) {
        return single_step(parse(rest)?);
    }
    if let Some(rest) = lower.strip_prefix("multi-").or_else(|| lower.strip_prefix('m')) {
        return multi_step(parse(rest)?);
    }
    single_step(parse(&lower)?)
}

/// Expands a comma-separated design filter. `single`, `multi` and `all` select
/// whole groups.
pub fn select_designs(filter: &str) -> Result<Vec<BoundaryDesign>> {
    let mut out: Vec<BoundaryDesign> = Vec::new();
    for token in filter.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let group = match token.to_ascii_lowercase().as_str() {
            "single" => single_step_designs(),
            "multi" => multi_step_designs(),
            "all" => catalog(),
            _ => vec![find_design(token)?],
        };
        for d in group {
            if !out.iter().any(|o| o.id == d.id) {
                out.push(d);
            }
        }
    }
    if out.is_empty() {
        return Err(Error::domain("empty design selection"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_matches_facility_tables() {
        let c = catalog();
        assert_eq!(c.len(), 20);
        let expected_single = [("S1", 0.10, 0.33), ("S2", 0.10, 0.75), ("S3", 0.33, 0.75), ("S4", 0.75, 0.33)];
        for (d, (id, init, target)) in c[..4].iter().zip(expected_single) {
            assert_eq!(d.id, id);
            assert_eq!(d.initial_phi, init);
            assert_eq!(d.schedule.len(), 1);
            assert_eq!(d.schedule[0].ambient_phi, target);
            assert_eq!(d.total_duration(), 200.0 * 3600.0);
        }
        for (k, d) in c[4..].iter().enumerate() {
            let k = k + 1;
            assert_eq!(d.id, format!("M{k}"));
            assert_eq!(d.initial_phi, 0.10);
            let phis: Vec<f64> = d.schedule.iter().map(|s| s.ambient_phi).collect();
            let expected = if k <= 8 { [0.33, 0.75, 0.33] } else { [0.75, 0.33, 0.75] };
            assert_eq!(phis, expected);
            let days = ((k - 1) % 8 + 1) as f64;
            assert!(d.schedule.iter().all(|s| s.duration == days * 86400.0));
        }
        assert_eq!(c[19].total_duration(), 24.0 * 86400.0);
        for d in &c {
            assert_eq!(d.h, 9e-9);
            assert_eq!(d.ambient_temperature, 297.65);
            d.validate().unwrap();
        }
    }

    #[test]
    fn lookup() {
        assert_eq!(find_design("2").unwrap().id, "S2");
        assert_eq!(find_design("s4").unwrap().id, "S4");
        assert_eq!(find_design("multi-16").unwrap().id, "M16");
        assert_eq!(find_design("M9").unwrap().id, "M9");
        assert!(find_design("7").is_err());
        assert!(find_design("M17").is_err());
        assert!(find_design("x").is_err());
        assert_eq!(select_designs("single").unwrap().len(), 4);
        assert_eq!(select_designs("S2,single,M1").unwrap().len(), 5);
        assert!(select_designs(" , ").is_err());
    }
}
