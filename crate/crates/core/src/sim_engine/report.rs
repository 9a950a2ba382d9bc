use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{EventLog, SimError};
use crate::num::{db_to_power, power_to_db};

/// Source level change per decade of speed, dB.
const SPEED_LAW_DB: f64 = 60.0;

/// Share of exposure energy removed by a reduction of `reduction_db`,
/// percent. Negative inputs (more exposure) give negative percentages.
pub fn reduction_percent(reduction_db: f64) -> f64 {
    (1.0 - 10f64.powf(-reduction_db / 10.0)) * 100.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MammalFootprint {
    pub id: u32,
    /// Received level at every log record, dB re 1 µPa.
    pub spl_db: Vec<f64>,
    /// dB re 1 µPa²·h.
    pub sel_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FootprintReport {
    pub eta_h: f64,
    pub tdt_nm: f64,
    pub times_h: Vec<f64>,
    pub mammals: Vec<MammalFootprint>,
    /// Realised mean SEL; `None` without mammals.
    pub mean_sel_db: Option<f64>,
}

impl FootprintReport {
    pub fn ids(&self) -> Vec<u32> {
        self.mammals.iter().map(|m| m.id).collect()
    }

    /// CSV with columns `mammal_id,sel_db`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("mammal_id,sel_db\n");
        for m in &self.mammals {
            let _ = writeln!(s, "{},{}", m.id, m.sel_db);
        }
        s
    }
}

/// Integrates tick energy over the log with the trapezoid rule. Each
/// interval is sailed at the speed of its opening record, so the closing
/// record's level is moved back to that speed with the 60·log10(v) source law
/// before averaging.
pub fn footprint(log: &EventLog) -> Result<FootprintReport, SimError> {
    let first = log.records.first().ok_or(SimError::EmptyLog)?;
    let last = log.records.last().ok_or(SimError::EmptyLog)?;
    let times_h: Vec<f64> = log.records.iter().map(|r| r.t_h).collect();
    let mammals: Vec<MammalFootprint> = log
        .mammal_ids
        .iter()
        .enumerate()
        .map(|(j, &id)| {
            let spl_db: Vec<f64> = log.records.iter().map(|r| r.nl_db[j]).collect();
            let energy: f64 = log
                .records
                .windows(2)
                .map(|w| {
                    let (a, b) = (&w[0], &w[1]);
                    let p0 = db_to_power(a.nl_db[j]);
                    let p1 = if b.v_kt > 0.0 && a.v_kt > 0.0 {
                        db_to_power(b.nl_db[j] + SPEED_LAW_DB * (a.v_kt / b.v_kt).log10())
                    } else {
                        p0
                    };
                    0.5 * (p0 + p1) * (b.t_h - a.t_h)
                })
                .sum();
            MammalFootprint { id, spl_db, sel_db: power_to_db(energy) }
        })
        .collect();
    let mean_sel_db =
        (!mammals.is_empty()).then(|| mammals.iter().map(|m| m.sel_db).sum::<f64>() / mammals.len() as f64);
    Ok(FootprintReport {
        eta_h: last.t_h - first.t_h,
        tdt_nm: last.progress_nm - first.progress_nm,
        times_h,
        mammals,
        mean_sel_db,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub mammal_id: u32,
    pub baseline_sel_db: f64,
    pub optimized_sel_db: f64,
    /// `optimized − baseline`.
    pub delta_sel_db: f64,
    pub reduction_percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub baseline_eta_h: f64,
    pub optimized_eta_h: f64,
    pub baseline_tdt_nm: f64,
    pub optimized_tdt_nm: f64,
    pub baseline_js_db: Option<f64>,
    pub optimized_js_db: Option<f64>,
    pub delta_js_db: Option<f64>,
    pub reduction_percent: Option<f64>,
    pub rows: Vec<ComparisonRow>,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl ComparisonTable {
    /// One-row CSV: `baseline_eta_h,optimized_eta_h,baseline_tdt_nm,
    /// optimized_tdt_nm,baseline_js_db,optimized_js_db,delta_js_db,reduction_percent`.
    pub fn summary_csv(&self) -> String {
        format!(
            "baseline_eta_h,optimized_eta_h,baseline_tdt_nm,optimized_tdt_nm,baseline_js_db,optimized_js_db,delta_js_db,reduction_percent\n{},{},{},{},{},{},{},{}\n",
            self.baseline_eta_h,
            self.optimized_eta_h,
            self.baseline_tdt_nm,
            self.optimized_tdt_nm,
            opt(self.baseline_js_db),
            opt(self.optimized_js_db),
            opt(self.delta_js_db),
            opt(self.reduction_percent),
        )
    }

    /// Per-mammal CSV: `mammal_id,baseline_sel_db,optimized_sel_db,delta_sel_db,reduction_percent`.
    pub fn mammals_csv(&self) -> String {
        let mut s = String::from("mammal_id,baseline_sel_db,optimized_sel_db,delta_sel_db,reduction_percent\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                r.mammal_id, r.baseline_sel_db, r.optimized_sel_db, r.delta_sel_db, r.reduction_percent
            );
        }
        s
    }

    pub fn summary_text(&self) -> String {
        let f = |v: Option<f64>| v.map(|x| format!("{x:.2}")).unwrap_or_else(|| "n/a".into());
        let mut s = String::new();
        let _ = writeln!(s, "{:<10} {:>8} {:>10} {:>12}", "voyage", "ETA (h)", "TDT (NM)", "J_s (dB)");
        let _ = writeln!(
            s,
            "{:<10} {:>8.2} {:>10.2} {:>12}",
            "baseline",
            self.baseline_eta_h,
            self.baseline_tdt_nm,
            f(self.baseline_js_db)
        );
        let _ = writeln!(
            s,
            "{:<10} {:>8.2} {:>10.2} {:>12}",
            "optimized",
            self.optimized_eta_h,
            self.optimized_tdt_nm,
            f(self.optimized_js_db)
        );
        let _ = writeln!(s, "delta J_s {} dB, exposure reduction {} %", f(self.delta_js_db), f(self.reduction_percent));
        s
    }
}

/// Baseline versus optimized exposure. Swapping the arguments negates every
/// delta.
pub fn compare(baseline: &FootprintReport, optimized: &FootprintReport) -> Result<ComparisonTable, SimError> {
    if baseline.ids() != optimized.ids() {
        return Err(SimError::IdMismatch(baseline.ids(), optimized.ids()));
    }
    let rows = baseline
        .mammals
        .iter()
        .zip(&optimized.mammals)
        .map(|(b, o)| {
            let delta = o.sel_db - b.sel_db;
            ComparisonRow {
                mammal_id: b.id,
                baseline_sel_db: b.sel_db,
                optimized_sel_db: o.sel_db,
                delta_sel_db: delta,
                reduction_percent: reduction_percent(-delta),
            }
        })
        .collect();
    let delta = baseline.mean_sel_db.zip(optimized.mean_sel_db).map(|(b, o)| o - b);
    Ok(ComparisonTable {
        baseline_eta_h: baseline.eta_h,
        optimized_eta_h: optimized.eta_h,
        baseline_tdt_nm: baseline.tdt_nm,
        optimized_tdt_nm: optimized.tdt_nm,
        baseline_js_db: baseline.mean_sel_db,
        optimized_js_db: optimized.mean_sel_db,
        delta_js_db: delta,
        reduction_percent: delta.map(|d| reduction_percent(-d)),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::GeoPoint;
    use crate::sim_engine::LogRecord;
    use crate::wildlife::MammalState;
    use proptest::prelude::*;

    fn log_const(level: f64, minutes: usize) -> EventLog {
        let m = MammalState::stationary(4, GeoPoint::surface(48.0, -123.0));
        EventLog {
            mammal_ids: vec![4],
            records: (0..=minutes)
                .map(|k| LogRecord {
                    t_h: k as f64 / 60.0,
                    ship: GeoPoint::surface(48.1, -123.0),
                    v_kt: 10.0,
                    progress_nm: k as f64 / 6.0,
                    mammals: vec![m],
                    nl_db: vec![level],
                })
                .collect(),
            replans: Vec::new(),
        }
    }

    fn report(ids: &[u32], sels: &[f64]) -> FootprintReport {
        FootprintReport {
            eta_h: 10.0,
            tdt_nm: 120.0,
            times_h: vec![],
            mammals: ids.iter().zip(sels).map(|(&id, &sel_db)| MammalFootprint { id, spl_db: vec![], sel_db }).collect(),
            mean_sel_db: Some(sels.iter().sum::<f64>() / sels.len() as f64),
        }
    }

    #[test]
    fn one_hour_at_100_db() {
        let f = footprint(&log_const(100.0, 60)).unwrap();
        assert!((f.mammals[0].sel_db - 100.0).abs() < 0.01);
        assert_eq!(f.mean_sel_db, Some(f.mammals[0].sel_db));
        assert!((f.eta_h - 1.0).abs() < 1e-12);
        assert_eq!(footprint(&EventLog::default()), Err(SimError::EmptyLog));
    }

    #[test]
    fn percent_identities() {
        assert_eq!(reduction_percent(0.0), 0.0);
        assert!((reduction_percent(3.0103) - 50.0).abs() < 1e-3);
        assert!((reduction_percent(7.14) - 80.68).abs() < 0.05);
        assert!((reduction_percent(4.90) - 67.6).abs() < 0.2);
        assert!((reduction_percent(0.92) - 19.11).abs() < 0.2);
        assert!(reduction_percent(-3.0103) < -99.0);
    }

    #[test]
    fn compare_examples() {
        let a = report(&[1, 2], &[140.0, 150.0]);
        let same = compare(&a, &a).unwrap();
        assert_eq!(same.delta_js_db, Some(0.0));
        assert_eq!(same.reduction_percent, Some(0.0));
        let b = report(&[1, 2], &[132.86, 142.86]);
        let t = compare(&a, &b).unwrap();
        assert!((t.delta_js_db.unwrap() + 7.14).abs() < 1e-9);
        assert!((t.reduction_percent.unwrap() - 80.68).abs() < 0.05);
        assert!(t.summary_csv().lines().next().unwrap().contains("delta_js_db"));
        assert!(matches!(compare(&a, &report(&[1, 3], &[1.0, 2.0])), Err(SimError::IdMismatch(..))));
    }

    proptest! {
        #[test]
        fn compare_is_antisymmetric(x in prop::collection::vec(80.0..180.0f64, 1..6), d in prop::collection::vec(-20.0..20.0f64, 6)) {
            let ids: Vec<u32> = (0..x.len() as u32).collect();
            let y: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + b).collect();
            let ab = compare(&report(&ids, &x), &report(&ids, &y)).unwrap();
            let ba = compare(&report(&ids, &y), &report(&ids, &x)).unwrap();
            for (r, s) in ab.rows.iter().zip(&ba.rows) {
                prop_assert!((r.delta_sel_db + s.delta_sel_db).abs() < 1e-9);
            }
            prop_assert!((ab.delta_js_db.unwrap() + ba.delta_js_db.unwrap()).abs() < 1e-9);
        }

        #[test]
        fn percent_formula(r in -30.0..30.0f64) {
            prop_assert!((reduction_percent(r) - (1.0 - 10f64.powf(-r / 10.0)) * 100.0).abs() < 1e-6);
        }
    }
}
