//! Spectrum-based scoring.
//!
//! A spectrum row counts, for one element, the failed and passed tests that
//! execute it (`ef`, `ep`) and those that do not (`nf`, `np`).

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::minilang::ExecutionTrace;
use crate::model::{ProgramElement, ScoredList};
use crate::technique::Technique;

/// Exponent used by DStar unless configured otherwise.
pub const DSTAR_DEFAULT_STAR: u32 = 2;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpectrumRow {
    pub ef: u32,
    pub ep: u32,
    pub nf: u32,
    pub np: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    rows: BTreeMap<ProgramElement, SpectrumRow>,
    total_failed: u32,
    total_passed: u32,
}

impl Spectrum {
    pub fn rows(&self) -> &BTreeMap<ProgramElement, SpectrumRow> {
        &self.rows
    }

    pub fn row(&self, element: &ProgramElement) -> Option<SpectrumRow> {
        self.rows.get(element).copied()
    }

    pub fn total_failed(&self) -> u32 {
        self.total_failed
    }

    pub fn total_passed(&self) -> u32 {
        self.total_passed
    }

    /// Builds a spectrum from `(passed, covered)` pairs, one per test.
    pub fn from_coverage<'a>(
        runs: impl IntoIterator<Item = (bool, &'a BTreeSet<ProgramElement>)>,
        universe: &[ProgramElement],
    ) -> Result<Spectrum> {
        let mut rows: BTreeMap<ProgramElement, SpectrumRow> = universe
            .iter()
            .map(|e| (e.clone(), SpectrumRow::default()))
            .collect();
        let (mut failed, mut passed) = (0u32, 0u32);
        for (ok, covered) in runs {
            if ok {
                passed += 1;
            } else {
                failed += 1;
            }
            for e in covered {
                let row = rows.entry(e.clone()).or_default();
                if ok {
                    row.ep += 1;
                } else {
                    row.ef += 1;
                }
            }
        }
        if failed == 0 {
            return Err(Error::NoFailedTests);
        }
        for row in rows.values_mut() {
            row.nf = failed - row.ef;
            row.np = passed - row.ep;
        }
        Ok(Spectrum {
            rows,
            total_failed: failed,
            total_passed: passed,
        })
    }

    pub fn score(&self, technique: Technique) -> ScoredList {
        let formula: fn(&SpectrumRow) -> f64 = match technique {
            Technique::Ochiai => |r| ochiai(r.ef, r.ep, r.nf, r.np),
            Technique::DStar => |r| dstar(r.ef, r.ep, r.nf, r.np, DSTAR_DEFAULT_STAR),
            other => panic!("{other} is not a spectrum formula"),
        };
        let entries = self
            .rows
            .iter()
            .map(|(e, r)| (e.clone(), formula(r)))
            .collect();
        ScoredList::new(technique.id(), entries).expect("spectrum rows are unique")
    }

    pub fn to_json(&self) -> SpectrumFile {
        SpectrumFile {
            elements: self
                .rows
                .iter()
                .map(|(e, r)| SpectrumEntry {
                    id: e.to_string(),
                    ef: r.ef,
                    ep: r.ep,
                    nf: r.nf,
                    np: r.np,
                })
                .collect(),
        }
    }

    /// Imports external coverage counts; every row must agree on the totals.
    pub fn from_json(file: &SpectrumFile) -> Result<Spectrum> {
        let mut rows = BTreeMap::new();
        let mut totals: Option<(u32, u32)> = None;
        for entry in &file.elements {
            let element: ProgramElement = entry.id.parse()?;
            let these = (entry.ef + entry.nf, entry.ep + entry.np);
            if *totals.get_or_insert(these) != these {
                return Err(Error::InvalidFaultCase(
                    "spectrum".into(),
                    format!("row {} disagrees on test totals", entry.id),
                ));
            }
            let row = SpectrumRow {
                ef: entry.ef,
                ep: entry.ep,
                nf: entry.nf,
                np: entry.np,
            };
            if rows.insert(element, row).is_some() {
                return Err(Error::DuplicateElement(entry.id.clone()));
            }
        }
        let (total_failed, total_passed) = totals.unwrap_or((0, 0));
        if total_failed == 0 {
            return Err(Error::NoFailedTests);
        }
        Ok(Spectrum {
            rows,
            total_failed,
            total_passed,
        })
    }
}

/// Builds the spectrum of a test suite's traces over `universe`.
pub fn build_spectrum(traces: &[ExecutionTrace], universe: &[ProgramElement]) -> Result<Spectrum> {
    Spectrum::from_coverage(traces.iter().map(|t| (t.passed(), &t.covered)), universe)
}

/// `ef / sqrt((ef + nf) * (ef + ep))`, 0 when `ef` is 0.
pub fn ochiai(ef: u32, ep: u32, nf: u32, _np: u32) -> f64 {
    if ef == 0 {
        return 0.0;
    }
    let denom = (f64::from(ef + nf) * f64::from(ef + ep)).sqrt();
    f64::from(ef) / denom
}

/// `ef^star / (ep + nf)`; `+inf` when the denominator vanishes and `ef > 0`.
pub fn dstar(ef: u32, ep: u32, nf: u32, _np: u32, star: u32) -> f64 {
    if ef == 0 {
        return 0.0;
    }
    let numer = f64::from(ef).powi(star as i32);
    match ep + nf {
        0 => f64::INFINITY,
        d => numer / f64::from(d),
    }
}

/// `{"elements": [{"id", "ef", "ep", "nf", "np"}]}`
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumFile {
    pub elements: Vec<SpectrumEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumEntry {
    pub id: String,
    pub ef: u32,
    pub ep: u32,
    pub nf: u32,
    pub np: u32,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn el(l: u32) -> ProgramElement {
        ProgramElement::new("f.ml", l, 0)
    }

    #[test]
    fn counts_follow_definitions() {
        let a = BTreeSet::from([el(1)]);
        let ab = BTreeSet::from([el(1), el(2)]);
        let universe = [el(1), el(2), el(3)];
        let s = Spectrum::from_coverage([(false, &a), (true, &ab)], &universe).unwrap();
        let row = |l| s.row(&el(l)).unwrap();
        assert_eq!(row(1), SpectrumRow { ef: 1, ep: 1, nf: 0, np: 0 });
        assert_eq!(row(2), SpectrumRow { ef: 0, ep: 1, nf: 1, np: 0 });
        assert_eq!(row(3), SpectrumRow { ef: 0, ep: 0, nf: 1, np: 1 });
    }

    #[test]
    fn repeated_failures_add_up() {
        let a = BTreeSet::from([el(1)]);
        let s = Spectrum::from_coverage([(false, &a), (false, &a)], &[el(1)]).unwrap();
        assert_eq!(s.row(&el(1)).unwrap().ef, 2);
    }

    #[test]
    fn needs_a_failure() {
        let a = BTreeSet::from([el(1)]);
        assert!(matches!(
            Spectrum::from_coverage([(true, &a)], &[el(1)]),
            Err(Error::NoFailedTests)
        ));
    }

    #[test]
    fn ochiai_values() {
        assert!((ochiai(2, 1, 0, 5) - 2.0 / 6f64.sqrt()).abs() < 1e-12);
        assert_eq!(ochiai(0, 3, 2, 1), 0.0);
        assert_eq!(ochiai(1, 0, 0, 9), 1.0);
    }

    #[test]
    fn dstar_values() {
        assert_eq!(dstar(3, 1, 1, 0, 2), 4.5);
        assert_eq!(dstar(0, 2, 1, 0, 2), 0.0);
        assert_eq!(dstar(2, 0, 0, 0, 2), f64::INFINITY);
    }

    #[test]
    fn json_round_trip_and_validation() {
        let a = BTreeSet::from([el(1)]);
        let s = Spectrum::from_coverage([(false, &a), (true, &a)], &[el(1), el(2)]).unwrap();
        let json = serde_json::to_string(&s.to_json()).unwrap();
        let back = Spectrum::from_json(&serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(back, s);

        let bad = SpectrumFile {
            elements: vec![
                SpectrumEntry { id: "f.ml:1:0".into(), ef: 1, ep: 0, nf: 0, np: 1 },
                SpectrumEntry { id: "f.ml:2:0".into(), ef: 0, ep: 0, nf: 2, np: 1 },
            ],
        };
        assert!(Spectrum::from_json(&bad).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn monotone_in_ef_and_ep(ef in 0u32..20, ep in 0u32..20, nf in 0u32..20, np in 0u32..20) {
                // Raising ef moves one failed test from "not executing" to "executing".
                if nf > 0 {
                    prop_assert!(ochiai(ef + 1, ep, nf - 1, np) >= ochiai(ef, ep, nf, np));
                    prop_assert!(dstar(ef + 1, ep, nf - 1, np, 2) >= dstar(ef, ep, nf, np, 2));
                }
                if np > 0 {
                    prop_assert!(ochiai(ef, ep + 1, nf, np - 1) <= ochiai(ef, ep, nf, np));
                    prop_assert!(dstar(ef, ep + 1, nf, np - 1, 2) <= dstar(ef, ep, nf, np, 2));
                }
            }

            #[test]
            fn identical_rows_identical_scores(
                runs in proptest::collection::vec((any::<bool>(), any::<bool>()), 1..12)
            ) {
                // Elements 1 and 2 always execute together; element 3 is independent.
                let mut covs = Vec::new();
                for (i, (together, third)) in runs.iter().enumerate() {
                    let mut c = BTreeSet::new();
                    if *together { c.insert(el(1)); c.insert(el(2)); }
                    if *third { c.insert(el(3)); }
                    covs.push((i % 2 == 0, c));
                }
                if let Ok(s) = Spectrum::from_coverage(covs.iter().map(|(p, c)| (*p, c)), &[el(1), el(2), el(3)]) {
                    for t in [Technique::Ochiai, Technique::DStar] {
                        let scores = s.score(t);
                        prop_assert_eq!(scores.score_of(&el(1)), scores.score_of(&el(2)));
                    }
                    let sum = |r: SpectrumRow| (r.ef + r.nf, r.ep + r.np);
                    for r in s.rows().values() {
                        prop_assert_eq!(sum(*r), (s.total_failed(), s.total_passed()));
                    }
                }
            }
        }
    }
}
