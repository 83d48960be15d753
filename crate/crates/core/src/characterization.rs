//! Frequency, diversity and duration of the wearer's interactions, overall or with one
//! person.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::clustering::ClusterSet;
use crate::error::{Error, Result};
use crate::model::Category;
use crate::numerics::shannon_entropy_nat;
use crate::scalar::Scalar;
use crate::selection::InteractionRecord;

/// Minutes per frame of a camera taking two pictures per minute.
pub const DEFAULT_FRAME_PERIOD: f64 = 0.5;

fn counts(records: &[InteractionRecord]) -> (usize, usize) {
    let formal = records.iter().filter(|r| r.category == Category::Formal).count();
    (formal, records.len() - formal)
}

/// Formal and informal interactions per day.
pub fn frequency<T: Scalar>(records: &[InteractionRecord], day_count: usize) -> Result<(T, T)> {
    if day_count == 0 {
        return Err(Error::InvalidArgument("day count must be at least 1".into()));
    }
    let (f, inf) = counts(records);
    let days = T::of(day_count as f64);
    Ok((T::of(f as f64) / days, T::of(inf as f64) / days))
}

/// Shares of formal and informal interactions.
pub fn interaction_shares<T: Scalar>(records: &[InteractionRecord]) -> Result<(T, T)> {
    if records.is_empty() {
        return Err(Error::NoInteractions);
    }
    let (f, inf) = counts(records);
    let n = T::of(records.len() as f64);
    Ok((T::of(f as f64) / n, T::of(inf as f64) / n))
}

/// Half the exponential of the Shannon entropy (nats) of the two shares: 0.5 when all
/// interactions share one category, 1 when they are balanced.
pub fn diversity<T: Scalar>(a_formal: T, a_informal: T) -> Result<T> {
    let h = shannon_entropy_nat(&[a_formal, a_informal])?;
    Ok(T::of(0.5) * h.exp())
}

/// Mean interaction length `frame_count · frame_period` and its standard error.
pub fn duration_stats<T: Scalar>(records: &[InteractionRecord], frame_period: T) -> Result<(T, T)> {
    if records.is_empty() {
        return Err(Error::NoInteractions);
    }
    if !(frame_period > T::zero()) {
        return Err(Error::InvalidArgument(format!("frame period {frame_period} must be positive")));
    }
    let lengths: Vec<T> = records.iter().map(|r| T::of(r.frame_count as f64) * frame_period).collect();
    let n = T::of(lengths.len() as f64);
    let mean = lengths.iter().copied().sum::<T>() / n;
    if lengths.len() < 2 {
        return Ok((mean, T::zero()));
    }
    let var = lengths.iter().map(|&l| (l - mean) * (l - mean)).sum::<T>() / (n - T::one());
    Ok((mean, (var / n).sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "cluster")]
pub enum Scope {
    Generic,
    Person(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CharacterizationParams {
    /// Distinct days covered by the dataset; the day basis of the generic scope.
    pub dataset_days: usize,
    /// Time per frame.
    pub frame_period: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct CharacterizationReport<T: Scalar> {
    pub scope: Scope,
    pub n_interactions: usize,
    pub n_formal: usize,
    pub n_informal: usize,
    pub n_days: usize,
    pub f_formal: T,
    pub f_informal: T,
    pub a_formal: T,
    pub a_informal: T,
    pub diversity: T,
    pub duration_mean: T,
    pub duration_sem: T,
    pub frame_period: T,
}

/// Records of the interactions with the person of cluster `j`.
pub fn person_records(records: &[InteractionRecord], clusters: &ClusterSet, j: usize) -> Vec<InteractionRecord> {
    records
        .iter()
        .filter(|r| clusters.cluster_of(&r.prototype_id) == Some(j))
        .cloned()
        .collect()
}

/// Computes every metric over the records in `scope`.
///
/// The generic scope divides by the dataset's day count. A person scope divides by the
/// number of distinct days on which interactions with that person occur.
pub fn characterize<T: Scalar>(
    records: &[InteractionRecord],
    clusters: Option<&ClusterSet>,
    scope: Scope,
    params: &CharacterizationParams,
) -> Result<CharacterizationReport<T>> {
    let (selected, n_days) = match scope {
        Scope::Generic => (records.to_vec(), params.dataset_days),
        Scope::Person(j) => {
            let clusters =
                clusters.ok_or_else(|| Error::InvalidArgument("person scope requires clusters".into()))?;
            if j >= clusters.len() {
                return Err(Error::InvalidArgument(format!("cluster {j} out of range ({} clusters)", clusters.len())));
            }
            let selected = person_records(records, clusters, j);
            if selected.is_empty() {
                return Err(Error::PersonHasNoInteractions);
            }
            let days = selected.iter().map(|r| r.day_index).collect::<BTreeSet<_>>().len();
            (selected, days)
        }
    };
    let (f_formal, f_informal) = frequency::<T>(&selected, n_days)?;
    let (a_formal, a_informal) = interaction_shares::<T>(&selected)?;
    let frame_period = T::of(params.frame_period);
    let (duration_mean, duration_sem) = duration_stats(&selected, frame_period)?;
    let (n_formal, n_informal) = counts(&selected);
    Ok(CharacterizationReport {
        scope,
        n_interactions: selected.len(),
        n_formal,
        n_informal,
        n_days,
        f_formal,
        f_informal,
        a_formal,
        a_informal,
        diversity: diversity(a_formal, a_informal)?,
        duration_mean,
        duration_sem,
        frame_period,
    })
}

/// Plain-text table with one row per report.
pub fn render_table<T: Scalar>(reports: &[CharacterizationReport<T>]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<18}{:>10}{:>12}{:>10}{:>12}{:>8}{:>18}",
        "", "F-Formal", "F-Informal", "A-Formal", "A-Informal", "D", "L"
    );
    for r in reports {
        let name = match r.scope {
            Scope::Generic => "Generic".to_string(),
            Scope::Person(j) => format!("Person-specific {j}"),
        };
        let duration = format!("{:.2} ± {:.2}", r.duration_mean.as_f64(), r.duration_sem.as_f64());
        let _ = writeln!(
            out,
            "{:<18}{:>10.2}{:>12.2}{:>10.2}{:>12.2}{:>8.2}{:>18}",
            name,
            r.f_formal.as_f64(),
            r.f_informal.as_f64(),
            r.a_formal.as_f64(),
            r.a_informal.as_f64(),
            r.diversity.as_f64(),
            duration
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PrototypeId;

    fn record(i: u64, category: Category, day: u32, frames: usize) -> InteractionRecord {
        InteractionRecord {
            prototype_id: PrototypeId { event_id: i, track_id: 0 },
            event_id: i,
            day_index: day,
            category,
            frame_count: frames,
            person_id: None,
        }
    }

    #[test]
    fn frequency_cases() {
        assert_eq!(frequency::<f64>(&[], 30).unwrap(), (0.0, 0.0));
        assert!(frequency::<f64>(&[], 0).is_err());
        let informal: Vec<_> = (0..75).map(|i| record(i, Category::Informal, 0, 1)).collect();
        assert_eq!(frequency::<f64>(&informal, 30).unwrap().1, 2.5);
    }

    #[test]
    fn shares_and_diversity() {
        let all_formal: Vec<_> = (0..3).map(|i| record(i, Category::Formal, 0, 1)).collect();
        assert_eq!(interaction_shares::<f64>(&all_formal).unwrap(), (1.0, 0.0));
        assert!(matches!(interaction_shares::<f64>(&[]), Err(Error::NoInteractions)));
        assert_eq!(diversity(1.0f64, 0.0).unwrap(), 0.5);
        assert!((diversity(0.5f64, 0.5).unwrap() - 1.0).abs() < 1e-12);
        assert!((diversity(0.25f64, 0.75).unwrap() - 0.8774).abs() < 1e-3);
        assert!(diversity(0.7f64, 0.7).is_err());
    }

    #[test]
    fn duration_cases() {
        let single = [record(0, Category::Formal, 0, 60)];
        assert_eq!(duration_stats(&single, 0.5f64).unwrap(), (30.0, 0.0));
        let pair = [record(0, Category::Formal, 0, 10), record(1, Category::Formal, 0, 20)];
        let (mean, sem) = duration_stats(&pair, 1.0f64).unwrap();
        assert_eq!(mean, 15.0);
        assert!((sem - 5.0).abs() < 1e-12);
        assert!(duration_stats(&pair, 0.0f64).is_err());
    }

    #[test]
    fn person_scope_counts_own_days() {
        let mut records = vec![record(0, Category::Formal, 0, 10)];
        records.extend((1..5).map(|i| record(i, Category::Informal, i as u32 - 1, 10)));
        records.push(record(9, Category::Formal, 7, 10));
        let person: Vec<PrototypeId> = records[..5].iter().map(|r| r.prototype_id).collect();
        let clusters = ClusterSet::from_clusters(vec![person, vec![records[5].prototype_id]]);
        let params = CharacterizationParams { dataset_days: 30, frame_period: 0.5 };
        let r = characterize::<f64>(&records, Some(&clusters), Scope::Person(0), &params).unwrap();
        assert_eq!((r.a_formal, r.a_informal), (0.2, 0.8));
        assert_eq!((r.f_formal, r.f_informal), (0.25, 1.0));
        assert!(characterize::<f64>(&records, None, Scope::Person(0), &params).is_err());
        assert!(characterize::<f64>(&records, Some(&clusters), Scope::Person(2), &params).is_err());
        let empty = ClusterSet::from_clusters(vec![vec![PrototypeId { event_id: 99, track_id: 0 }]]);
        assert!(matches!(
            characterize::<f64>(&records, Some(&empty), Scope::Person(0), &params),
            Err(Error::PersonHasNoInteractions)
        ));
    }

    #[test]
    fn table_layout() {
        let records: Vec<_> = (0..4).map(|i| record(i, Category::Informal, 0, 10)).collect();
        let params = CharacterizationParams { dataset_days: 2, frame_period: 1.0 };
        let r = characterize::<f64>(&records, None, Scope::Generic, &params).unwrap();
        let table = render_table(&[r]);
        assert!(table.lines().next().unwrap().contains("F-Formal"));
        assert!(table.contains("Generic"));
        assert!(table.contains("10.00 ± 0.00"));
    }
}
