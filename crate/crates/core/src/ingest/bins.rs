use serde::{Deserialize, Serialize};

use super::records::SubmissionRecord;
use crate::error::{Error, Result};
use crate::geo::LocalTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinResolution {
    /// 24 cells, one per local hour.
    Hour,
    /// 12 × 24 cells keyed by local month and hour.
    MonthHour,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BinKey {
    pub month: Option<u8>,
    pub hour: u8,
}

impl BinResolution {
    pub fn cell_count(self) -> usize {
        match self {
            BinResolution::Hour => 24,
            BinResolution::MonthHour => 12 * 24,
        }
    }

    fn key(self, cell: usize) -> BinKey {
        match self {
            BinResolution::Hour => BinKey {
                month: None,
                hour: cell as u8,
            },
            BinResolution::MonthHour => BinKey {
                month: Some((cell / 24 + 1) as u8),
                hour: (cell % 24) as u8,
            },
        }
    }

    fn cell(self, month: u8, hour: u8) -> usize {
        match self {
            BinResolution::Hour => hour as usize,
            BinResolution::MonthHour => (month as usize - 1) * 24 + hour as usize,
        }
    }
}

/// Partition of record row indices into local-time cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinIndex {
    resolution: BinResolution,
    cells: Vec<Vec<usize>>,
}

impl BinIndex {
    pub fn empty(resolution: BinResolution) -> Self {
        Self {
            resolution,
            cells: vec![Vec::new(); resolution.cell_count()],
        }
    }

    /// Builds an index from `(row, month, hour)` triples in row order.
    pub fn from_assignments(
        resolution: BinResolution,
        assignments: impl IntoIterator<Item = (usize, u8, u8)>,
    ) -> Result<Self> {
        let mut idx = Self::empty(resolution);
        for (row, month, hour) in assignments {
            if hour > 23 || !(1..=12).contains(&month) {
                return Err(Error::InvalidArgument(format!(
                    "month {month} / hour {hour} out of range"
                )));
            }
            idx.cells[resolution.cell(month, hour)].push(row);
        }
        Ok(idx)
    }

    pub fn resolution(&self) -> BinResolution {
        self.resolution
    }

    pub fn get(&self, key: BinKey) -> &[usize] {
        let cell = match (self.resolution, key.month) {
            (BinResolution::Hour, _) => key.hour as usize,
            (BinResolution::MonthHour, Some(m)) => self.resolution.cell(m, key.hour),
            (BinResolution::MonthHour, None) => return &[],
        };
        self.cells.get(cell).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn iter(&self) -> impl Iterator<Item = (BinKey, &[usize])> + '_ {
        self.cells
            .iter()
            .enumerate()
            .map(move |(c, rows)| (self.resolution.key(c), rows.as_slice()))
    }

    pub fn total(&self) -> usize {
        self.cells.iter().map(Vec::len).sum()
    }

    /// Collapses a month × hour index onto hours, keeping ascending row order.
    pub fn pooled_by_hour(&self) -> BinIndex {
        let mut out = BinIndex::empty(BinResolution::Hour);
        for (key, rows) in self.iter() {
            out.cells[key.hour as usize].extend_from_slice(rows);
        }
        for cell in &mut out.cells {
            cell.sort_unstable();
        }
        out
    }
}

/// Assigns every record to the cell of its local hour (and month).
pub fn bin_by_hour(
    records: &[SubmissionRecord],
    local_times: &[Option<LocalTime>],
    resolution: BinResolution,
) -> Result<BinIndex> {
    if records.len() != local_times.len() {
        return Err(Error::InvalidArgument(format!(
            "{} records but {} local times",
            records.len(),
            local_times.len()
        )));
    }
    let assignments = records
        .iter()
        .zip(local_times)
        .enumerate()
        .map(|(row, (rec, lt))| {
            lt.as_ref()
                .map(|t| (row, t.month, t.hour))
                .ok_or_else(|| Error::MissingLocalTime(rec.id.clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    BinIndex::from_assignments(resolution, assignments)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::to_local_time;
    use proptest::prelude::*;

    fn rec(id: &str, t: i64) -> SubmissionRecord {
        SubmissionRecord::new(id, t)
    }

    #[test]
    fn floor_of_local_hour() {
        // 2024-07-15T04:59:59Z
        let r = [rec("a", 1_721_019_599)];
        let lt = [Some(to_local_time(r[0].created_utc, "Etc/UTC").unwrap())];
        let idx = bin_by_hour(&r, &lt, BinResolution::Hour).unwrap();
        assert_eq!(idx.get(BinKey { month: None, hour: 4 }), &[0]);
    }

    #[test]
    fn month_hour_cell() {
        // 2024-07-15T23:30:00Z
        let r = [rec("a", 1_721_086_200)];
        let lt = [Some(to_local_time(r[0].created_utc, "Etc/UTC").unwrap())];
        let idx = bin_by_hour(&r, &lt, BinResolution::MonthHour).unwrap();
        assert_eq!(idx.get(BinKey { month: Some(7), hour: 23 }), &[0]);
        assert_eq!(idx.total(), 1);
    }

    #[test]
    fn empty_input_gives_empty_cells() {
        let idx = bin_by_hour(&[], &[], BinResolution::MonthHour).unwrap();
        assert_eq!(idx.iter().count(), 288);
        assert!(idx.iter().all(|(_, rows)| rows.is_empty()));
    }

    #[test]
    fn missing_local_time_is_fatal() {
        let r = [rec("a", 100)];
        assert!(matches!(
            bin_by_hour(&r, &[None], BinResolution::Hour),
            Err(Error::MissingLocalTime(id)) if id == "a"
        ));
    }

    proptest! {
        #[test]
        fn partition(times in prop::collection::vec(1_600_000_000i64..1_800_000_000, 0..200)) {
            let records: Vec<_> = times.iter().enumerate().map(|(i, &t)| rec(&format!("r{i}"), t)).collect();
            let lts: Vec<_> = records.iter().map(|r| Some(to_local_time(r.created_utc, "America/New_York").unwrap())).collect();
            for res in [BinResolution::Hour, BinResolution::MonthHour] {
                let idx = bin_by_hour(&records, &lts, res).unwrap();
                prop_assert_eq!(idx.total(), records.len());
                let mut all: Vec<usize> = idx.iter().flat_map(|(_, r)| r.iter().copied()).collect();
                all.sort_unstable();
                prop_assert_eq!(all, (0..records.len()).collect::<Vec<_>>());
            }
        }
    }
}
