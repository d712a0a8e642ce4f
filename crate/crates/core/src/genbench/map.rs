use std::fmt::Write;

use super::BenchError;
use crate::hierarchy::AbstractionHierarchy;
use crate::record::ExplorationRecord;

/// Which concrete trellis cells a decode considered, and at what level.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplorationMap {
    /// `levels[s][t]`: smallest level of an instantiated ancestor-or-self of
    /// concrete state `s` at time `t`.
    levels: Vec<Vec<Option<usize>>>,
    path: Vec<usize>,
    top_level: usize,
}

pub fn render_exploration_map(
    record: &ExplorationRecord,
    h: &AbstractionHierarchy,
    path: &[usize],
) -> Result<ExplorationMap, BenchError> {
    let n = h.level_size(0);
    if record.len() != path.len() {
        return Err(BenchError::Mismatch(format!(
            "record covers {} steps, path has {}",
            record.len(),
            path.len()
        )));
    }
    if let Some(&s) = path.iter().find(|&&s| s >= n) {
        return Err(BenchError::Mismatch(format!("path state {s} outside the {n} concrete states")));
    }
    let mut levels = vec![vec![None; path.len()]; n];
    let mut below: Vec<Vec<Option<Vec<usize>>>> =
        (0..h.num_levels()).map(|l| vec![None; h.level_size(l)]).collect();
    for (t, step) in record.steps.iter().enumerate() {
        for &(level, state) in step {
            if level >= h.num_levels() || state >= h.level_size(level) {
                return Err(BenchError::Mismatch(format!(
                    "record names state {state} at level {level}, which the hierarchy lacks"
                )));
            }
            let cells = below[level][state].get_or_insert_with(|| h.descendants(level, state));
            for &c in cells.iter() {
                let cell: &mut Option<usize> = &mut levels[c][t];
                *cell = Some(cell.map_or(level, |l| l.min(level)));
            }
        }
    }
    Ok(ExplorationMap {
        levels,
        path: path.to_vec(),
        top_level: h.top_level(),
    })
}

impl ExplorationMap {
    /// Cells considered as concrete states.
    pub fn concrete_cells(&self) -> usize {
        self.levels.iter().flatten().filter(|&&l| l == Some(0)).count()
    }

    pub fn untouched_cells(&self) -> usize {
        self.levels.iter().flatten().filter(|l| l.is_none()).count()
    }

    /// One row per concrete state, one column per time: `.` untouched, the
    /// level digit otherwise, `*` on the path.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (s, row) in self.levels.iter().enumerate() {
            for (t, cell) in row.iter().enumerate() {
                let c = if self.path[t] == s {
                    '*'
                } else {
                    match cell {
                        None => '.',
                        Some(l) => std::char::from_digit(*l as u32, 36).unwrap_or('#'),
                    }
                };
                out.push(c);
            }
            out.push('\n');
        }
        out
    }

    /// Plain PGM (P2): white untouched, darker for finer levels, black path.
    pub fn to_pgm(&self) -> String {
        let width = self.path.len();
        let height = self.levels.len();
        let mut out = format!("P2\n{width} {height}\n255\n");
        let shade = |l: usize| 96 + (l * 128) / (self.top_level + 1);
        for (s, row) in self.levels.iter().enumerate() {
            let line: Vec<String> = row
                .iter()
                .enumerate()
                .map(|(t, cell)| {
                    let v = if self.path[t] == s {
                        0
                    } else {
                        cell.map_or(255, shade)
                    };
                    v.to_string()
                })
                .collect();
            writeln!(out, "{}", line.join(" ")).unwrap();
        }
        out
    }
}
