//! Benchmark summary metrics over per-method result tables.
//!
//! The input is a small CSV of evaluation metrics (rows = methods,
//! columns = metrics, each marked higher- or lower-is-better) plus a
//! designated single-task baseline row. Two summaries are derived:
//! the average relative performance drop against the baseline (`Δm%`)
//! and the mean rank across metrics.

use crate::error::{FairGradError, Result};

/// Whether larger values of a metric are better.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MetricDirection {
    Higher,
    Lower,
}

/// A parsed method-by-metric results table with a baseline row.
#[derive(Clone, Debug)]
pub struct MetricTable {
    pub metric_names: Vec<String>,
    pub directions: Vec<MetricDirection>,
    pub methods: Vec<String>,
    /// `values[row][col]` aligned with `methods` and `metric_names`.
    pub values: Vec<Vec<f64>>,
    pub baseline: String,
}

impl MetricTable {
    /// Parses the strict CSV schema:
    ///
    /// ```text
    /// method,<metric 1>,<metric 2>,...
    /// direction,up|down,up|down,...
    /// <name>,<float>,<float>,...
    /// ```
    ///
    /// `baseline` must name one of the data rows. Errors carry the
    /// offending line number.
    pub fn parse_csv(text: &str, baseline: &str) -> Result<Self> {
        let mut rows = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());

        let (hline, header) = rows.next().ok_or(FairGradError::Parse {
            line: 1,
            message: "empty table".into(),
        })?;
        let header: Vec<&str> = header.split(',').map(str::trim).collect();
        if header.first() != Some(&"method") || header.len() < 2 {
            return Err(FairGradError::Parse {
                line: hline,
                message: "header must be `method,<metric>,...`".into(),
            });
        }
        let metric_names: Vec<String> = header[1..].iter().map(|s| s.to_string()).collect();
        let n = metric_names.len();

        let (dline, dir_row) = rows.next().ok_or(FairGradError::Parse {
            line: hline + 1,
            message: "missing direction row".into(),
        })?;
        let dir_cells: Vec<&str> = dir_row.split(',').map(str::trim).collect();
        if dir_cells.first() != Some(&"direction") || dir_cells.len() != n + 1 {
            return Err(FairGradError::Parse {
                line: dline,
                message: format!("direction row must be `direction` plus {n} of up|down"),
            });
        }
        let mut directions = Vec::with_capacity(n);
        for cell in &dir_cells[1..] {
            directions.push(match *cell {
                "up" => MetricDirection::Higher,
                "down" => MetricDirection::Lower,
                other => {
                    return Err(FairGradError::Parse {
                        line: dline,
                        message: format!("direction must be up or down, got `{other}`"),
                    })
                }
            });
        }

        let mut methods = Vec::new();
        let mut values = Vec::new();
        for (line, row) in rows {
            let cells: Vec<&str> = row.split(',').map(str::trim).collect();
            if cells.len() != n + 1 {
                return Err(FairGradError::Parse {
                    line,
                    message: format!("expected {} cells, got {}", n + 1, cells.len()),
                });
            }
            let name = cells[0].to_string();
            if name.is_empty() || methods.contains(&name) {
                return Err(FairGradError::Parse {
                    line,
                    message: format!("missing or duplicate method name `{name}`"),
                });
            }
            let mut row_values = Vec::with_capacity(n);
            for cell in &cells[1..] {
                let v: f64 = cell.parse().map_err(|_| FairGradError::Parse {
                    line,
                    message: format!("`{cell}` is not a number"),
                })?;
                if !v.is_finite() {
                    return Err(FairGradError::Parse {
                        line,
                        message: format!("value {v} is not finite"),
                    });
                }
                row_values.push(v);
            }
            methods.push(name);
            values.push(row_values);
        }

        if methods.len() < 2 {
            return Err(FairGradError::Parse {
                line: dline + 1,
                message: "need a baseline row and at least one method row".into(),
            });
        }
        if !methods.iter().any(|m| m == baseline) {
            return Err(FairGradError::InvalidInput(format!(
                "baseline `{baseline}` is not a row of the table"
            )));
        }

        Ok(Self {
            metric_names,
            directions,
            methods,
            values,
            baseline: baseline.to_string(),
        })
    }

    fn row(&self, method: &str) -> Result<&[f64]> {
        self.methods
            .iter()
            .position(|m| m == method)
            .map(|i| self.values[i].as_slice())
            .ok_or_else(|| {
                FairGradError::InvalidInput(format!("method `{method}` is not in the table"))
            })
    }

    /// Average relative performance drop of `method` against the baseline,
    /// in percent: each metric contributes `(B - M)/B` when higher is
    /// better and `(M - B)/B` when lower is better, so positive values
    /// mean the method is worse than the baseline on average.
    pub fn delta_m_percent(&self, method: &str) -> Result<f64> {
        let m = self.row(method)?;
        let b = self.row(&self.baseline.clone())?;
        let n = self.metric_names.len() as f64;
        let mut total = 0.0;
        for k in 0..self.metric_names.len() {
            if b[k] == 0.0 {
                return Err(FairGradError::Domain(format!(
                    "baseline value for metric `{}` is zero",
                    self.metric_names[k]
                )));
            }
            let rel = (m[k] - b[k]) / b[k];
            total += match self.directions[k] {
                MetricDirection::Higher => -rel,
                MetricDirection::Lower => rel,
            };
        }
        Ok(100.0 / n * total)
    }

    /// Mean across metrics of `method`'s rank among the non-baseline rows,
    /// best rank 1; ties receive the average of the positions they span.
    pub fn mean_rank(&self, method: &str) -> Result<f64> {
        if method == self.baseline {
            return Err(FairGradError::InvalidInput(
                "the baseline row is excluded from ranking".into(),
            ));
        }
        self.row(method)?;
        let contenders: Vec<usize> = (0..self.methods.len())
            .filter(|&i| self.methods[i] != self.baseline)
            .collect();
        let me = contenders
            .iter()
            .position(|&i| self.methods[i] == method)
            .expect("method verified present");

        let mut rank_sum = 0.0;
        for k in 0..self.metric_names.len() {
            // Score so that larger is always better, then rank descending.
            let score = |i: usize| -> f64 {
                match self.directions[k] {
                    MetricDirection::Higher => self.values[i][k],
                    MetricDirection::Lower => -self.values[i][k],
                }
            };
            let mine = score(contenders[me]);
            let better = contenders.iter().filter(|&&i| score(i) > mine).count();
            let tied = contenders.iter().filter(|&&i| score(i) == mine).count();
            // Positions better+1 ..= better+tied are shared; take the mean.
            rank_sum += better as f64 + (tied as f64 + 1.0) / 2.0;
        }
        Ok(rank_sum / self.metric_names.len() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const TABLE: &str = "\
method,acc,err
direction,up,down
base,10.0,2.0
x,12.0,1.0
y,11.0,1.0
z,9.0,3.0
";

    #[test]
    fn parses_the_strict_schema() {
        let table = MetricTable::parse_csv(TABLE, "base").unwrap();
        assert_eq!(table.metric_names, vec!["acc", "err"]);
        assert_eq!(
            table.directions,
            vec![MetricDirection::Higher, MetricDirection::Lower]
        );
        assert_eq!(table.methods.len(), 4);
        assert_eq!(table.values[1], vec![12.0, 1.0]);
    }

    #[test]
    fn delta_m_mixes_directions_with_signs() {
        let table = MetricTable::parse_csv(TABLE, "base").unwrap();
        // x: acc up 20% (helps), err down 50% (helps): 50·(-0.2 - 0.5) = -35.
        assert_relative_eq!(table.delta_m_percent("x").unwrap(), -35.0);
        // z: acc down 10%, err up 50%: 50·(0.1 + 0.5) = +30.
        assert_relative_eq!(table.delta_m_percent("z").unwrap(), 30.0);
        // The baseline against itself is exactly zero.
        assert_relative_eq!(table.delta_m_percent("base").unwrap(), 0.0);
    }

    #[test]
    fn mean_rank_excludes_baseline_and_averages_ties() {
        let table = MetricTable::parse_csv(TABLE, "base").unwrap();
        // acc: x=1, y=2, z=3. err: x,y tie for 1-2 -> 1.5 each, z=3.
        assert_relative_eq!(table.mean_rank("x").unwrap(), 1.25);
        assert_relative_eq!(table.mean_rank("y").unwrap(), 1.75);
        assert_relative_eq!(table.mean_rank("z").unwrap(), 3.0);
        assert!(table.mean_rank("base").is_err());
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let bad_header = "methods,acc\ndirection,up\nbase,1\nx,2\n";
        match MetricTable::parse_csv(bad_header, "base") {
            Err(FairGradError::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected parse error, got {other:?}"),
        }
        let bad_direction = "method,acc\ndirection,sideways\nbase,1\nx,2\n";
        match MetricTable::parse_csv(bad_direction, "base") {
            Err(FairGradError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
        let bad_value = "method,acc\ndirection,up\nbase,1\nx,fast\n";
        match MetricTable::parse_csv(bad_value, "base") {
            Err(FairGradError::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("expected parse error, got {other:?}"),
        }
        let missing_baseline = MetricTable::parse_csv("method,acc\ndirection,up\nx,1\ny,2\n", "base");
        assert!(matches!(
            missing_baseline,
            Err(FairGradError::InvalidInput(_))
        ));
    }

    #[test]
    fn zero_baseline_value_is_a_domain_error() {
        let text = "method,acc\ndirection,up\nbase,0.0\nx,1.0\n";
        let table = MetricTable::parse_csv(text, "base").unwrap();
        assert!(matches!(
            table.delta_m_percent("x"),
            Err(FairGradError::Domain(_))
        ));
    }
}
