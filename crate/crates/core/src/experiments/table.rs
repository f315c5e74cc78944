use crate::error::{Error, Result};

/// Numeric table behind `estimates.csv`. Booleans are stored as 1/0 and
/// written as `true`/`false` in the `admissible` column.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimateTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl EstimateTable {
    pub fn new(columns: Vec<String>) -> Self {
        EstimateTable {
            columns,
            rows: Vec::new(),
        }
    }

    pub fn index(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::Parse(format!("estimates table has no column '{name}'")))
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let i = self.index(name)?;
        Ok(self.rows.iter().map(|r| r[i]).collect())
    }

    /// Appends a row given as already-formatted CSV fields.
    pub fn push_fields(&mut self, fields: &[String]) -> Result<()> {
        if fields.len() != self.columns.len() {
            return Err(Error::Parse(format!(
                "row has {} fields, expected {}",
                fields.len(),
                self.columns.len()
            )));
        }
        self.rows.push(
            fields
                .iter()
                .map(|f| parse_field(f))
                .collect::<Result<_>>()?,
        );
        Ok(())
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty estimates table".into()))?;
        let mut table = EstimateTable::new(header.split(',').map(str::to_string).collect());
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let fields: Vec<String> = line.split(',').map(str::to_string).collect();
            table.push_fields(&fields)?;
        }
        Ok(table)
    }
}

fn parse_field(f: &str) -> Result<f64> {
    match f.trim() {
        "true" => Ok(1.0),
        "false" => Ok(0.0),
        s => s
            .parse()
            .map_err(|_| Error::Parse(format!("cannot parse table field '{s}'"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_booleans_and_nan() {
        let t = EstimateTable::from_csv("a,admissible,b\n1,true,NaN\n2.5e0,false,-3\n").unwrap();
        assert_eq!(t.column("a").unwrap(), vec![1.0, 2.5]);
        assert_eq!(t.column("admissible").unwrap(), vec![1.0, 0.0]);
        assert!(t.rows[0][2].is_nan());
        assert!(t.column("zzz").is_err());
        assert!(EstimateTable::from_csv("a,b\n1\n").is_err());
    }
}
