use clap::ValueEnum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    /// Tab-separated values, one record per line, no header.
    #[default]
    Lines,
    /// Aligned columns under a header row.
    Table,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(headers: impl IntoIterator<Item = S>) -> Self {
        Self {
            headers: headers.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn render(&self, format: Format) -> String {
        let mut out = String::new();
        match format {
            Format::Lines => {
                for row in &self.rows {
                    out.push_str(&row.join("\t"));
                    out.push('\n');
                }
            }
            Format::Table => {
                let mut widths: Vec<usize> = self.headers.iter().map(|h| h.chars().count()).collect();
                for row in &self.rows {
                    for (i, cell) in row.iter().enumerate() {
                        if i < widths.len() {
                            widths[i] = widths[i].max(cell.chars().count());
                        } else {
                            widths.push(cell.chars().count());
                        }
                    }
                }
                let mut line = |cells: &[String]| {
                    let mut s = String::new();
                    for (i, cell) in cells.iter().enumerate() {
                        if i > 0 {
                            s.push_str("  ");
                        }
                        s.push_str(cell);
                        if i + 1 < cells.len() {
                            s.extend(std::iter::repeat_n(' ', widths[i] - cell.chars().count()));
                        }
                    }
                    out.push_str(s.trim_end());
                    out.push('\n');
                };
                line(&self.headers);
                for row in &self.rows {
                    line(row);
                }
            }
        }
        out
    }
}
