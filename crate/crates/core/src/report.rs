//! Plain-text report rendering: aligned column tables for terminal output.

/// Render rows under a header with columns padded to the widest cell.
/// Column widths are computed over header and body together; a separator of
/// dashes sits between them. Rows shorter than the header are padded with
/// empty cells, longer rows extend the table.
pub fn render_table(headers: &[&str], rows: &[Vec<String>]) -> String {
    let columns = rows
        .iter()
        .map(|r| r.len())
        .chain([headers.len()])
        .max()
        .unwrap_or(0);
    if columns == 0 {
        return String::new();
    }

    let mut widths = vec![0usize; columns];
    for (i, h) in headers.iter().enumerate() {
        widths[i] = widths[i].max(h.chars().count());
    }
    for row in rows {
        for (i, cell) in row.iter().enumerate() {
            widths[i] = widths[i].max(cell.chars().count());
        }
    }

    let mut out = String::new();
    let render_row = |out: &mut String, cells: &[String]| {
        for (i, width) in widths.iter().enumerate() {
            if i > 0 {
                out.push_str("  ");
            }
            let cell = cells.get(i).map(String::as_str).unwrap_or("");
            out.push_str(cell);
            // No trailing padding on the last column.
            if i + 1 < widths.len() {
                for _ in cell.chars().count()..*width {
                    out.push(' ');
                }
            }
        }
        // Strip padding introduced by empty trailing cells.
        while out.ends_with(' ') {
            out.pop();
        }
        out.push('\n');
    };

    let header_cells: Vec<String> = headers.iter().map(|h| h.to_string()).collect();
    render_row(&mut out, &header_cells);
    let mut sep = String::new();
    for (i, width) in widths.iter().enumerate() {
        if i > 0 {
            sep.push_str("  ");
        }
        sep.extend(std::iter::repeat_n('-', *width));
    }
    out.push_str(&sep);
    out.push('\n');
    for row in rows {
        render_row(&mut out, row);
    }
    out
}

/// Format a float with `places` decimals, right for metric tables.
pub fn fixed(value: f64, places: usize) -> String {
    format!("{value:.places$}")
}
