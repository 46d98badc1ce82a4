//! Plain-text grid format.
//!
//! ```text
//! width height resolution origin_x origin_y
//! <row height-1>
//! ...
//! <row 0>
//! ```
//!
//! Each row holds `width` codes from {0 = Free, 1 = Occupied, 2 = Unknown};
//! whitespace between codes is optional. Rows are listed top (largest y)
//! first, as in an image.

use std::io::{BufRead, Write};

use super::{Cell, GridError, GridGeometry, OccupancyGrid};
use crate::Point;

impl OccupancyGrid {
    pub fn write_text<W: Write>(&self, mut out: W) -> Result<(), GridError> {
        let g = self.geometry();
        writeln!(out, "{} {} {} {} {}", g.width, g.height, g.resolution, g.origin.x, g.origin.y)?;
        let mut line = String::with_capacity(g.width + 1);
        for row in (0..g.height).rev() {
            line.clear();
            for col in 0..g.width {
                line.push(char::from(b'0' + self.get(col, row).code()));
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(input: R) -> Result<Self, GridError> {
        let mut lines = input
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l))
            .filter(|(_, l)| l.as_ref().map(|s| !s.trim().is_empty()).unwrap_or(true));
        let (n, header) = lines.next().ok_or(GridError::Parse { line: 1, msg: "missing header".into() })?;
        let header = header?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 5 {
            return Err(GridError::Parse { line: n, msg: format!("expected 5 header fields, got {}", fields.len()) });
        }
        let parse_err = |what: &str| GridError::Parse { line: n, msg: format!("bad {what}") };
        let width: usize = fields[0].parse().map_err(|_| parse_err("width"))?;
        let height: usize = fields[1].parse().map_err(|_| parse_err("height"))?;
        let res: f64 = fields[2].parse().map_err(|_| parse_err("resolution"))?;
        let ox: f64 = fields[3].parse().map_err(|_| parse_err("origin_x"))?;
        let oy: f64 = fields[4].parse().map_err(|_| parse_err("origin_y"))?;
        let geometry = GridGeometry::new(width, height, res, Point::new(ox, oy))?;
        let mut grid = OccupancyGrid::filled(geometry, Cell::Unknown);

        for k in 0..height {
            let (n, line) =
                lines.next().ok_or(GridError::Parse { line: n + k + 1, msg: format!("expected {height} rows") })?;
            let line = line?;
            let codes: Vec<char> = line.chars().filter(|c| !c.is_whitespace()).collect();
            if codes.len() != width {
                return Err(GridError::Parse { line: n, msg: format!("expected {width} cells, got {}", codes.len()) });
            }
            let row = height - 1 - k;
            for (col, ch) in codes.into_iter().enumerate() {
                let cell = ch
                    .to_digit(10)
                    .and_then(|d| Cell::from_code(d as u8))
                    .ok_or(GridError::Parse { line: n, msg: format!("invalid cell code {ch:?}") })?;
                grid.set(col, row, cell);
            }
        }
        if let Some((n, _)) = lines.next() {
            return Err(GridError::Parse { line: n, msg: "trailing data after last row".into() });
        }
        Ok(grid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_roundtrip() {
        let mut g = OccupancyGrid::new(4, 3, 0.05, Point::new(-1.5, 2.25)).unwrap();
        g.set(0, 0, Cell::Occupied);
        g.set(3, 2, Cell::Free);
        g.set(1, 1, Cell::Free);
        let mut buf = Vec::new();
        g.write_text(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text, "4 3 0.05 -1.5 2.25\n2220\n2022\n1222\n");
        let back = OccupancyGrid::read_text(&buf[..]).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn accepts_spaced_codes_and_rejects_bad_rows() {
        let g = OccupancyGrid::read_text("2 2 0.1 0 0\n0 1\n2 0\n".as_bytes()).unwrap();
        assert_eq!(g.get(1, 1), Cell::Occupied);
        assert_eq!(g.get(0, 0), Cell::Unknown);
        assert!(OccupancyGrid::read_text("2 2 0.1 0 0\n01\n".as_bytes()).is_err());
        assert!(OccupancyGrid::read_text("2 1 0.1 0 0\n03\n".as_bytes()).is_err());
        assert!(OccupancyGrid::read_text("0 1 0.1 0 0\n".as_bytes()).is_err());
    }
}
