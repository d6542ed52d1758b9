use rand::Rng as _;

use super::{Env, EnumerableEnv, TabularEnv};
use crate::error::{Error, Result};
use crate::fixtures;
use crate::label::{Label, PropositionSet};
use crate::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    North,
    East,
    South,
    West,
}

impl Direction {
    pub const ALL: [Direction; 4] = [Direction::North, Direction::East, Direction::South, Direction::West];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Self {
        Self::ALL[i % 4]
    }

    /// Counter-clockwise neighbour.
    pub fn left(self) -> Self {
        Self::from_index(self.index() + 3)
    }

    pub fn right(self) -> Self {
        Self::from_index(self.index() + 1)
    }

    fn delta(self) -> (isize, isize) {
        match self {
            Direction::North => (-1, 0),
            Direction::East => (0, 1),
            Direction::South => (1, 0),
            Direction::West => (0, -1),
        }
    }

    pub fn symbol(self) -> char {
        ['N', 'E', 'S', 'W'][self.index()]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OfficeCell {
    pub row: usize,
    pub col: usize,
    pub glyph: char,
    pub label: Label,
    /// `h` and `t` cells keep the agent in place.
    pub stationary: bool,
}

/// Slippery gridworld loaded from an ASCII map.
///
/// Glyphs: `#` wall, `.` floor, `W` warm floor, `B` cold floor, `o` start,
/// `c` coffee, `m` mail, `h` decoration, `t` office. Object cells take the
/// warm or cold label of the majority of their open 4-neighbours.
#[derive(Debug, Clone)]
pub struct Office {
    width: usize,
    height: usize,
    index: Vec<Option<usize>>,
    cells: Vec<OfficeCell>,
    moves: Vec<[usize; 4]>,
    start: usize,
    props: PropositionSet,
}

pub const OFFICE_PROPS: [&str; 6] = ["c", "m", "h", "t", "warm", "cold"];

impl Office {
    pub fn parse(map: &str) -> Result<Self> {
        let rows: Vec<Vec<char>> = map
            .lines()
            .map(|l| l.trim_end().chars().collect::<Vec<_>>())
            .filter(|r| !r.is_empty())
            .collect();
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.len());
        if height == 0 || width == 0 {
            return Err(Error::Config("office map is empty".into()));
        }
        if let Some(i) = rows.iter().position(|r| r.len() != width) {
            return Err(Error::Config(format!("office map row {} has length {}, expected {width}", i + 1, rows[i].len())));
        }
        let props = PropositionSet::new(OFFICE_PROPS).expect("static proposition set");
        let mut index = vec![None; width * height];
        let mut cells = Vec::new();
        let mut start = None;
        for (r, row) in rows.iter().enumerate() {
            for (c, &g) in row.iter().enumerate() {
                let label = match g {
                    '#' => continue,
                    '.' | 'o' => Label::EMPTY,
                    'W' => Label::EMPTY.with(4),
                    'B' => Label::EMPTY.with(5),
                    'c' => Label::EMPTY.with(0),
                    'm' => Label::EMPTY.with(1),
                    'h' => Label::EMPTY.with(2),
                    't' => Label::EMPTY.with(3),
                    other => {
                        return Err(Error::Config(format!(
                            "office map has unknown glyph `{other}` at row {}, column {}",
                            r + 1,
                            c + 1
                        )))
                    }
                };
                if g == 'o' {
                    if start.is_some() {
                        return Err(Error::Config("office map has more than one start cell".into()));
                    }
                    start = Some(cells.len());
                }
                index[r * width + c] = Some(cells.len());
                cells.push(OfficeCell {
                    row: r,
                    col: c,
                    glyph: g,
                    label,
                    stationary: g == 'h' || g == 't',
                });
            }
        }
        let start = start.ok_or_else(|| Error::Config("office map has no start cell `o`".into()))?;
        let mut office = Self {
            width,
            height,
            index,
            cells,
            moves: Vec::new(),
            start,
            props,
        };
        office.moves = (0..office.cells.len())
            .map(|i| Direction::ALL.map(|d| office.neighbour(i, d)))
            .collect();
        office.inherit_temperature();
        Ok(office)
    }

    /// The shipped 12×9 map.
    pub fn default_map() -> Self {
        Self::parse(fixtures::OFFICE_MAP).expect("shipped office map is valid")
    }

    fn neighbour(&self, cell: usize, d: Direction) -> usize {
        let OfficeCell { row, col, .. } = self.cells[cell];
        let (dr, dc) = d.delta();
        let (r, c) = (row as isize + dr, col as isize + dc);
        if r < 0 || c < 0 || r >= self.height as isize || c >= self.width as isize {
            return cell;
        }
        self.index[r as usize * self.width + c as usize].unwrap_or(cell)
    }

    fn inherit_temperature(&mut self) {
        for i in 0..self.cells.len() {
            if !matches!(self.cells[i].glyph, 'o' | 'c' | 'm' | 'h' | 't') {
                continue;
            }
            let (mut warm, mut cold) = (0, 0);
            for d in Direction::ALL {
                let n = self.moves[i][d.index()];
                if n != i {
                    match self.cells[n].glyph {
                        'W' => warm += 1,
                        'B' => cold += 1,
                        _ => {}
                    }
                }
            }
            if warm > cold {
                self.cells[i].label = self.cells[i].label.with(4);
            } else if cold > warm {
                self.cells[i].label = self.cells[i].label.with(5);
            }
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cells(&self) -> &[OfficeCell] {
        &self.cells
    }

    pub fn cell_at(&self, row: usize, col: usize) -> Option<usize> {
        if row >= self.height || col >= self.width {
            return None;
        }
        self.index[row * self.width + col]
    }

    pub fn start(&self) -> usize {
        self.start
    }

    /// Deterministic successor of a single move attempt.
    pub fn moved(&self, cell: usize, d: Direction) -> usize {
        self.moves[cell][d.index()]
    }

    /// Exact successor distribution, merged over coinciding outcomes.
    pub fn transition_probs(&self, cell: usize, action: Direction) -> Vec<(usize, f64)> {
        if self.cells[cell].stationary {
            return vec![(cell, 1.0)];
        }
        let mut out: Vec<(usize, f64)> = Vec::with_capacity(3);
        for d in [action, action.left(), action.right()] {
            let n = self.moved(cell, d);
            match out.iter_mut().find(|(c, _)| *c == n) {
                Some(entry) => entry.1 += 1.0 / 3.0,
                None => out.push((n, 1.0 / 3.0)),
            }
        }
        out
    }

    /// Renders the map with one character per cell from `f`, walls as `#`.
    pub fn render(&self, mut f: impl FnMut(usize) -> char) -> String {
        let mut s = String::new();
        for r in 0..self.height {
            for c in 0..self.width {
                s.push(match self.index[r * self.width + c] {
                    Some(i) => f(i),
                    None => '#',
                });
            }
            s.push('\n');
        }
        s
    }
}

impl Env for Office {
    type State = usize;
    type Action = Direction;

    fn name(&self) -> &str {
        "office"
    }

    fn props(&self) -> &PropositionSet {
        &self.props
    }

    fn initial_state(&self) -> usize {
        self.start
    }

    fn step(&self, state: &usize, action: &Direction, rng: &mut Rng) -> usize {
        if self.cells[*state].stationary {
            return *state;
        }
        let d = match rng.random_range(0..3) {
            0 => *action,
            1 => action.left(),
            _ => action.right(),
        };
        self.moved(*state, d)
    }

    fn label(&self, state: &usize) -> Label {
        self.cells[*state].label
    }
}

impl TabularEnv for Office {
    fn num_cells(&self) -> usize {
        self.cells.len()
    }

    fn cell(&self, state: &usize) -> usize {
        *state
    }

    fn num_actions(&self) -> usize {
        4
    }

    fn action(&self, index: usize) -> Direction {
        Direction::from_index(index)
    }
}

impl EnumerableEnv for Office {
    fn state_of_cell(&self, cell: usize) -> usize {
        cell
    }

    fn kernel(&self, cell: usize, action: usize) -> Vec<(usize, f64)> {
        self.transition_probs(cell, Direction::from_index(action))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeded_rng;

    const SMALL: &str = "#####\n#o.h#\n#.#t#\n#####\n";

    #[test]
    fn parses_default_map() {
        let o = Office::default_map();
        assert_eq!((o.width(), o.height()), (12, 9));
        let count = |g: char| o.cells().iter().filter(|c| c.glyph == g).count();
        assert_eq!((count('o'), count('c'), count('m'), count('t')), (1, 1, 1, 1));
        assert_eq!(count('h'), 3);
        assert!(o.cells().iter().any(|c| c.label.contains(4)));
        assert!(o.cells().iter().any(|c| c.label.contains(5)));
    }

    #[test]
    fn walls_block() {
        let o = Office::parse(SMALL).unwrap();
        let s = o.start();
        assert_eq!(o.moved(s, Direction::North), s);
        assert_eq!(o.moved(s, Direction::West), s);
        assert_eq!(o.cells()[o.moved(s, Direction::East)].col, 2);
        assert_eq!(o.cells()[o.moved(s, Direction::South)].row, 2);
    }

    #[test]
    fn stationary_cells() {
        let o = Office::parse(SMALL).unwrap();
        let t = o.cell_at(2, 3).unwrap();
        let mut rng = seeded_rng(3);
        for d in Direction::ALL {
            assert_eq!(o.step(&t, &d, &mut rng), t);
        }
        assert_eq!(o.transition_probs(t, Direction::North), vec![(t, 1.0)]);
    }

    #[test]
    fn kernel_sums_to_one() {
        let o = Office::default_map();
        for c in 0..o.num_cells() {
            for d in Direction::ALL {
                let p: f64 = o.transition_probs(c, d).iter().map(|x| x.1).sum();
                assert!((p - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn malformed_maps() {
        assert!(Office::parse("").is_err());
        assert!(Office::parse("###\n#.#\n###\n").is_err());
        assert!(Office::parse("####\n#oo#\n####\n").is_err());
        assert!(Office::parse("####\n#ox#\n####\n").is_err());
        assert!(Office::parse("####\n#o#\n####\n").is_err());
    }
}
