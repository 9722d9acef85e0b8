//! Lattice points and step-sequence paths on Z².

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: i64,
    pub y: i64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0, y: 0 };

    pub const fn new(x: i64, y: i64) -> Self {
        Self { x, y }
    }

    pub fn step(self, s: Step) -> Point {
        let (dx, dy) = s.delta();
        Point::new(self.x + dx, self.y + dy)
    }

    pub fn l1(self) -> i64 {
        self.x.abs() + self.y.abs()
    }
}

impl std::ops::Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl std::ops::Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Unit lattice step. `Right`/`Up` are the forward steps e₁/e₂.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Step {
    Right,
    Up,
    Left,
    Down,
}

impl Step {
    pub fn delta(self) -> (i64, i64) {
        match self {
            Step::Right => (1, 0),
            Step::Up => (0, 1),
            Step::Left => (-1, 0),
            Step::Down => (0, -1),
        }
    }

    pub fn is_forward(self) -> bool {
        matches!(self, Step::Right | Step::Up)
    }

    pub fn between(a: Point, b: Point) -> Option<Step> {
        match (b.x - a.x, b.y - a.y) {
            (1, 0) => Some(Step::Right),
            (0, 1) => Some(Step::Up),
            (-1, 0) => Some(Step::Left),
            (0, -1) => Some(Step::Down),
            _ => None,
        }
    }
}

/// A path given by its start and a step sequence.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LatticePath {
    pub start: Point,
    pub steps: Vec<Step>,
}

impl LatticePath {
    pub fn new(start: Point, steps: Vec<Step>) -> Self {
        Self { start, steps }
    }

    /// Builds a path from consecutive vertices; each pair must be unit-adjacent.
    pub fn from_vertices(vertices: &[Point]) -> Result<Self> {
        let start = *vertices
            .first()
            .ok_or_else(|| LabError::Config("path needs at least one vertex".into()))?;
        let steps = vertices
            .windows(2)
            .map(|w| {
                Step::between(w[0], w[1]).ok_or_else(|| {
                    LabError::Config(format!("vertices {} and {} are not adjacent", w[0], w[1]))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { start, steps })
    }

    pub fn vertices(&self) -> Vec<Point> {
        let mut out = Vec::with_capacity(self.steps.len() + 1);
        let mut p = self.start;
        out.push(p);
        for &s in &self.steps {
            p = p.step(s);
            out.push(p);
        }
        out
    }

    pub fn end(&self) -> Point {
        self.steps.iter().fold(self.start, |p, &s| p.step(s))
    }

    /// Number of steps.
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn is_up_right(&self) -> bool {
        self.steps.iter().all(|s| s.is_forward())
    }

    pub fn backward_steps(&self) -> usize {
        self.steps.iter().filter(|s| !s.is_forward()).count()
    }

    /// Sum of `weight(v)` over the vertices of the path, each visit counted.
    pub fn weight<F: FnMut(Point) -> f64>(&self, mut weight: F) -> f64 {
        self.vertices().into_iter().map(&mut weight).sum()
    }
}
