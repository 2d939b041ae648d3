//! Masked pixel domains.
//!
//! A [`Domain`] is the set of inside cells of a [`DomainMask`], numbered
//! row-major, together with their 4-neighbourhoods and a [`BoundaryClass`]
//! per pixel. Coordinates are `(x, y)` with `x` the column and `y` the row;
//! the gradient component `q` is the derivative along increasing `y`, and the
//! neighbour names follow that axis: [`Side::Up`] is `(x, y + 1)`,
//! [`Side::Down`] is `(x, y − 1)`.

use std::collections::VecDeque;

use crate::error::{Error, Result};

const ABSENT: u32 = u32::MAX;

/// One of the four axis neighbours of a pixel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    /// `(x, y + 1)`
    Up,
    /// `(x, y − 1)`
    Down,
    /// `(x − 1, y)`
    Left,
    /// `(x + 1, y)`
    Right,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Up, Side::Down, Side::Left, Side::Right];

    #[inline]
    pub fn slot(self) -> usize {
        match self {
            Side::Up => 0,
            Side::Down => 1,
            Side::Left => 2,
            Side::Right => 3,
        }
    }

    pub fn opposite(self) -> Side {
        match self {
            Side::Up => Side::Down,
            Side::Down => Side::Up,
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }

    /// Grid offset `(dx, dy)`.
    pub fn offset(self) -> (isize, isize) {
        match self {
            Side::Up => (0, 1),
            Side::Down => (0, -1),
            Side::Left => (-1, 0),
            Side::Right => (1, 0),
        }
    }

    /// `+1` for the sides pointing along increasing coordinates.
    pub fn sign(self) -> i32 {
        match self {
            Side::Up | Side::Right => 1,
            Side::Down | Side::Left => -1,
        }
    }

    pub fn is_horizontal(self) -> bool {
        matches!(self, Side::Left | Side::Right)
    }
}

/// Which corner a two-neighbour corner pixel sits in, named by its two
/// missing sides (`Top` = [`Side::Up`] missing, `Bottom` = [`Side::Down`]).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Corner {
    TopLeft,
    TopRight,
    BottomLeft,
    BottomRight,
}

/// Local configuration of a pixel: interior or one of the fourteen
/// boundary types.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BoundaryClass {
    Interior,
    /// Exactly one neighbour outside; the payload names it. `Down` is the
    /// "lower" boundary.
    MissingOne(Side),
    /// Only the left and right neighbours are inside.
    HorizontalLine,
    /// Only the up and down neighbours are inside.
    VerticalLine,
    Corner(Corner),
    /// Exactly one neighbour inside; the payload names the *present* one.
    OnlyNeighbor(Side),
}

impl BoundaryClass {
    /// All fifteen values, interior first.
    pub fn all() -> [BoundaryClass; 15] {
        use BoundaryClass::*;
        [
            Interior,
            MissingOne(Side::Down),
            MissingOne(Side::Up),
            MissingOne(Side::Left),
            MissingOne(Side::Right),
            HorizontalLine,
            VerticalLine,
            Corner(self::Corner::TopLeft),
            Corner(self::Corner::TopRight),
            Corner(self::Corner::BottomLeft),
            Corner(self::Corner::BottomRight),
            OnlyNeighbor(Side::Up),
            OnlyNeighbor(Side::Down),
            OnlyNeighbor(Side::Left),
            OnlyNeighbor(Side::Right),
        ]
    }

    pub fn is_interior(self) -> bool {
        self == BoundaryClass::Interior
    }

    /// Presence pattern `(up, down, left, right)` this class stands for.
    pub fn presence(self) -> [bool; 4] {
        use BoundaryClass::*;
        let mut p = [false; 4];
        match self {
            Interior => p = [true; 4],
            MissingOne(s) => {
                p = [true; 4];
                p[s.slot()] = false;
            }
            HorizontalLine => {
                p[Side::Left.slot()] = true;
                p[Side::Right.slot()] = true;
            }
            VerticalLine => {
                p[Side::Up.slot()] = true;
                p[Side::Down.slot()] = true;
            }
            Corner(c) => {
                let (v, h) = match c {
                    self::Corner::TopLeft => (Side::Down, Side::Right),
                    self::Corner::TopRight => (Side::Down, Side::Left),
                    self::Corner::BottomLeft => (Side::Up, Side::Right),
                    self::Corner::BottomRight => (Side::Up, Side::Left),
                };
                p[v.slot()] = true;
                p[h.slot()] = true;
            }
            OnlyNeighbor(s) => p[s.slot()] = true,
        }
        p
    }
}

/// Classifies a neighbour presence pattern given as `[up, down, left, right]`.
pub fn classify_boundary(presence: [bool; 4]) -> Result<BoundaryClass> {
    use BoundaryClass::*;
    let [up, down, left, right] = presence;
    let count = presence.iter().filter(|&&b| b).count();
    Ok(match count {
        4 => Interior,
        3 => {
            let missing = Side::ALL.into_iter().find(|s| !presence[s.slot()]).unwrap();
            MissingOne(missing)
        }
        2 => match (up, down, left, right) {
            (false, false, true, true) => HorizontalLine,
            (true, true, false, false) => VerticalLine,
            (false, true, false, true) => Corner(self::Corner::TopLeft),
            (false, true, true, false) => Corner(self::Corner::TopRight),
            (true, false, false, true) => Corner(self::Corner::BottomLeft),
            (true, false, true, false) => Corner(self::Corner::BottomRight),
            _ => unreachable!(),
        },
        1 => {
            let present = Side::ALL.into_iter().find(|s| presence[s.slot()]).unwrap();
            OnlyNeighbor(present)
        }
        _ => return Err(Error::IsolatedPixel { x: 0, y: 0 }),
    })
}

/// Boolean raster marking which cells belong to the domain.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DomainMask {
    width: usize,
    height: usize,
    inside: Vec<bool>,
}

impl DomainMask {
    /// `inside` is row-major, `inside[y * width + x]`.
    pub fn new(width: usize, height: usize, inside: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidMask(format!("{width}x{height} grid")));
        }
        if inside.len() != width * height {
            return Err(Error::DimensionMismatch { expected: width * height, got: inside.len() });
        }
        if !inside.iter().any(|&b| b) {
            return Err(Error::EmptyDomain);
        }
        Ok(Self { width, height, inside })
    }

    pub fn full(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![true; width * height])
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Result<Self> {
        let mut inside = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                inside.push(f(x, y));
            }
        }
        Self::new(width, height, inside)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn is_inside(&self, x: usize, y: usize) -> bool {
        x < self.width && y < self.height && self.inside[y * self.width + x]
    }

    /// Inside test for possibly out-of-range signed coordinates.
    #[inline]
    pub fn is_inside_signed(&self, x: isize, y: isize) -> bool {
        x >= 0 && y >= 0 && self.is_inside(x as usize, y as usize)
    }

    pub fn cells(&self) -> &[bool] {
        &self.inside
    }

    pub fn count(&self) -> usize {
        self.inside.iter().filter(|&&b| b).count()
    }

    pub fn is_full(&self) -> bool {
        self.inside.iter().all(|&b| b)
    }
}

/// 4-connected component labelling of a domain.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Components {
    /// Component label per linear pixel index, `0..count`.
    pub labels: Vec<u32>,
    pub count: usize,
}

impl Components {
    /// Linear pixel indices of every component, each list in increasing order.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.count];
        for (k, &c) in self.labels.iter().enumerate() {
            out[c as usize].push(k);
        }
        out
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut out = vec![0; self.count];
        for &c in &self.labels {
            out[c as usize] += 1;
        }
        out
    }
}

/// Indexed domain: the inside cells of a mask numbered `0..n` row-major.
#[derive(Clone, Debug)]
pub struct Domain {
    mask: DomainMask,
    index_of: Vec<u32>,
    pixel_of: Vec<u32>,
    neighbors: Vec<[u32; 4]>,
    classes: Vec<BoundaryClass>,
    components: Components,
}

impl Domain {
    pub fn new(mask: DomainMask) -> Result<Self> {
        build_domain(mask)
    }

    pub fn full(width: usize, height: usize) -> Result<Self> {
        build_domain(DomainMask::full(width, height)?)
    }

    pub fn mask(&self) -> &DomainMask {
        &self.mask
    }

    pub fn width(&self) -> usize {
        self.mask.width
    }

    pub fn height(&self) -> usize {
        self.mask.height
    }

    /// Number of inside pixels.
    pub fn len(&self) -> usize {
        self.pixel_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixel_of.is_empty()
    }

    pub fn is_rectangular(&self) -> bool {
        self.len() == self.mask.width * self.mask.height
    }

    /// Linear index of cell `(x, y)` if it is inside.
    #[inline]
    pub fn index_of(&self, x: usize, y: usize) -> Option<usize> {
        if x >= self.mask.width || y >= self.mask.height {
            return None;
        }
        match self.index_of[y * self.mask.width + x] {
            ABSENT => None,
            k => Some(k as usize),
        }
    }

    /// Cell coordinates `(x, y)` of linear index `k`.
    #[inline]
    pub fn pixel_of(&self, k: usize) -> (usize, usize) {
        let cell = self.pixel_of[k] as usize;
        (cell % self.mask.width, cell / self.mask.width)
    }

    /// Row-major cell offset of linear index `k`.
    #[inline]
    pub fn cell_of(&self, k: usize) -> usize {
        self.pixel_of[k] as usize
    }

    #[inline]
    pub fn neighbor(&self, k: usize, side: Side) -> Option<usize> {
        match self.neighbors[k][side.slot()] {
            ABSENT => None,
            j => Some(j as usize),
        }
    }

    /// Present neighbours of `k` with the side they lie on.
    pub fn neighbors(&self, k: usize) -> impl Iterator<Item = (Side, usize)> + '_ {
        Side::ALL.into_iter().filter_map(move |s| self.neighbor(k, s).map(|j| (s, j)))
    }

    pub fn degree(&self, k: usize) -> usize {
        self.neighbors[k].iter().filter(|&&j| j != ABSENT).count()
    }

    #[inline]
    pub fn class(&self, k: usize) -> BoundaryClass {
        self.classes[k]
    }

    pub fn classes(&self) -> &[BoundaryClass] {
        &self.classes
    }

    pub fn components(&self) -> &Components {
        &self.components
    }

    /// Scatters a per-pixel vector onto the full raster, filling outside cells.
    pub fn scatter<T: Copy>(&self, values: &[T], fill: T) -> Vec<T> {
        let mut out = vec![fill; self.mask.width * self.mask.height];
        for (k, &v) in values.iter().enumerate() {
            out[self.cell_of(k)] = v;
        }
        out
    }

    /// Gathers the inside cells of a row-major raster.
    pub fn gather<T: Copy>(&self, raster: &[T]) -> Vec<T> {
        (0..self.len()).map(|k| raster[self.cell_of(k)]).collect()
    }
}

/// Numbers the inside cells row-major, links neighbours and classifies
/// every pixel. Isolated inside pixels are rejected.
pub fn build_domain(mask: DomainMask) -> Result<Domain> {
    let (w, h) = (mask.width, mask.height);
    let mut index_of = vec![ABSENT; w * h];
    let mut pixel_of = Vec::with_capacity(mask.count());
    for cell in 0..w * h {
        if mask.inside[cell] {
            index_of[cell] = pixel_of.len() as u32;
            pixel_of.push(cell as u32);
        }
    }
    if pixel_of.is_empty() {
        return Err(Error::EmptyDomain);
    }

    let mut neighbors = Vec::with_capacity(pixel_of.len());
    let mut classes = Vec::with_capacity(pixel_of.len());
    for &cell in &pixel_of {
        let cell = cell as usize;
        let (x, y) = ((cell % w) as isize, (cell / w) as isize);
        let mut slots = [ABSENT; 4];
        let mut presence = [false; 4];
        for side in Side::ALL {
            let (dx, dy) = side.offset();
            let (nx, ny) = (x + dx, y + dy);
            if mask.is_inside_signed(nx, ny) {
                slots[side.slot()] = index_of[ny as usize * w + nx as usize];
                presence[side.slot()] = true;
            }
        }
        let class = classify_boundary(presence)
            .map_err(|_| Error::IsolatedPixel { x: x as usize, y: y as usize })?;
        neighbors.push(slots);
        classes.push(class);
    }

    let mut domain = Domain {
        mask,
        index_of,
        pixel_of,
        neighbors,
        classes,
        components: Components { labels: Vec::new(), count: 0 },
    };
    domain.components = connected_components(&domain);
    Ok(domain)
}

/// Breadth-first 4-connected labelling; labels are assigned in order of the
/// smallest linear index of each component.
pub fn connected_components(domain: &Domain) -> Components {
    let n = domain.len();
    let mut labels = vec![u32::MAX; n];
    let mut count = 0u32;
    let mut queue = VecDeque::new();
    for start in 0..n {
        if labels[start] != u32::MAX {
            continue;
        }
        labels[start] = count;
        queue.push_back(start);
        while let Some(k) = queue.pop_front() {
            for (_, j) in domain.neighbors(k) {
                if labels[j] == u32::MAX {
                    labels[j] = count;
                    queue.push_back(j);
                }
            }
        }
        count += 1;
    }
    Components { labels, count: count as usize }
}
