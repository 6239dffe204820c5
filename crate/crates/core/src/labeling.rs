//! Connected-component labeling for binary slices (2D) and volumes (3D).
//!
//! Components are discovered by breadth-first search in a fixed scan
//! order (x fastest), so labeling is fully deterministic: components are
//! returned ordered by their first pixel/voxel, each with its members
//! sorted in scan order.

use crate::error::{Error, Result};
use crate::volume::Dims;

/// Pixel neighborhood on a slice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Connectivity2D {
    Four,
    Eight,
}

impl Connectivity2D {
    pub fn from_u8(n: u8) -> Result<Self> {
        match n {
            4 => Ok(Connectivity2D::Four),
            8 => Ok(Connectivity2D::Eight),
            other => Err(Error::InvalidParam(format!(
                "2D connectivity must be 4 or 8, got {other}"
            ))),
        }
    }

    pub fn as_u8(&self) -> u8 {
        match self {
            Connectivity2D::Four => 4,
            Connectivity2D::Eight => 8,
        }
    }
}

/// Voxel neighborhood in a volume.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Connectivity3D {
    Six,
    TwentySix,
}

impl Connectivity3D {
    pub fn from_u8(n: u8) -> Result<Self> {
        match n {
            6 => Ok(Connectivity3D::Six),
            26 => Ok(Connectivity3D::TwentySix),
            other => Err(Error::InvalidParam(format!(
                "3D connectivity must be 6 or 26, got {other}"
            ))),
        }
    }

    pub fn as_u8(&self) -> u8 {
        match self {
            Connectivity3D::Six => 6,
            Connectivity3D::TwentySix => 26,
        }
    }
}

/// One 2D connected component: member pixels as (x, y), scan-ordered.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Component2D {
    pub pixels: Vec<(usize, usize)>,
}

impl Component2D {
    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }
}

/// Label a binary slice (`bits[x + nx*y]`) into connected components.
pub fn label_slice(
    bits: &[bool],
    nx: usize,
    ny: usize,
    connectivity: Connectivity2D,
) -> Vec<Component2D> {
    assert_eq!(bits.len(), nx * ny, "slice buffer does not match nx*ny");
    let mut seen = vec![false; bits.len()];
    let mut components = Vec::new();
    let mut queue: Vec<usize> = Vec::new();
    for start in 0..bits.len() {
        if !bits[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        queue.clear();
        queue.push(start);
        let mut pixels = Vec::new();
        let mut head = 0;
        while head < queue.len() {
            let idx = queue[head];
            head += 1;
            let (x, y) = (idx % nx, idx / nx);
            pixels.push((x, y));
            let mut visit = |xn: isize, yn: isize| {
                if xn < 0 || yn < 0 || xn as usize >= nx || yn as usize >= ny {
                    return;
                }
                let n = xn as usize + nx * yn as usize;
                if bits[n] && !seen[n] {
                    seen[n] = true;
                    queue.push(n);
                }
            };
            let (xi, yi) = (x as isize, y as isize);
            visit(xi - 1, yi);
            visit(xi + 1, yi);
            visit(xi, yi - 1);
            visit(xi, yi + 1);
            if connectivity == Connectivity2D::Eight {
                visit(xi - 1, yi - 1);
                visit(xi + 1, yi - 1);
                visit(xi - 1, yi + 1);
                visit(xi + 1, yi + 1);
            }
        }
        pixels.sort_unstable_by_key(|&(x, y)| (y, x));
        components.push(Component2D { pixels });
    }
    components
}

/// Label a binary volume into connected components of flat voxel
/// indices (x-fastest layout), each sorted ascending.
pub fn label_volume(bits: &[bool], dims: Dims, connectivity: Connectivity3D) -> Vec<Vec<usize>> {
    let (nx, ny, nz) = dims;
    assert_eq!(bits.len(), nx * ny * nz, "volume buffer does not match dims");
    let mut seen = vec![false; bits.len()];
    let mut components = Vec::new();
    let mut queue: Vec<usize> = Vec::new();
    for start in 0..bits.len() {
        if !bits[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        queue.clear();
        queue.push(start);
        let mut voxels = Vec::new();
        let mut head = 0;
        while head < queue.len() {
            let idx = queue[head];
            head += 1;
            voxels.push(idx);
            let x = (idx % nx) as isize;
            let y = ((idx / nx) % ny) as isize;
            let z = (idx / (nx * ny)) as isize;
            let mut visit = |xn: isize, yn: isize, zn: isize| {
                if xn < 0
                    || yn < 0
                    || zn < 0
                    || xn as usize >= nx
                    || yn as usize >= ny
                    || zn as usize >= nz
                {
                    return;
                }
                let n = xn as usize + nx * (yn as usize + ny * zn as usize);
                if bits[n] && !seen[n] {
                    seen[n] = true;
                    queue.push(n);
                }
            };
            match connectivity {
                Connectivity3D::Six => {
                    visit(x - 1, y, z);
                    visit(x + 1, y, z);
                    visit(x, y - 1, z);
                    visit(x, y + 1, z);
                    visit(x, y, z - 1);
                    visit(x, y, z + 1);
                }
                Connectivity3D::TwentySix => {
                    for dz in -1..=1 {
                        for dy in -1..=1 {
                            for dx in -1..=1 {
                                if dx == 0 && dy == 0 && dz == 0 {
                                    continue;
                                }
                                visit(x + dx, y + dy, z + dz);
                            }
                        }
                    }
                }
            }
        }
        voxels.sort_unstable();
        components.push(voxels);
    }
    components
}
