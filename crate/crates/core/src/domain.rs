use crate::scalar::Real;

/// Spatial domain with homogeneous Neumann boundary conditions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Domain<T> {
    Interval { length: T },
    Rectangle { lx: T, ly: T },
}

impl<T: Real> Domain<T> {
    pub fn unit_interval() -> Self {
        Domain::Interval { length: T::one() }
    }

    /// `|Omega|`.
    pub fn measure(&self) -> T {
        match *self {
            Domain::Interval { length } => length,
            Domain::Rectangle { lx, ly } => lx * ly,
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            Domain::Interval { .. } => 1,
            Domain::Rectangle { .. } => 2,
        }
    }

    /// Smallest nonzero Neumann Laplacian eigenvalue.
    pub fn poincare_constant(&self) -> T {
        neumann_eigenvalues(self, 2)[1]
    }
}

/// The first `count` eigenvalues of `-Lap` with Neumann boundary conditions,
/// ascending and with multiplicity: `(k pi / Lx)^2` on an interval,
/// `(k pi / Lx)^2 + (l pi / Ly)^2` on a rectangle.
pub fn neumann_eigenvalues<T: Real>(domain: &Domain<T>, count: usize) -> Vec<T> {
    let pi = T::lit(std::f64::consts::PI);
    match *domain {
        Domain::Interval { length } => (0..count)
            .map(|k| {
                let w = T::count(k) * pi / length;
                w * w
            })
            .collect(),
        Domain::Rectangle { lx, ly } => {
            // every index pair with k, l < count covers the first `count` values
            let mut all = Vec::with_capacity(count * count);
            for k in 0..count {
                for l in 0..count {
                    let wx = T::count(k) * pi / lx;
                    let wy = T::count(l) * pi / ly;
                    all.push(wx * wx + wy * wy);
                }
            }
            all.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
            all.truncate(count);
            all
        }
    }
}
