use crate::geometry::Point;

/// Uniform bucket grid over a fixed site set for nearest-neighbour queries.
///
/// Ties are broken towards the lower site index so results are deterministic.
#[derive(Debug, Clone)]
pub struct SiteIndex {
    sites: Vec<Point>,
    x0: f64,
    y0: f64,
    h: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<u32>>,
}

impl SiteIndex {
    pub fn new(sites: &[Point]) -> Self {
        let (mut x0, mut y0, mut x1, mut y1) = (
            f64::INFINITY,
            f64::INFINITY,
            f64::NEG_INFINITY,
            f64::NEG_INFINITY,
        );
        for p in sites {
            x0 = x0.min(p.x);
            y0 = y0.min(p.y);
            x1 = x1.max(p.x);
            y1 = y1.max(p.y);
        }
        let n = sites.len().max(1);
        let extent = (x1 - x0).max(y1 - y0).max(1e-9);
        let per_side = (n as f64).sqrt().ceil().max(1.0);
        let h = extent / per_side;
        let nx = (((x1 - x0) / h).floor() as usize + 1).max(1);
        let ny = (((y1 - y0) / h).floor() as usize + 1).max(1);
        let mut buckets = vec![Vec::new(); nx * ny];
        for (i, p) in sites.iter().enumerate() {
            let bx = (((p.x - x0) / h) as usize).min(nx - 1);
            let by = (((p.y - y0) / h) as usize).min(ny - 1);
            buckets[by * nx + bx].push(i as u32);
        }
        SiteIndex {
            sites: sites.to_vec(),
            x0,
            y0,
            h,
            nx,
            ny,
            buckets,
        }
    }

    fn bucket_of(&self, p: Point) -> (isize, isize) {
        (
            ((p.x - self.x0) / self.h).floor() as isize,
            ((p.y - self.y0) / self.h).floor() as isize,
        )
    }

    /// Visits buckets ring by ring around `p`, calling `visit` on each site,
    /// until `done(ring_clearance)` holds.
    fn search<S>(
        &self,
        p: Point,
        state: &mut S,
        visit: impl Fn(&mut S, usize, f64),
        done: impl Fn(&mut S, f64) -> bool,
    ) {
        let (cx, cy) = self.bucket_of(p);
        let (nx, ny) = (self.nx as isize, self.ny as isize);
        // rings closer than the bucket grid itself are empty
        let r0 = [0, -cx, cx - (nx - 1), -cy, cy - (ny - 1)]
            .into_iter()
            .max()
            .unwrap();
        for r in r0..=r0 + nx.max(ny) {
            for iy in (cy - r).max(0)..=(cy + r).min(ny - 1) {
                let edge_row = iy == cy - r || iy == cy + r;
                let xs: Vec<isize> = if edge_row {
                    ((cx - r).max(0)..=(cx + r).min(nx - 1)).collect()
                } else {
                    [cx - r, cx + r]
                        .into_iter()
                        .filter(|ix| (0..nx).contains(ix))
                        .collect()
                };
                for ix in xs {
                    for &s in &self.buckets[iy as usize * self.nx + ix as usize] {
                        visit(state, s as usize, self.sites[s as usize].dist_sq(p));
                    }
                }
            }
            // any site outside rings 0..=r is at least r*h away from p
            if done(state, r as f64 * self.h) {
                return;
            }
        }
    }

    /// Index of the site nearest to `p`.
    pub fn nearest(&self, p: Point) -> usize {
        let mut best = (f64::INFINITY, usize::MAX);
        self.search(
            p,
            &mut best,
            |best, s, d| {
                if (d, s) < *best {
                    *best = (d, s);
                }
            },
            |best, clear| best.1 != usize::MAX && best.0.sqrt() < clear,
        );
        best.1
    }

    /// Indices of the `k` sites nearest to `p`, closest first.
    pub fn k_nearest(&self, p: Point, k: usize) -> Vec<usize> {
        let k = k.min(self.sites.len());
        if k == 0 {
            return Vec::new();
        }
        let mut found: Vec<(f64, usize)> = Vec::new();
        self.search(
            p,
            &mut found,
            |found, s, d| found.push((d, s)),
            |found, clear| {
                if found.len() < k {
                    return false;
                }
                found.sort_by(|a, b| a.partial_cmp(b).unwrap());
                found.truncate(k);
                found[k - 1].0.sqrt() < clear
            },
        );
        found.sort_by(|a, b| a.partial_cmp(b).unwrap());
        found.truncate(k);
        found.into_iter().map(|(_, s)| s).collect()
    }
}
