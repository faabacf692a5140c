use crate::scalar::Real;

/// A point in the horizontal plane, in meters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Vec2<T = f64> {
    pub x: T,
    pub y: T,
}

impl<T: Real> Vec2<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn origin() -> Self {
        Self::new(T::zero(), T::zero())
    }

    pub fn norm(&self) -> T {
        self.x.hypot(self.y)
    }

    pub fn dist(&self, other: &Self) -> T {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self::new(self.x - other.x, self.y - other.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Axis-aligned rectangle `[x_min, x_max] × [y_min, y_max]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect<T = f64> {
    pub x_min: T,
    pub x_max: T,
    pub y_min: T,
    pub y_max: T,
}

impl<T: Real> Rect<T> {
    pub fn new(x_min: T, x_max: T, y_min: T, y_max: T) -> Self {
        Self {
            x_min,
            x_max,
            y_min,
            y_max,
        }
    }

    pub fn point(p: Vec2<T>) -> Self {
        Self::new(p.x, p.x, p.y, p.y)
    }

    pub fn is_valid(&self) -> bool {
        self.x_min <= self.x_max
            && self.y_min <= self.y_max
            && self.x_min.is_finite()
            && self.x_max.is_finite()
            && self.y_min.is_finite()
            && self.y_max.is_finite()
    }

    pub fn contains(&self, p: &Vec2<T>) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.y >= self.y_min && p.y <= self.y_max
    }

    /// Euclidean projection (per-coordinate clamp).
    pub fn clamp(&self, p: &Vec2<T>) -> Vec2<T> {
        Vec2::new(
            p.x.max(self.x_min).min(self.x_max),
            p.y.max(self.y_min).min(self.y_max),
        )
    }

    pub fn centroid(&self) -> Vec2<T> {
        let half = T::lit(0.5);
        Vec2::new((self.x_min + self.x_max) * half, (self.y_min + self.y_max) * half)
    }

    pub fn corners(&self) -> [Vec2<T>; 4] {
        [
            Vec2::new(self.x_min, self.y_min),
            Vec2::new(self.x_max, self.y_min),
            Vec2::new(self.x_min, self.y_max),
            Vec2::new(self.x_max, self.y_max),
        ]
    }

    /// Shift by `(dx, dy)`.
    pub fn translated(&self, dx: T, dy: T) -> Self {
        Self::new(self.x_min + dx, self.x_max + dx, self.y_min + dy, self.y_max + dy)
    }

    /// Regular grid with spacing `step`, always including both edges of each axis.
    pub fn grid(&self, step: T) -> Vec<Vec2<T>> {
        let xs = axis(self.x_min, self.x_max, step);
        let ys = axis(self.y_min, self.y_max, step);
        let mut out = Vec::with_capacity(xs.len() * ys.len());
        for &x in &xs {
            for &y in &ys {
                out.push(Vec2::new(x, y));
            }
        }
        out
    }
}

fn axis<T: Real>(lo: T, hi: T, step: T) -> Vec<T> {
    let span = hi - lo;
    if span <= T::zero() {
        return vec![lo];
    }
    // tolerate roundoff in span/step so 105/0.1 gives 1051 points
    let n = (span / step + T::lit(1e-9)).floor().to_usize().unwrap_or(0);
    let mut v: Vec<T> = (0..=n)
        .map(|k| lo + step * T::from_usize(k).expect("grid index"))
        .collect();
    if let Some(last) = v.last_mut() {
        if (hi - *last).abs() <= step * T::lit(1e-9) {
            *last = hi;
        } else {
            v.push(hi);
        }
    }
    v
}
