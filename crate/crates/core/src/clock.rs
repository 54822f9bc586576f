//! Monotonic stopwatch. `std::time::Instant` panics on `wasm32-unknown-unknown`,
//! so there every reading is zero.

#[cfg(not(target_arch = "wasm32"))]
#[derive(Clone, Copy, Debug)]
pub struct Stopwatch(std::time::Instant);

#[cfg(not(target_arch = "wasm32"))]
impl Stopwatch {
    pub fn start() -> Self {
        Self(std::time::Instant::now())
    }

    /// Seconds since the last lap (or start), then restart.
    pub fn lap(&mut self) -> f64 {
        let now = std::time::Instant::now();
        let s = now.duration_since(self.0).as_secs_f64();
        self.0 = now;
        s
    }

    pub fn elapsed(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

#[cfg(target_arch = "wasm32")]
#[derive(Clone, Copy, Debug)]
pub struct Stopwatch;

#[cfg(target_arch = "wasm32")]
impl Stopwatch {
    pub fn start() -> Self {
        Self
    }

    pub fn lap(&mut self) -> f64 {
        0.0
    }

    pub fn elapsed(&self) -> f64 {
        0.0
    }
}
