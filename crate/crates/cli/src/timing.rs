//! Wall-clock and process CPU-time measurement.

use std::time::{Duration, Instant};

/// CPU time consumed by the whole process (all threads).
pub fn process_cpu_time() -> Duration {
    let mut ts = libc::timespec { tv_sec: 0, tv_nsec: 0 };
    // SAFETY: `ts` is a valid, writable timespec for the duration of the call.
    let rc = unsafe { libc::clock_gettime(libc::CLOCK_PROCESS_CPUTIME_ID, &mut ts) };
    if rc != 0 {
        return Duration::ZERO;
    }
    Duration::new(ts.tv_sec as u64, ts.tv_nsec as u32)
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Timing {
    pub wall: Duration,
    pub cpu: Duration,
}

impl Timing {
    pub fn wall_secs(&self) -> f64 {
        self.wall.as_secs_f64()
    }

    pub fn cpu_secs(&self) -> f64 {
        self.cpu.as_secs_f64()
    }
}

/// Runs `f` once and times it.
pub fn time_once<T>(f: impl FnOnce() -> T) -> (T, Timing) {
    let (c0, w0) = (process_cpu_time(), Instant::now());
    let out = f();
    let wall = w0.elapsed();
    let cpu = process_cpu_time().saturating_sub(c0);
    (out, Timing { wall, cpu })
}

/// Runs `f` `reps` times; reports the medians of wall and CPU time and the
/// last result.
pub fn time_median<T, E>(reps: usize, mut f: impl FnMut() -> Result<T, E>) -> Result<(T, Timing), E> {
    let reps = reps.max(1);
    let mut walls = Vec::with_capacity(reps);
    let mut cpus = Vec::with_capacity(reps);
    let mut last = None;
    for _ in 0..reps {
        let (out, t) = time_once(&mut f);
        last = Some(out?);
        walls.push(t.wall);
        cpus.push(t.cpu);
    }
    walls.sort();
    cpus.sort();
    let timing = Timing {
        wall: walls[reps / 2],
        cpu: cpus[reps / 2],
    };
    Ok((last.expect("at least one repetition"), timing))
}

/// `num / den`, or infinity when the denominator is below timer resolution.
pub fn ratio(num: Duration, den: Duration) -> f64 {
    if den.is_zero() {
        f64::INFINITY
    } else {
        num.as_secs_f64() / den.as_secs_f64()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cpu_time_advances() {
        let t0 = process_cpu_time();
        let mut x = 0u64;
        for i in 0..5_000_000u64 {
            x = x.wrapping_mul(31).wrapping_add(i);
        }
        std::hint::black_box(x);
        assert!(process_cpu_time() > t0);
    }

    #[test]
    fn median_of_odd_count() {
        let mut n = 0;
        let (v, t) = time_median(5, || {
            n += 1;
            Ok::<_, ()>(n)
        })
        .unwrap();
        assert_eq!(v, 5);
        assert!(t.wall <= Duration::from_secs(1));
    }
}
