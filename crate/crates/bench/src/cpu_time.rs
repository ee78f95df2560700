use std::time::Duration;

/// CPU time consumed by this process so far.
#[cfg(unix)]
pub fn process_cpu_time() -> Duration {
    let mut ts = libc::timespec { tv_sec: 0, tv_nsec: 0 };
    // SAFETY: `ts` is a valid, writable timespec.
    let rc = unsafe { libc::clock_gettime(libc::CLOCK_PROCESS_CPUTIME_ID, &mut ts) };
    assert_eq!(rc, 0, "clock_gettime(CLOCK_PROCESS_CPUTIME_ID) failed");
    Duration::new(ts.tv_sec as u64, ts.tv_nsec as u32)
}

/// Wall-clock fallback where no process CPU clock is available.
#[cfg(not(unix))]
pub fn process_cpu_time() -> Duration {
    use std::sync::OnceLock;
    use std::time::Instant;
    static START: OnceLock<Instant> = OnceLock::new();
    START.get_or_init(Instant::now).elapsed()
}

/// Mean and sample standard deviation, in seconds.
pub fn mean_std(samples: &[Duration]) -> (f64, f64) {
    let n = samples.len() as f64;
    let secs: Vec<f64> = samples.iter().map(Duration::as_secs_f64).collect();
    let mean = secs.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return (mean, 0.0);
    }
    let var = secs.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clock_is_monotonic_and_advances() {
        let a = process_cpu_time();
        let mut x = 0u64;
        for i in 0..2_000_000u64 {
            x = x.wrapping_mul(31).wrapping_add(i);
        }
        std::hint::black_box(x);
        assert!(process_cpu_time() > a);
    }

    #[test]
    fn statistics() {
        let s = [Duration::from_millis(1), Duration::from_millis(3)];
        let (mean, std) = mean_std(&s);
        assert!((mean - 0.002).abs() < 1e-12);
        assert!((std - 0.002f64.sqrt() / 1000f64.sqrt()).abs() < 1e-9);
        assert_eq!(mean_std(&s[..1]).1, 0.0);
    }
}
