//! Order-preserving data-parallel map.
//!
//! With the `parallel` feature the work runs on a rayon pool sized by
//! `jobs`; without it, or with `jobs == 1`, it runs sequentially. Results are
//! always returned in input order so output never depends on scheduling.

macro_rules! if_rayon {
    ($rayon_value: expr, $else_value: expr) => {{
        #[cfg(feature = "parallel")]
        {
            ($rayon_value)
        }
        #[cfg(not(feature = "parallel"))]
        {
            ($else_value)
        }
    }};
}

/// Worker count. `0` means one per available core.
pub type Jobs = usize;

pub fn available_jobs() -> usize {
    if_rayon!(rayon::current_num_threads(), 1)
}

pub fn map<T, R, F>(jobs: Jobs, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    if jobs == 1 || items.len() < 2 {
        return items.iter().map(f).collect();
    }
    if_rayon!(
        {
            use rayon::prelude::*;
            let run = || items.par_iter().map(&f).collect();
            if jobs == 0 {
                run()
            } else {
                match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
                    Ok(pool) => pool.install(run),
                    Err(_) => items.iter().map(&f).collect(),
                }
            }
        },
        items.iter().map(f).collect()
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preserves_order_for_any_job_count() {
        let items: Vec<u64> = (0..500).collect();
        let expected: Vec<u64> = items.iter().map(|x| x * x).collect();
        for jobs in [0, 1, 2, 7] {
            assert_eq!(map(jobs, &items, |x| x * x), expected);
        }
    }
}
