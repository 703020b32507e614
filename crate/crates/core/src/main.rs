fn main() {
    #[cfg(feature = "parallel")]
    if let Ok(threads) = std::env::var("STRONGMAX_THREADS") {
        if let Ok(k) = threads.parse::<usize>() {
            if k >= 1 {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(k)
                    .build_global();
            }
        }
    }
    std::process::exit(strongmax::cli::run());
}
