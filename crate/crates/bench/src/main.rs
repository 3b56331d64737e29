fn main() {
    std::process::exit(dppm_bench::run(std::env::args_os()));
}
