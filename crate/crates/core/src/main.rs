fn main() {
    std::process::exit(bandit_attack_lab::cli::run());
}
