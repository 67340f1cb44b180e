// Monte Carlo benchmark driver for the DRSS localization estimators.
//
//   bench run --family noise_sweep --trials 200 --seed 7 --out results.csv
//   bench scenario --preset fig1 --out fig1.json
//   bench crlb --scenario fig1.json --gamma 4 --sigma-n2 1
//
// Exit codes: 0 success, 1 config error, 2 runtime failure.

#include "drss/bench.hpp"
#include "drss/scenario_io.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

int run_command(const std::string& family, const std::string& config_path, std::optional<int> trials,
                std::optional<std::uint64_t> seed, std::optional<int> threads, const std::string& out_path,
                const std::string& format) {
    using namespace drss::bench;
    std::optional<Family> fam;
    if (!family.empty()) fam = parse_family(family);

    ExperimentConfig cfg = config_path.empty() ? default_config(fam.value_or(Family::noise_sweep))
                                               : load_config(config_path, fam);
    if (trials) cfg.trials = *trials;
    if (seed) cfg.seed = *seed;
    if (threads) cfg.threads = *threads;
    validate(cfg);

    const auto rows = run_experiment(cfg);

    std::ofstream file;
    if (!out_path.empty()) {
        file.open(out_path);
        drss::detail::require(static_cast<bool>(file), drss::ErrorCode::config, "cannot open '" + out_path + "'");
    }
    std::ostream& out = out_path.empty() ? std::cout : file;
    if (format == "json")
        write_json(out, cfg, rows);
    else
        write_csv(out, rows);
    return 0;
}

int scenario_command(const std::string& preset, const std::string& out_path) {
    drss::Scenario s;
    if (preset == "fig1")
        s = drss::fig1_scenario();
    else
        s = drss::clustered_scenario(drss::parse_placement(preset));
    if (out_path.empty())
        std::cout << drss::scenario_to_json(s).dump(2) << '\n';
    else
        drss::save_scenario(s, out_path);
    return 0;
}

int crlb_command(const std::string& path, double gamma, double sigma_n2) {
    const drss::Scenario s = drss::load_scenario(path);
    std::cout.precision(10);
    for (const char* kind : {"joint_location", "joint_ple", "location_known_ple", "ple_known_location"})
        std::cout << kind << ' ' << drss::crlb(s, gamma, sigma_n2, drss::parse_crlb_kind(kind)) << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"DRSS localization benchmark"};
    app.require_subcommand(1);

    std::string family, config_path, out_path, format = "csv";
    std::optional<int> trials, threads;
    std::optional<std::uint64_t> seed;
    auto* run = app.add_subcommand("run", "run a Monte Carlo experiment family");
    run->add_option("--family", family, "placement, noise_sweep, ple_sweep, ple_uncertainty, "
                                        "anchor_uncertainty or bcd");
    run->add_option("--config", config_path, "JSON experiment config");
    run->add_option("--trials", trials, "trials per sweep point")->check(CLI::PositiveNumber);
    run->add_option("--seed", seed, "master seed");
    run->add_option("--threads", threads, "worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
    run->add_option("--out", out_path, "output file (default stdout)");
    run->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));

    std::string preset, scenario_out;
    auto* scen = app.add_subcommand("scenario", "write a preset scenario file");
    scen->add_option("--preset", preset, "fig1, good or bad")
        ->required()
        ->check(CLI::IsMember({"fig1", "good", "bad"}));
    scen->add_option("--out", scenario_out, "output file (default stdout)");

    std::string scenario_path;
    double gamma = 4.0, sigma_n2 = 1.0;
    auto* bound = app.add_subcommand("crlb", "print the four Cramer-Rao bounds for a scenario");
    bound->add_option("--scenario", scenario_path, "scenario file")->required();
    bound->add_option("--gamma", gamma, "path-loss exponent")->required();
    bound->add_option("--sigma-n2", sigma_n2, "measurement noise variance")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        if (run->parsed()) return run_command(family, config_path, trials, seed, threads, out_path, format);
        if (scen->parsed()) return scenario_command(preset, scenario_out);
        return crlb_command(scenario_path, gamma, sigma_n2);
    } catch (const drss::Error& e) {
        std::cerr << "bench: " << e.what() << '\n';
        const bool config = e.code() == drss::ErrorCode::config || e.code() == drss::ErrorCode::invalid_argument;
        return config ? kExitConfig : kExitRuntime;
    } catch (const std::exception& e) {
        std::cerr << "bench: " << e.what() << '\n';
        return kExitRuntime;
    }
}
