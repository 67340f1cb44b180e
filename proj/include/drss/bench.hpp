#pragma once

#include "drss/crlb.hpp"
#include "drss/estimators.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <vector>

namespace drss::bench {

enum class Family { placement, noise_sweep, ple_sweep, ple_uncertainty, anchor_uncertainty, bcd };

inline const char* to_string(Family f) {
    switch (f) {
        case Family::placement: return "placement";
        case Family::noise_sweep: return "noise_sweep";
        case Family::ple_sweep: return "ple_sweep";
        case Family::ple_uncertainty: return "ple_uncertainty";
        case Family::anchor_uncertainty: return "anchor_uncertainty";
        case Family::bcd: return "bcd";
    }
    return "unknown";
}

inline Family parse_family(const std::string& s) {
    for (Family f : {Family::placement, Family::noise_sweep, Family::ple_sweep, Family::ple_uncertainty,
                     Family::anchor_uncertainty, Family::bcd})
        if (s == to_string(f)) return f;
    throw Error(ErrorCode::config, "unknown family '" + s + "'");
}

inline const std::set<std::string>& estimator_names() {
    static const std::set<std::string> names{"u_blue", "a_blue", "le", "rsdpe", "rsdp_bcde"};
    return names;
}

/// Monte Carlo experiment description. Exactly one of the list-valued
/// parameters is swept (`sweep`); the others must hold a single value.
struct ExperimentConfig {
    Family family = Family::noise_sweep;
    int trials = 200;
    double field_side = 50.0;
    int n_anchors = 10;
    std::vector<double> gamma{4.0};
    std::vector<double> sigma_n2{0.25, 1.0, 4.0, 10.0, 25.0};
    std::vector<double> sigma_gamma2{0.0};
    std::vector<double> sigma_s2{0.0};
    std::vector<std::string> estimators{"u_blue", "a_blue", "le", "rsdpe"};
    std::uint64_t seed = 1;
    std::string sweep = "sigma_n2";
    // Joint location / PLE settings (bcd family and the rsdp_bcde estimator).
    double gamma_init = 4.0;
    std::vector<int> bcd_iterations{1, 2, 3, 5};
    double bcd_xi = 1e-3;
    int threads = 0;  ///< 0 = hardware concurrency
};

/// Per-family defaults; fields set in a config file override them.
inline ExperimentConfig default_config(Family family) {
    ExperimentConfig c;
    c.family = family;
    switch (family) {
        case Family::placement:
        case Family::noise_sweep: break;
        case Family::ple_sweep:
            c.gamma = {2.0, 3.0, 4.0, 5.0, 6.0};
            c.sigma_n2 = {10.0};
            c.sweep = "gamma";
            break;
        case Family::ple_uncertainty:
            c.sigma_n2 = {1.0};
            c.sigma_gamma2 = {0.0, 0.25, 0.5, 1.0, 2.0};
            c.sweep = "sigma_gamma2";
            break;
        case Family::anchor_uncertainty:
            c.sigma_n2 = {1.0};
            c.sigma_s2 = {0.0, 1.0, 2.5, 5.0, 10.0};
            c.sweep = "sigma_s2";
            break;
        case Family::bcd:
            c.gamma = {2.0};
            c.estimators = {"rsdp_bcde", "rsdpe"};
            break;
    }
    return c;
}

inline std::vector<double>& sweep_list(ExperimentConfig& c, const std::string& name) {
    if (name == "gamma") return c.gamma;
    if (name == "sigma_n2") return c.sigma_n2;
    if (name == "sigma_gamma2") return c.sigma_gamma2;
    if (name == "sigma_s2") return c.sigma_s2;
    throw Error(ErrorCode::config, "cannot sweep '" + name + "'");
}

inline const std::vector<double>& sweep_list(const ExperimentConfig& c, const std::string& name) {
    return sweep_list(const_cast<ExperimentConfig&>(c), name);
}

inline void validate(const ExperimentConfig& c) {
    using detail::require;
    require(c.trials >= 1, ErrorCode::config, "trials must be >= 1");
    require(c.field_side > 0.0 && std::isfinite(c.field_side), ErrorCode::config, "field_side must be positive");
    require(c.n_anchors >= 5, ErrorCode::config, "n_anchors must be >= 5 for 2-D localization");
    require(c.threads >= 0, ErrorCode::config, "threads must be >= 0");
    (void)sweep_list(c, c.sweep);
    for (const char* name : {"gamma", "sigma_n2", "sigma_gamma2", "sigma_s2"}) {
        const auto& list = sweep_list(c, name);
        require(!list.empty(), ErrorCode::config, std::string(name) + " must not be empty");
        require(name == c.sweep || list.size() == 1, ErrorCode::config,
                std::string(name) + " must hold one value unless it is the swept parameter");
        for (double v : list) require(std::isfinite(v), ErrorCode::config, std::string(name) + " must be finite");
    }
    for (double g : c.gamma) require(g > 0.0, ErrorCode::config, "gamma must be positive");
    for (double v : c.sigma_n2) require(v >= 0.0, ErrorCode::config, "sigma_n2 must be >= 0");
    for (double v : c.sigma_gamma2) require(v >= 0.0, ErrorCode::config, "sigma_gamma2 must be >= 0");
    for (double v : c.sigma_s2) require(v >= 0.0, ErrorCode::config, "sigma_s2 must be >= 0");
    require(!c.estimators.empty(), ErrorCode::config, "estimators must not be empty");
    for (const auto& e : c.estimators)
        require(estimator_names().count(e) == 1, ErrorCode::config, "unknown estimator '" + e + "'");
    require(c.gamma_init > 0.0, ErrorCode::config, "gamma_init must be positive");
    require(c.bcd_xi > 0.0, ErrorCode::config, "bcd_xi must be positive");
    require(!c.bcd_iterations.empty(), ErrorCode::config, "bcd_iterations must not be empty");
    for (int k : c.bcd_iterations) require(k >= 1, ErrorCode::config, "bcd_iterations must be >= 1");
    if (c.family == Family::bcd)
        require(std::find(c.estimators.begin(), c.estimators.end(), "rsdp_bcde") != c.estimators.end(),
                ErrorCode::config, "the bcd family needs the rsdp_bcde estimator");
}

namespace detail {

using drss::detail::require;

inline std::vector<double> number_list(const nlohmann::json& v, const std::string& key) {
    if (v.is_number()) return {v.get<double>()};
    require(v.is_array(), ErrorCode::config, key + " must be a number or a list of numbers");
    std::vector<double> out;
    for (const auto& x : v) {
        require(x.is_number(), ErrorCode::config, key + " must contain numbers");
        out.push_back(x.get<double>());
    }
    return out;
}

}  // namespace detail

/// Builds a config from a JSON object. The family (from the object, or
/// `family_override`) selects the defaults; unknown keys are rejected.
inline ExperimentConfig config_from_json(const nlohmann::json& j,
                                         const std::optional<Family>& family_override = std::nullopt) {
    using detail::require;
    require(j.is_object(), ErrorCode::config, "config must be a JSON object");
    static const std::set<std::string> known{"family",      "trials",     "field_side", "n_anchors",
                                             "gamma",       "sigma_n2",   "sigma_gamma2", "sigma_s2",
                                             "estimators",  "seed",       "sweep",      "gamma_init",
                                             "bcd_iterations", "bcd_xi",  "threads"};
    for (const auto& item : j.items())
        require(known.count(item.key()) == 1, ErrorCode::config, "unknown config key '" + item.key() + "'");

    try {
        Family family = Family::noise_sweep;
        if (j.contains("family")) family = parse_family(j.at("family").get<std::string>());
        if (family_override) family = *family_override;
        ExperimentConfig c = default_config(family);

        if (j.contains("trials")) c.trials = j.at("trials").get<int>();
        if (j.contains("field_side")) c.field_side = j.at("field_side").get<double>();
        if (j.contains("n_anchors")) c.n_anchors = j.at("n_anchors").get<int>();
        for (const char* key : {"gamma", "sigma_n2", "sigma_gamma2", "sigma_s2"})
            if (j.contains(key)) sweep_list(c, key) = detail::number_list(j.at(key), key);
        if (j.contains("estimators")) c.estimators = j.at("estimators").get<std::vector<std::string>>();
        if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("sweep")) c.sweep = j.at("sweep").get<std::string>();
        if (j.contains("gamma_init")) c.gamma_init = j.at("gamma_init").get<double>();
        if (j.contains("bcd_iterations")) c.bcd_iterations = j.at("bcd_iterations").get<std::vector<int>>();
        if (j.contains("bcd_xi")) c.bcd_xi = j.at("bcd_xi").get<double>();
        if (j.contains("threads")) c.threads = j.at("threads").get<int>();
        validate(c);
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::config, std::string("malformed config: ") + e.what());
    }
}

inline ExperimentConfig load_config(const std::string& path,
                                    const std::optional<Family>& family_override = std::nullopt) {
    std::ifstream in(path);
    detail::require(static_cast<bool>(in), ErrorCode::config, "cannot open '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::config, "cannot parse '" + path + "': " + e.what());
    }
    return config_from_json(j, family_override);
}

/// One aggregated line of output. `rmse` is computed over the estimator's
/// own successful trials and is absent when every trial failed.
struct ResultRow {
    std::string family;
    double sweep_value = 0.0;
    std::string estimator;
    std::optional<double> rmse;
    double crlb_ref = 0.0;
    int trials_used = 0;
    int failures = 0;
};

/// Squared error of one estimator label in one trial (absent on failure),
/// with the CRLB that serves as its reference.
struct TrialOutcome {
    std::string label;
    std::optional<double> sq_error;
    std::optional<double> crlb;
};

/// Parameters of a single sweep point.
struct SweepPoint {
    double gamma = 4.0;
    double sigma_n2 = 1.0;
    double sigma_gamma2 = 0.0;
    double sigma_s2 = 0.0;
};

inline SweepPoint sweep_point(const ExperimentConfig& c, std::size_t index) {
    ExperimentConfig copy = c;
    for (const char* name : {"gamma", "sigma_n2", "sigma_gamma2", "sigma_s2"}) {
        auto& list = sweep_list(copy, name);
        if (name == c.sweep) list = {list.at(index)};
    }
    return {copy.gamma.front(), copy.sigma_n2.front(), copy.sigma_gamma2.front(), copy.sigma_s2.front()};
}

/// splitmix64 finaliser; per-trial seeds depend only on (master seed, trial).
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t trial_seed(std::uint64_t master, std::uint64_t trial) {
    return splitmix64(splitmix64(master) ^ trial);
}

namespace detail {

inline std::optional<double> safe_crlb(const Scenario& s, double gamma, double sigma_n2, CrlbKind kind) {
    if (sigma_n2 <= 0.0) return 0.0;
    try {
        return crlb(s, gamma, sigma_n2, kind);
    } catch (const Error&) {
        return std::nullopt;
    }
}

inline Scenario draw_scenario(const ExperimentConfig& c, std::mt19937_64& rng,
                              std::optional<Placement> layout) {
    if (!layout) return random_scenario(c.n_anchors, c.field_side, 2, rng());
    Scenario s = clustered_scenario(*layout);
    std::uniform_real_distribution<double> coord(0.0, s.field_side);
    for (;;) {
        s.target = Eigen::Vector2d(coord(rng), coord(rng));
        bool separated = true;
        for (int i = 0; i < s.n_anchors() && separated; ++i)
            separated = (s.anchor(i) - s.target).norm() >= kMinTargetSeparation;
        if (separated) return s;
    }
}

inline std::string with_suffix(const std::string& name, const std::string& suffix) {
    return suffix.empty() ? name : name + "[" + suffix + "]";
}

// Runs every selected estimator on one drawn scenario.
inline void run_estimators(const ExperimentConfig& c, const SweepPoint& pt, std::uint64_t seed,
                           std::optional<Placement> layout, const std::string& suffix,
                           std::vector<TrialOutcome>& out) {
    std::mt19937_64 rng(seed);
    const Scenario s = draw_scenario(c, rng, layout);

    ChannelParams channel;
    channel.gamma = pt.gamma;
    channel.sigma_chi = std::sqrt(pt.sigma_n2);
    const DrssSampleSet drss = drss_from_rss(sample_rss(s, channel, rng));

    // Model uncertainty: the estimators see a perturbed PLE and perturbed
    // anchor positions while the measurements come from the true ones.
    std::normal_distribution<double> unit(0.0, 1.0);
    const double gamma_model = pt.gamma + std::sqrt(pt.sigma_gamma2) * unit(rng);
    Matrix anchors_model = s.anchors;
    for (Eigen::Index i = 0; i < anchors_model.rows(); ++i)
        for (Eigen::Index k = 0; k < anchors_model.cols(); ++k)
            anchors_model(i, k) += std::sqrt(pt.sigma_s2) * unit(rng);

    const auto crlb_known = safe_crlb(s, pt.gamma, pt.sigma_n2, CrlbKind::location_known_ple);
    std::optional<WhitenedModel> model;
    if (gamma_model > 0.0) {
        try {
            model = build_model(drss, anchors_model, gamma_model);
        } catch (const Error&) {
        }
    }

    for (const auto& name : c.estimators) {
        if (name == "rsdp_bcde") {
            const auto crlb_loc = safe_crlb(s, pt.gamma, pt.sigma_n2, CrlbKind::joint_location);
            const auto crlb_ple = safe_crlb(s, pt.gamma, pt.sigma_n2, CrlbKind::joint_ple);
            std::optional<LocationEstimate> est;
            BcdOpts opts;
            opts.gamma_init = c.gamma_init;
            opts.xi = c.bcd_xi;
            opts.max_iter = c.family == Family::bcd
                                ? *std::max_element(c.bcd_iterations.begin(), c.bcd_iterations.end())
                                : BcdOpts{}.max_iter;
            try {
                est = rsdp_bcde(drss, anchors_model, opts);
            } catch (const Error&) {
            }
            if (c.family != Family::bcd) {
                out.push_back({with_suffix(name, suffix),
                               est ? std::optional<double>((est->x_hat - s.target).squaredNorm()) : std::nullopt,
                               crlb_loc});
                continue;
            }
            for (int k : c.bcd_iterations) {
                const std::string label = with_suffix(name, "k=" + std::to_string(k) +
                                                                (suffix.empty() ? "" : "," + suffix));
                std::optional<double> loc_err, ple_err;
                if (est) {
                    // An estimator that stopped before k iterations keeps its final iterate.
                    const auto& xs = est->diagnostics.x_history;
                    const auto& gs = est->diagnostics.gamma_history;
                    const bool stopped = static_cast<std::size_t>(k) >= xs.size();
                    const Vector x = stopped ? est->x_hat : xs[static_cast<std::size_t>(k - 1)];
                    const double g = stopped ? est->gamma_hat.value_or(c.gamma_init)
                                             : gs[static_cast<std::size_t>(k - 1)];
                    loc_err = (x - s.target).squaredNorm();
                    ple_err = (g - pt.gamma) * (g - pt.gamma);
                }
                out.push_back({label, loc_err, crlb_loc});
                out.push_back({label + ".ple", ple_err, crlb_ple});
            }
            continue;
        }

        std::optional<double> err;
        if (model) {
            try {
                LocationEstimate e;
                if (name == "u_blue") e = u_blue(*model);
                else if (name == "a_blue") e = a_blue(*model);
                else if (name == "le") e = le(*model);
                else e = rsdpe(*model);
                if (e.x_hat.allFinite()) err = (e.x_hat - s.target).squaredNorm();
            } catch (const Error&) {
            }
        }
        out.push_back({with_suffix(name, suffix), err, crlb_known});
    }
}

}  // namespace detail

/// One Monte Carlo trial at one sweep point. Estimator failures are recorded
/// as absent errors, never thrown.
inline std::vector<TrialOutcome> run_trial(const ExperimentConfig& c, const SweepPoint& pt,
                                           std::uint64_t seed) {
    std::vector<TrialOutcome> out;
    if (c.family == Family::placement) {
        // Same target and noise draws for both layouts.
        detail::run_estimators(c, pt, seed, Placement::good, "good", out);
        detail::run_estimators(c, pt, seed, Placement::bad, "bad", out);
    } else {
        detail::run_estimators(c, pt, seed, std::nullopt, "", out);
    }
    return out;
}

namespace detail {

struct Accumulator {
    double sum_sq = 0.0;
    double sum_crlb = 0.0;
    int used = 0;
    int failures = 0;
    int crlb_count = 0;
};

}  // namespace detail

/// Runs every sweep point. Trials run on worker threads, each with its own
/// seed and no shared state; aggregation happens in trial order, so the
/// output does not depend on the thread count.
inline std::vector<ResultRow> run_experiment(const ExperimentConfig& c) {
    validate(c);
    const auto& axis = sweep_list(c, c.sweep);
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const unsigned n_threads =
        std::min<unsigned>(c.threads > 0 ? static_cast<unsigned>(c.threads) : hw, static_cast<unsigned>(c.trials));

    std::vector<ResultRow> rows;
    for (std::size_t p = 0; p < axis.size(); ++p) {
        const SweepPoint pt = sweep_point(c, p);
        std::vector<std::vector<TrialOutcome>> results(static_cast<std::size_t>(c.trials));
        auto worker = [&](unsigned id) {
            for (std::size_t t = id; t < results.size(); t += n_threads)
                results[t] = run_trial(c, pt, trial_seed(c.seed, t));
        };
        std::vector<std::thread> pool;
        for (unsigned id = 1; id < n_threads; ++id) pool.emplace_back(worker, id);
        worker(0);
        for (auto& th : pool) th.join();

        std::map<std::string, detail::Accumulator> acc;
        for (const auto& trial : results) {
            for (const auto& o : trial) {
                auto& a = acc[o.label];
                if (o.sq_error) {
                    a.sum_sq += *o.sq_error;
                    ++a.used;
                } else {
                    ++a.failures;
                }
                if (o.crlb) {
                    a.sum_crlb += *o.crlb;
                    ++a.crlb_count;
                }
            }
        }
        for (const auto& [label, a] : acc) {
            ResultRow r;
            r.family = to_string(c.family);
            r.sweep_value = axis[p];
            r.estimator = label;
            if (a.used > 0) r.rmse = std::sqrt(a.sum_sq / a.used);
            r.crlb_ref = a.crlb_count > 0 ? a.sum_crlb / a.crlb_count : std::nan("");
            r.trials_used = a.used;
            r.failures = a.failures;
            rows.push_back(std::move(r));
        }
    }
    std::stable_sort(rows.begin(), rows.end(), [](const ResultRow& a, const ResultRow& b) {
        if (a.sweep_value != b.sweep_value) return a.sweep_value < b.sweep_value;
        return a.estimator < b.estimator;
    });
    return rows;
}

inline constexpr const char* kCsvHeader = "family,sweep_value,estimator,rmse_m,crlb_m,trials_used,failures";

namespace detail {

inline std::string format_number(double v) {
    if (!std::isfinite(v)) return "";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

}  // namespace detail

/// Writes rows as CSV; an absent RMSE (or undefined CRLB) is an empty field.
inline void write_csv(std::ostream& out, const std::vector<ResultRow>& rows) {
    out << kCsvHeader << '\n';
    for (const auto& r : rows) {
        out << r.family << ',' << detail::format_number(r.sweep_value) << ',' << r.estimator << ','
            << (r.rmse ? detail::format_number(*r.rmse) : "") << ',' << detail::format_number(r.crlb_ref) << ','
            << r.trials_used << ',' << r.failures << '\n';
    }
}

inline nlohmann::json rows_to_json(const ExperimentConfig& c, const std::vector<ResultRow>& rows) {
    nlohmann::json list = nlohmann::json::array();
    for (const auto& r : rows) {
        list.push_back({{"family", r.family},
                        {"sweep_value", r.sweep_value},
                        {"estimator", r.estimator},
                        {"rmse_m", r.rmse ? nlohmann::json(*r.rmse) : nlohmann::json(nullptr)},
                        {"crlb_m", std::isfinite(r.crlb_ref) ? nlohmann::json(r.crlb_ref) : nlohmann::json(nullptr)},
                        {"trials_used", r.trials_used},
                        {"failures", r.failures}});
    }
    return {{"family", to_string(c.family)},
            {"sweep", c.sweep},
            {"trials", c.trials},
            {"seed", c.seed},
            {"note", "rmse_m is computed over each estimator's successful trials only; "
                     "crlb_m is the per-trial CRLB averaged over trials"},
            {"rows", std::move(list)}};
}

inline void write_json(std::ostream& out, const ExperimentConfig& c, const std::vector<ResultRow>& rows) {
    out << rows_to_json(c, rows).dump(2) << '\n';
}

}  // namespace drss::bench
