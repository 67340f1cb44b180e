#pragma once

#include "drss/scenario.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <span>
#include <vector>

namespace drss {

/// Log-normal shadowing channel. Powers in dB, distances in meters.
struct ChannelParams {
    double gamma = 4.0;       ///< path-loss exponent
    double sigma_chi = 0.0;   ///< shadowing std (dB)
    double sigma_p0 = 0.0;    ///< per-anchor transmit power deviation std (dB)
    double p0_nominal = 0.0;  ///< nominal power at the reference distance (dB)
    double d0 = 1.0;          ///< reference distance, fixed at 1 m

    /// Variance of the independent per-anchor measurement noise.
    double sigma_n2() const { return sigma_p0 * sigma_p0 + sigma_chi * sigma_chi; }
};

inline void validate(const ChannelParams& p) {
    detail::require(std::isfinite(p.gamma) && p.gamma > 0.0, ErrorCode::invalid_argument,
                    "path-loss exponent must be positive");
    detail::require(p.sigma_chi >= 0.0 && p.sigma_p0 >= 0.0, ErrorCode::invalid_argument,
                    "noise standard deviations must be non-negative");
    detail::require(p.d0 == 1.0, ErrorCode::invalid_argument, "reference distance must be 1 m");
}

/// Small-scale (Nakagami-m) fading used by the optional RSS collection path.
struct FadingParams {
    double m = 1.0;
    int k_samples = 1;
};

struct RssSampleSet {
    Vector rss_db;
    std::vector<int> anchor_ids;  ///< anchor id of each entry of rss_db
};

/// Differences against the reference anchor (RN). Entry j of drss_db belongs
/// to anchor other_ids[j]; other_ids is ascending and excludes rn_index.
struct DrssSampleSet {
    int rn_index = 0;
    Vector drss_db;
    std::vector<int> other_ids;

    int n_anchors() const { return static_cast<int>(drss_db.size()) + 1; }
};

inline double mean_rss_db(const Vector& target, const Vector& anchor, const ChannelParams& params) {
    const double dist = (target - anchor).norm();
    detail::require(dist > 1e-9, ErrorCode::coincident_points, "target coincides with anchor");
    return params.p0_nominal - 10.0 * params.gamma * std::log10(dist / params.d0);
}

/// One RSS observation per anchor: mean path loss plus independent Gaussian
/// transmit-power deviation and shadowing.
template <class Rng>
RssSampleSet sample_rss(const Scenario& scenario, const ChannelParams& params, Rng& rng) {
    validate(params);
    const int n = scenario.n_anchors();
    RssSampleSet out;
    out.rss_db.resize(n);
    out.anchor_ids.resize(static_cast<std::size_t>(n));
    std::normal_distribution<double> unit(0.0, 1.0);
    for (int i = 0; i < n; ++i) {
        const double dp0 = params.sigma_p0 * unit(rng);
        const double chi = params.sigma_chi * unit(rng);
        out.rss_db(i) = mean_rss_db(scenario.target, scenario.anchor(i), params) + dp0 + chi;
        out.anchor_ids[static_cast<std::size_t>(i)] = i;
    }
    return out;
}

/// Noise-free RSS (the mean of sample_rss).
inline RssSampleSet mean_rss(const Scenario& scenario, const ChannelParams& params) {
    const int n = scenario.n_anchors();
    RssSampleSet out;
    out.rss_db.resize(n);
    out.anchor_ids.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        out.rss_db(i) = mean_rss_db(scenario.target, scenario.anchor(i), params);
        out.anchor_ids[static_cast<std::size_t>(i)] = i;
    }
    return out;
}

/// Instantaneous received power under Nakagami-m fading: Gamma(m, omega / m),
/// so the mean is omega and the variance omega^2 / m.
template <class Rng>
double sample_instantaneous_power(double omega, const FadingParams& fading, Rng& rng) {
    detail::require(omega > 0.0 && std::isfinite(omega), ErrorCode::invalid_argument,
                    "omega must be positive");
    detail::require(fading.m >= 0.5, ErrorCode::invalid_argument, "fading parameter m must be >= 0.5");
    std::gamma_distribution<double> dist(fading.m, omega / fading.m);
    return dist(rng);
}

/// Maximum-likelihood RSS from instantaneous power samples, in dB.
inline double estimate_rss_ml(std::span<const double> power_samples) {
    detail::require(!power_samples.empty(), ErrorCode::invalid_argument, "no power samples");
    for (double p : power_samples)
        detail::require(p > 0.0 && std::isfinite(p), ErrorCode::invalid_argument,
                        "power samples must be positive");
    const double mean = std::accumulate(power_samples.begin(), power_samples.end(), 0.0) /
                        static_cast<double>(power_samples.size());
    return 10.0 * std::log10(mean);
}

/// RSS collected from k_samples faded power samples per anchor on top of the
/// large-scale model. Not used by default; the main experiments treat RSS as
/// perfectly collected.
template <class Rng>
RssSampleSet collect_rss_with_fading(const Scenario& scenario, const ChannelParams& params,
                                     const FadingParams& fading, Rng& rng) {
    detail::require(fading.k_samples >= 1, ErrorCode::invalid_argument, "k_samples must be >= 1");
    RssSampleSet large_scale = sample_rss(scenario, params, rng);
    std::vector<double> samples(static_cast<std::size_t>(fading.k_samples));
    for (Eigen::Index i = 0; i < large_scale.rss_db.size(); ++i) {
        const double omega = std::pow(10.0, large_scale.rss_db(i) / 10.0);
        for (auto& p : samples) p = sample_instantaneous_power(omega, fading, rng);
        large_scale.rss_db(i) = estimate_rss_ml(samples);
    }
    return large_scale;
}

/// Picks the strongest anchor as reference (lowest id wins ties) and
/// differences every other anchor against it.
inline DrssSampleSet drss_from_rss(const RssSampleSet& rss) {
    const auto n = static_cast<std::size_t>(rss.rss_db.size());
    detail::require(n >= 2, ErrorCode::invalid_argument, "need at least two RSS values");
    detail::require(rss.anchor_ids.size() == n, ErrorCode::invalid_argument,
                    "anchor_ids length mismatch");

    std::size_t rn_pos = 0;
    for (std::size_t i = 1; i < n; ++i) {
        const double v = rss.rss_db(static_cast<Eigen::Index>(i));
        const double best = rss.rss_db(static_cast<Eigen::Index>(rn_pos));
        if (v > best || (v == best && rss.anchor_ids[i] < rss.anchor_ids[rn_pos])) rn_pos = i;
    }

    std::vector<std::size_t> order;
    order.reserve(n - 1);
    for (std::size_t i = 0; i < n; ++i)
        if (i != rn_pos) order.push_back(i);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return rss.anchor_ids[a] < rss.anchor_ids[b]; });

    DrssSampleSet out;
    out.rn_index = rss.anchor_ids[rn_pos];
    out.drss_db.resize(static_cast<Eigen::Index>(n - 1));
    out.other_ids.reserve(n - 1);
    const double reference = rss.rss_db(static_cast<Eigen::Index>(rn_pos));
    for (std::size_t j = 0; j < order.size(); ++j) {
        out.drss_db(static_cast<Eigen::Index>(j)) =
            rss.rss_db(static_cast<Eigen::Index>(order[j])) - reference;
        out.other_ids.push_back(rss.anchor_ids[order[j]]);
    }
    return out;
}

}  // namespace drss
