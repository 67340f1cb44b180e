#pragma once

#include "drss/scenario.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <set>
#include <string>

namespace drss {

// Scenario files are JSON objects with exactly the keys
// dimension, field_side, anchors (list of coordinate lists) and target.

inline nlohmann::json scenario_to_json(const Scenario& s) {
    nlohmann::json anchors = nlohmann::json::array();
    for (int i = 0; i < s.n_anchors(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (int k = 0; k < s.dimension(); ++k) row.push_back(s.anchors(i, k));
        anchors.push_back(std::move(row));
    }
    nlohmann::json target = nlohmann::json::array();
    for (int k = 0; k < s.target.size(); ++k) target.push_back(s.target(k));
    return {{"dimension", s.dimension()},
            {"field_side", s.field_side},
            {"anchors", std::move(anchors)},
            {"target", std::move(target)}};
}

inline Scenario scenario_from_json(const nlohmann::json& j) {
    detail::require(j.is_object(), ErrorCode::config, "scenario must be a JSON object");
    static const std::set<std::string> known{"dimension", "field_side", "anchors", "target"};
    for (const auto& item : j.items())
        detail::require(known.count(item.key()) == 1, ErrorCode::config,
                        "unknown scenario key '" + item.key() + "'");
    for (const auto& key : known)
        detail::require(j.contains(key), ErrorCode::config, "missing scenario key '" + key + "'");

    try {
        const int d = j.at("dimension").get<int>();
        detail::require(d >= 1, ErrorCode::config, "dimension must be positive");
        const auto& anchors = j.at("anchors");
        const auto& target = j.at("target");
        detail::require(anchors.is_array() && target.is_array(), ErrorCode::config,
                        "anchors and target must be arrays");

        Scenario s;
        s.field_side = j.at("field_side").get<double>();
        s.anchors.resize(static_cast<Eigen::Index>(anchors.size()), d);
        for (std::size_t i = 0; i < anchors.size(); ++i) {
            detail::require(anchors[i].is_array() && anchors[i].size() == static_cast<std::size_t>(d),
                            ErrorCode::config, "anchor " + std::to_string(i) + " has wrong dimension");
            for (int k = 0; k < d; ++k)
                s.anchors(static_cast<Eigen::Index>(i), k) = anchors[i][static_cast<std::size_t>(k)].get<double>();
        }
        detail::require(target.size() == static_cast<std::size_t>(d), ErrorCode::config,
                        "target has wrong dimension");
        s.target.resize(d);
        for (int k = 0; k < d; ++k) s.target(k) = target[static_cast<std::size_t>(k)].get<double>();
        validate(s);
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::config, std::string("malformed scenario: ") + e.what());
    }
}

inline void save_scenario(const Scenario& s, const std::string& path) {
    std::ofstream out(path);
    detail::require(static_cast<bool>(out), ErrorCode::config, "cannot open '" + path + "'");
    out << scenario_to_json(s).dump(2) << '\n';
}

inline Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    detail::require(static_cast<bool>(in), ErrorCode::config, "cannot open '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::config, "cannot parse '" + path + "': " + e.what());
    }
    return scenario_from_json(j);
}

}  // namespace drss
