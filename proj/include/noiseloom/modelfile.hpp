// modelfile.hpp — JSON model definition files.
//
// Accepted shapes:
//   {"type":"rtn","gamma":1.0,"omega":2.0}
//   {"type":"exact","H":[[...]],"rho":[[...]],"V":[[...]]}
//   {"type":"lindblad","generator":[[...]],"rho":[[...]],"V":[[...]]}
// Matrices are arrays of rows; each entry is either a plain number (real) or a
// two-element [re, im] array.

#pragma once

#include <fstream>
#include <string>

#include <json.hpp>

#include "noiseloom/envmodel.hpp"
#include "noiseloom/errors.hpp"

namespace noiseloom::envmodel {

namespace detail {

inline ComplexMatrix parse_matrix(const nlohmann::json& j, const std::string& key) {
    if (!j.is_array() || j.empty()) {
        throw FormatError("model file: '" + key + "' must be a non-empty array of rows");
    }
    const std::size_t n = j.size();
    ComplexMatrix m(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& row = j[i];
        if (!row.is_array() || row.size() != n) {
            throw FormatError("model file: '" + key + "' row " + std::to_string(i) +
                              " does not have " + std::to_string(n) + " entries");
        }
        for (std::size_t k = 0; k < n; ++k) {
            const auto& e = row[k];
            if (e.is_number()) {
                m(i, k) = complex{e.get<double>(), 0.0};
            } else if (e.is_array() && e.size() == 2 && e[0].is_number() && e[1].is_number()) {
                m(i, k) = complex{e[0].get<double>(), e[1].get<double>()};
            } else {
                throw FormatError("model file: '" + key + "' entry (" + std::to_string(i) +
                                  "," + std::to_string(k) + ") must be a number or [re, im]");
            }
        }
    }
    return m;
}

}  // namespace detail

// Shared matrix encoding for model, system, and config files.
inline ComplexMatrix matrix_from_json(const nlohmann::json& j, const std::string& key) {
    return detail::parse_matrix(j, key);
}

inline EnvironmentModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open model file: " + path);

    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("model file " + path + ": " + e.what());
    }
    if (!j.is_object() || !j.contains("type") || !j["type"].is_string()) {
        throw FormatError("model file " + path + ": missing string field 'type'");
    }
    const std::string type = j["type"].get<std::string>();

    auto need = [&](const char* key) -> const nlohmann::json& {
        if (!j.contains(key)) {
            throw FormatError("model file " + path + ": missing field '" + key + "'");
        }
        return j[key];
    };

    try {
        if (type == "rtn") {
            const auto& g = need("gamma");
            const auto& w = need("omega");
            if (!g.is_number() || !w.is_number()) {
                throw FormatError("model file " + path + ": gamma/omega must be numbers");
            }
            return build_rtn_env(g.get<double>(), w.get<double>());
        }
        if (type == "exact") {
            return make_exact_env(detail::parse_matrix(need("H"), "H"),
                                  DensityMatrix(detail::parse_matrix(need("rho"), "rho")),
                                  detail::parse_matrix(need("V"), "V"), "exact:" + path);
        }
        if (type == "lindblad") {
            return make_lindblad_env(detail::parse_matrix(need("generator"), "generator"),
                                     DensityMatrix(detail::parse_matrix(need("rho"), "rho")),
                                     detail::parse_matrix(need("V"), "V"), "lindblad:" + path);
        }
    } catch (const InvalidParameter& e) {
        throw FormatError("model file " + path + ": " + e.what());
    }
    throw FormatError("model file " + path + ": unknown type '" + type + "'");
}

}  // namespace noiseloom::envmodel
