#pragma once

// Shared helpers for the JSON model documents. Implementation detail: public
// headers expose string round trips only.

#include <Eigen/Dense>
#include <string>

#include "battdiag/common.hpp"
#include "battdiag/learners.hpp"
#include "json.hpp"

namespace battdiag::detail {

inline nlohmann::json vector_json(const Eigen::VectorXd& v) {
    nlohmann::json a = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

inline Eigen::VectorXd vector_from(const nlohmann::json& a) {
    Eigen::VectorXd v(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) v[static_cast<Eigen::Index>(i)] = a.at(i).get<double>();
    return v;
}

inline nlohmann::json matrix_json(const Eigen::MatrixXd& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline Eigen::MatrixXd matrix_from(const nlohmann::json& rows) {
    const Eigen::Index nr = static_cast<Eigen::Index>(rows.size());
    const Eigen::Index nc = nr == 0 ? 0 : static_cast<Eigen::Index>(rows.at(0).size());
    Eigen::MatrixXd m(nr, nc);
    for (Eigen::Index r = 0; r < nr; ++r) {
        const auto& row = rows.at(static_cast<std::size_t>(r));
        if (static_cast<Eigen::Index>(row.size()) != nc)
            throw ParseError("model document: ragged matrix");
        for (Eigen::Index c = 0; c < nc; ++c) m(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
    }
    return m;
}

inline nlohmann::json standardizer_json(const Standardizer& s) {
    return {{"mean", vector_json(s.mean)}, {"scale", vector_json(s.scale)}};
}

inline Standardizer standardizer_from(const nlohmann::json& j) {
    Standardizer s;
    s.mean = vector_from(j.at("mean"));
    s.scale = vector_from(j.at("scale"));
    return s;
}

inline nlohmann::json kernel_json(const KernelSpec& k) {
    return {{"kind", to_string(k.kind)},   {"variance", k.variance},
            {"length_scale", k.length_scale}, {"alpha", k.alpha},
            {"degree", k.degree},          {"offset", k.offset}};
}

inline KernelSpec kernel_from(const nlohmann::json& j) {
    KernelSpec k;
    k.kind = kernel_kind_from_string(j.at("kind").get<std::string>());
    k.variance = j.at("variance").get<double>();
    k.length_scale = j.at("length_scale").get<double>();
    k.alpha = j.at("alpha").get<double>();
    k.degree = j.at("degree").get<int>();
    k.offset = j.at("offset").get<double>();
    return k;
}

inline nlohmann::json model_document(const std::string& type) {
    return {{"format", "battdiag-model"}, {"version", 1}, {"type", type}};
}

inline nlohmann::json parse_document(const std::string& text, const std::string& type) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("model document: ") + e.what());
    }
    if (!j.is_object() || j.value("format", "") != "battdiag-model")
        throw ParseError("model document: missing battdiag-model header");
    if (j.value("version", 0) != 1)
        throw ParseError("model document: unsupported version");
    if (j.value("type", "") != type)
        throw ParseError("model document: expected type '" + type + "', got '" +
                         j.value("type", "") + "'");
    return j;
}

}  // namespace battdiag::detail
