#pragma once

#include "sode/analysis.hpp"
#include "sode/straighten.hpp"

#include "json.hpp"

namespace sodeform {

inline constexpr const char* tool_name = "sodeform";
inline constexpr const char* tool_version = "0.1.0";
inline constexpr int schema_version = 1;

nlohmann::json to_json(const sode::Check& c);
nlohmann::json to_json(const sode::RankReport& r);
nlohmann::json to_json(const sode::InvolutivityVerdict& v);
nlohmann::json to_json(const sode::CrossSection& cs);
nlohmann::json to_json(const sode::VectorField& X);
nlohmann::json to_json(const sode::QuadraticVerdict& q);

/// Gates, F decomposition, cross-section and frame.
nlohmann::json classification_json(const sode::AnalysisReport& rep);
/// alpha, beta, adaptation, S-action, projector table, lifts, Gamma, identity suite.
nlohmann::json connection_json(const sode::AnalysisReport& rep);
/// theta components and the quadratic verdict.
nlohmann::json curvature_json(const sode::AnalysisReport& rep);

nlohmann::json to_json(const sode::CoordinateTransform& tr);
/// include_nodes = false keeps only the statistics and fits.
nlohmann::json to_json(const sode::ResidualReport& r, bool include_nodes = true);

/// Conventions behind the reported coefficients.
nlohmann::json sign_conventions();

}  // namespace sodeform
