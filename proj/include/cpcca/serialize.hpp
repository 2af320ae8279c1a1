#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <string_view>

#include <Eigen/Dense>
#include <json.hpp>

#include "cpcca/error.hpp"
#include "cpcca/pcca.hpp"
#include "cpcca/spectral.hpp"

namespace cpcca {

using Json = nlohmann::ordered_json;

inline std::string_view to_string(SelectionMode m) {
  return m == SelectionMode::LargestMagnitude ? "magnitude" : "real";
}

inline std::string_view to_string(WeightChoice w) { return w == WeightChoice::Uniform ? "uniform" : "stationary"; }

inline std::string_view to_string(OptimizerMethod m) {
  switch (m) {
    case OptimizerMethod::NelderMead: return "nelder-mead";
    case OptimizerMethod::GaussNewton: return "gauss-newton";
    case OptimizerMethod::LevenbergMarquardt: return "levenberg-marquardt";
  }
  return "unknown";
}

inline SelectionMode parse_selection_mode(std::string_view s) {
  if (s == "magnitude") return SelectionMode::LargestMagnitude;
  if (s == "real") return SelectionMode::LargestRealPart;
  throw Error(ErrorCode::InvalidArgument, "mode must be 'magnitude' or 'real'");
}

inline WeightChoice parse_weight_choice(std::string_view s) {
  if (s == "uniform") return WeightChoice::Uniform;
  if (s == "stationary") return WeightChoice::Stationary;
  throw Error(ErrorCode::InvalidArgument, "weight must be 'uniform' or 'stationary'");
}

inline OptimizerMethod parse_optimizer_method(std::string_view s) {
  if (s == "nelder-mead") return OptimizerMethod::NelderMead;
  if (s == "gauss-newton") return OptimizerMethod::GaussNewton;
  if (s == "levenberg-marquardt") return OptimizerMethod::LevenbergMarquardt;
  throw Error(ErrorCode::InvalidArgument, "method must be nelder-mead, gauss-newton or levenberg-marquardt");
}

/// Non-finite values serialize as null.
inline Json number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

/// Row-major nested arrays.
inline Json matrix_json(const Eigen::MatrixXd& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(number(m(i, j)));
    rows.push_back(std::move(row));
  }
  return rows;
}

/// Complex values as [re, im] pairs.
inline Json eigenvalues_json(const Eigen::VectorXcd& values) {
  Json out = Json::array();
  for (Eigen::Index k = 0; k < values.size(); ++k) out.push_back({number(values[k].real()), number(values[k].imag())});
  return out;
}

inline Json error_json(const Error& e) {
  Json details = Json::array();
  for (auto d : e.data()) details.push_back(d);
  return Json{{"error", {{"code", std::string(code_name(e.code()))}, {"message", e.what()}, {"data", details}}}};
}

/// Clustering result without timings. State and vertex indices are 0-based.
inline Json to_json(const ClusteringResult& r) {
  Json j;
  j["n_states"] = r.membership.n_states();
  j["n_clusters"] = r.membership.n_clusters();
  j["selection_mode"] = std::string(to_string(r.basis.spectrum.selection.mode));
  j["eigenvalues"] = eigenvalues_json(r.basis.spectrum.eigenvalues);
  j["subspace_residual"] = number(r.basis.residual);
  j["objective"] = number(r.objective);
  j["initial_objective"] = number(r.initial_objective);
  j["crispness"] = number(r.crispness);
  j["vertex_indices"] = r.vertex_indices;
  j["transform"] = matrix_json(r.transform.values);
  j["coarse_matrix"] = matrix_json(r.coarse);
  j["optimizer"] = {{"method", std::string(to_string(r.method))},
                    {"iterations", r.trace.iterations},
                    {"evaluations", r.trace.evaluations},
                    {"converged", r.trace.converged}};
  return j;
}

inline Json to_json(const ClusterScan& scan, double min_chi_threshold) {
  Json cands = Json::array();
  for (const auto& c : scan.candidates) {
    Json e;
    e["n_clusters"] = c.n_clusters;
    e["skipped"] = c.skipped;
    e["skip_reason"] = c.skipped ? Json(c.skip_reason) : Json(nullptr);
    e["min_chi"] = number(c.min_chi);
    e["min_chi_acceptable"] = c.skipped ? Json(nullptr) : Json(c.min_chi >= min_chi_threshold);
    e["crispness"] = number(c.crispness);
    e["selected"] = c.selected;
    cands.push_back(std::move(e));
  }
  return Json{{"min_chi_threshold", min_chi_threshold}, {"selected", scan.selected}, {"candidates", cands}};
}

}  // namespace cpcca
