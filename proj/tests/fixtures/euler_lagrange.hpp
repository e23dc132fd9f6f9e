#pragma once

// Oracle for reduced Lagrangian systems: takes the unreduced Lagrangian
// L(q, qd), solves the Euler-Lagrange equations for the accelerations and
// differentiates the reduced coordinates along the solution. Shares only the
// expression engine with the library.

#include "sode/expr.hpp"

#include "json.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <stdexcept>
#include <string>
#include <vector>

namespace oracle {

class EulerLagrange {
 public:
  /// `lagrangian`: configuration, velocities, L, cyclic, reduced_coordinates
  /// (one expression in (q, qd) per entry of `reduced_names`).
  EulerLagrange(const nlohmann::json& lagrangian, std::vector<std::string> reduced_names)
      : names_(std::move(reduced_names)) {
    q_ = lagrangian.at("configuration").get<std::vector<std::string>>();
    qd_ = lagrangian.at("velocities").get<std::vector<std::string>>();
    cyclic_ = lagrangian.at("cyclic").get<std::vector<std::string>>();
    const sode::Expression L = sode::parse(lagrangian.at("L").get<std::string>());
    const std::size_t d = q_.size();
    dL_dq_.resize(d);
    hess_vv_.assign(d, std::vector<sode::Expression>(d));
    hess_vq_.assign(d, std::vector<sode::Expression>(d));
    for (std::size_t a = 0; a < d; ++a) {
      dL_dq_[a] = sode::differentiate(L, q_[a]);
      const sode::Expression p = sode::differentiate(L, qd_[a]);
      for (std::size_t b = 0; b < d; ++b) {
        hess_vv_[a][b] = sode::differentiate(p, qd_[b]);
        hess_vq_[a][b] = sode::differentiate(p, q_[b]);
      }
    }
    for (const auto& n : names_) {
      reduced_.push_back(sode::parse(lagrangian.at("reduced_coordinates").at(n).get<std::string>()));
    }
    // Unknowns: every q and qd except the cyclic coordinates, which are set to 0.
    for (const auto& s : q_) {
      if (std::find(cyclic_.begin(), cyclic_.end(), s) == cyclic_.end()) unknowns_.push_back(s);
    }
    unknowns_.insert(unknowns_.end(), qd_.begin(), qd_.end());
    if (unknowns_.size() != names_.size()) throw std::invalid_argument("reduced coordinates do not match the unknowns");
    for (const auto& r : reduced_) {
      std::vector<sode::Expression> row;
      for (const auto& u : unknowns_) row.push_back(sode::differentiate(r, u));
      reduced_jac_.push_back(row);
    }
  }

  /// Time derivative of the reduced coordinates at the reduced point r.
  std::vector<double> field(const std::vector<double>& r) const {
    sode::Assignment a = lift(r);
    const auto d = static_cast<Eigen::Index>(q_.size());
    Eigen::MatrixXd M(d, d);
    Eigen::VectorXd rhs(d);
    for (Eigen::Index i = 0; i < d; ++i) {
      double s = sode::evaluate(dL_dq_[i], a);
      for (Eigen::Index j = 0; j < d; ++j) {
        M(i, j) = sode::evaluate(hess_vv_[i][j], a);
        s -= sode::evaluate(hess_vq_[i][j], a) * a.at(qd_[j]);
      }
      rhs(i) = s;
    }
    const Eigen::VectorXd qdd = M.fullPivLu().solve(rhs);
    std::vector<double> out;
    for (const auto& e : reduced_) {
      double v = 0.0;
      for (std::size_t i = 0; i < q_.size(); ++i) {
        v += sode::evaluate(sode::differentiate(e, q_[i]), a) * a.at(qd_[i]);
        v += sode::evaluate(sode::differentiate(e, qd_[i]), a) * qdd(static_cast<Eigen::Index>(i));
      }
      out.push_back(v);
    }
    return out;
  }

 private:
  // Newton solve for (q, qd) with the cyclic coordinates at 0.
  sode::Assignment lift(const std::vector<double>& r) const {
    sode::Assignment a;
    for (const auto& s : cyclic_) a[s] = 0.0;
    for (const auto& u : unknowns_) a[u] = 0.0;
    const auto k = static_cast<Eigen::Index>(unknowns_.size());
    for (int it = 0; it < 50; ++it) {
      Eigen::VectorXd res(k);
      Eigen::MatrixXd J(k, k);
      for (Eigen::Index i = 0; i < k; ++i) {
        res(i) = sode::evaluate(reduced_[i], a) - r[i];
        for (Eigen::Index j = 0; j < k; ++j) J(i, j) = sode::evaluate(reduced_jac_[i][j], a);
      }
      if (res.norm() < 1e-14) return a;
      const Eigen::VectorXd step = J.fullPivLu().solve(res);
      for (Eigen::Index j = 0; j < k; ++j) a[unknowns_[j]] -= step(j);
    }
    throw std::runtime_error("oracle: reduced coordinates could not be inverted");
  }

  std::vector<std::string> names_, q_, qd_, cyclic_, unknowns_;
  std::vector<sode::Expression> dL_dq_, reduced_;
  std::vector<std::vector<sode::Expression>> hess_vv_, hess_vq_, reduced_jac_;
};

}  // namespace oracle
