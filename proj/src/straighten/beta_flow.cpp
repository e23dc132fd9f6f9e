#include "straighten/beta_flow.hpp"

namespace sode {

BetaFlow::BetaFlow(const ExtendedFrame& ef, const BetaCoefficients& b) : m_(ef.chart->dim()), n_(ef.n()), box_(ef.box()) {
  const auto& names = ef.chart->names();
  for (const auto& v : ef.V) {
    V_.emplace_back(v);
    DV_.emplace_back(v);
  }
  for (std::size_t k = 0; k < n_; ++k) {
    for (std::size_t l = 0; l < n_; ++l) {
      for (std::size_t mm = 0; mm < n_; ++mm) {
        const Expression& e = b.beta[k][l][mm];
        beta_.emplace_back(e, names);
        std::vector<CompiledExpression> g;
        for (const auto& name : names) g.emplace_back(differentiate(e, name), names);
        grad_.push_back(std::move(g));
      }
    }
  }
}

bool BetaFlow::rhs(std::size_t l0, bool adapted, std::span<const double> y, std::span<double> out) const {
  std::span<const double> z = y.subspan(0, m_);
  const double* A = y.data() + m_;
  std::vector<double> c(n_, 0.0);
  if (adapted) {
    for (std::size_t l = 0; l < n_; ++l) c[l] = A[l0 * n_ + l];
  } else {
    c[l0] = 1.0;
  }
  std::fill(out.begin(), out.end(), 0.0);
  std::vector<double> v(m_);
  for (std::size_t l = 0; l < n_; ++l) {
    if (c[l] == 0.0) continue;
    if (!V_[l].eval(z, v)) return false;
    for (std::size_t r = 0; r < m_; ++r) out[r] += c[l] * v[r];
  }
  for (std::size_t k = 0; k < n_; ++k) {
    for (std::size_t l = 0; l < n_; ++l) {
      if (c[l] == 0.0) continue;
      for (std::size_t mm = 0; mm < n_; ++mm) {
        double b = 0.0;
        if (!beta_[(k * n_ + l) * n_ + mm].try_eval(z, b)) return false;
        if (b == 0.0) continue;
        for (std::size_t j = 0; j < n_; ++j) out[m_ + j * n_ + k] -= c[l] * A[j * n_ + mm] * b;
      }
    }
  }
  return true;
}

bool BetaFlow::jacobian(std::size_t l0, bool adapted, std::span<const double> y, Eigen::MatrixXd& J) const {
  const auto d = static_cast<Eigen::Index>(state_dim());
  J.setZero(d, d);
  std::span<const double> z = y.subspan(0, m_);
  const double* A = y.data() + m_;
  std::vector<double> c(n_, 0.0);
  if (adapted) {
    for (std::size_t l = 0; l < n_; ++l) c[l] = A[l0 * n_ + l];
  } else {
    c[l0] = 1.0;
  }
  auto idx = [&](std::size_t j, std::size_t k) { return static_cast<Eigen::Index>(m_ + j * n_ + k); };
  Eigen::MatrixXd D;
  std::vector<double> v(m_);
  for (std::size_t l = 0; l < n_; ++l) {
    if (!DV_[l].eval(z, D)) return false;
    J.topLeftCorner(static_cast<Eigen::Index>(m_), static_cast<Eigen::Index>(m_)) += c[l] * D;
    if (adapted) {
      if (!V_[l].eval(z, v)) return false;
      for (std::size_t r = 0; r < m_; ++r) J(static_cast<Eigen::Index>(r), idx(l0, l)) += v[r];
    }
  }
  for (std::size_t k = 0; k < n_; ++k) {
    for (std::size_t l = 0; l < n_; ++l) {
      for (std::size_t mm = 0; mm < n_; ++mm) {
        const std::size_t bi = (k * n_ + l) * n_ + mm;
        double b = 0.0;
        if (!beta_[bi].try_eval(z, b)) return false;
        for (std::size_t j = 0; j < n_; ++j) {
          const auto row = idx(j, k);
          const double Ajm = A[j * n_ + mm];
          if (c[l] != 0.0) {
            for (std::size_t r = 0; r < m_; ++r) {
              double g = 0.0;
              if (!grad_[bi][r].try_eval(z, g)) return false;
              J(row, static_cast<Eigen::Index>(r)) -= c[l] * Ajm * g;
            }
            J(row, idx(j, mm)) -= c[l] * b;
          }
          if (adapted) J(row, idx(l0, l)) -= Ajm * b;
        }
      }
    }
  }
  return true;
}

OdeSystem BetaFlow::system(std::size_t l, bool adapted, const IntegratorOptions& options, double singular_det) const {
  OdeSystem sys;
  sys.dim = state_dim();
  sys.rhs = [this, l, adapted](std::span<const double> y, std::span<double> out) { return rhs(l, adapted, y, out); };
  sys.jacobian = [this, l, adapted](std::span<const double> y, Eigen::MatrixXd& J) { return jacobian(l, adapted, y, J); };
  SamplingBox box = box_;
  const double margin = options.box_margin;
  const std::size_t m = m_, n = n_;
  sys.admissible = [box, margin, m, n, singular_det](std::span<const double> y) {
    if (!box.contains(std::vector<double>(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(m)), margin)) return false;
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> A(
        y.data() + m, static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    return std::abs(A.determinant()) > singular_det;
  };
  return sys;
}

}  // namespace sode
