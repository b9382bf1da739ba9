#include "irsc/adam.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace irsc::diff {

void Adam::step(std::span<std::vector<double>*> params,
                std::span<const std::span<const double>> grads) {
  if (params.size() != grads.size()) {
    throw std::invalid_argument("adam: parameter/gradient count mismatch");
  }
  if (m_.empty()) {
    m_.resize(params.size());
    v_.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i].assign(params[i]->size(), 0.0);
      v_[i].assign(params[i]->size(), 0.0);
    }
  }
  if (m_.size() != params.size()) {
    throw std::invalid_argument("adam: slot count changed between steps");
  }
  ++t_;
  const double corr1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double corr2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    std::vector<double>& p = *params[i];
    std::span<const double> g = grads[i];
    if (p.size() != g.size() || p.size() != m_[i].size()) {
      throw std::invalid_argument("adam: size mismatch in slot " +
                                  std::to_string(i));
    }
    std::vector<double>& m = m_[i];
    std::vector<double>& v = v_[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = config_.beta1 * m[j] + (1.0 - config_.beta1) * g[j];
      v[j] = config_.beta2 * v[j] + (1.0 - config_.beta2) * g[j] * g[j];
      const double mhat = m[j] / corr1;
      const double vhat = v[j] / corr2;
      p[j] -= config_.learning_rate * mhat / (std::sqrt(vhat) + config_.epsilon);
    }
  }
}

}  // namespace irsc::diff
