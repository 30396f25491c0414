#pragma once

// Finite-difference gradient checking shared by the autodiff and model
// tests. Central differences, step 1e-5, relative tolerance 1e-5 with an
// absolute floor of 1 on the denominator (gradients here are O(1)).

#include <cmath>
#include <functional>
#include <string>

#include "ipnet/autodiff.hpp"

namespace gradcheck {

struct Result {
  std::size_t checked = 0;
  double worst_rel = 0.0;
  std::string worst_param;
};

/// loss_fn() must run a full forward+loss on the current parameter values
/// WITHOUT touching gradients. grads must already hold the autodiff result
/// for the same batch. Every trainable parameter element is checked unless
/// stride > 1.
inline Result check_params(std::vector<ipnet::ParamView> params,
                           const std::function<double()>& loss_fn,
                           double step = 1e-5, std::size_t stride = 1) {
  Result r;
  for (const ipnet::ParamView& p : params) {
    if (!p.trainable) continue;
    for (std::size_t i = 0; i < p.size; i += stride) {
      const double saved = p.value[i];
      p.value[i] = saved + step;
      const double up = loss_fn();
      p.value[i] = saved - step;
      const double down = loss_fn();
      p.value[i] = saved;
      const double fd = (up - down) / (2.0 * step);
      const double ad = p.grad[i];
      const double rel =
          std::abs(ad - fd) / std::max({std::abs(ad), std::abs(fd), 1.0});
      if (rel > r.worst_rel) {
        r.worst_rel = rel;
        r.worst_param = p.name + "[" + std::to_string(i) + "]";
      }
      ++r.checked;
    }
  }
  return r;
}

}  // namespace gradcheck
