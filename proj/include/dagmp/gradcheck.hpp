#pragma once

// Central finite-difference checking of reverse-mode gradients. Rebuilds
// the loss from scratch for every perturbed parameter element, so the loss
// builder must be deterministic.

#include <functional>
#include <string>
#include <vector>

#include "dagmp/params.hpp"
#include "dagmp/tensor.hpp"

namespace dagmp {

struct GradCheckReport {
  struct Item {
    std::string param;
    int row = 0, col = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    double rel_err = 0.0;
  };
  double max_rel_err = 0.0;
  Item worst;
  std::vector<Item> failures;  // entries exceeding the tolerance
  size_t checked = 0;

  bool ok() const { return failures.empty(); }
};

// |analytic - numeric| / max(1, |analytic|, |numeric|): relative for O(1)
// gradients, absolute below unit scale where FD noise would dominate a
// pure ratio.
inline double gradcheck_rel_err(double analytic, double numeric) {
  double denom = std::max({1.0, std::abs(analytic), std::abs(numeric)});
  return std::abs(analytic - numeric) / denom;
}

inline GradCheckReport grad_check(ParamStore& store,
                                  const std::function<Var(Tape&, ParamBinding&)>& build_loss,
                                  double tolerance, double step = 1e-6) {
  GradCheckReport report;

  std::vector<Tensor2> analytic;
  {
    Tape tape;
    ParamBinding bind(tape, store);
    Var loss = build_loss(tape, bind);
    tape.backward(loss);
    bind.accumulate_grads(analytic);
  }

  auto eval = [&]() {
    Tape tape;
    ParamBinding bind(tape, store);
    return tape.value_of(build_loss(tape, bind));
  };

  for (int i = 0; i < store.count(); ++i) {
    Tensor2& value = store.value(i);
    for (size_t j = 0; j < value.size(); ++j) {
      double saved = value.v[j];
      value.v[j] = saved + step;
      double up = eval();
      value.v[j] = saved - step;
      double down = eval();
      value.v[j] = saved;

      double numeric = (up - down) / (2.0 * step);
      double a = analytic[i].v[j];
      double rel = gradcheck_rel_err(a, numeric);
      ++report.checked;

      GradCheckReport::Item item{store.entry(i).name, static_cast<int>(j) / value.cols,
                                 static_cast<int>(j) % value.cols, a, numeric, rel};
      if (rel > report.max_rel_err) {
        report.max_rel_err = rel;
        report.worst = item;
      }
      if (rel > tolerance) report.failures.push_back(item);
    }
  }
  return report;
}

}  // namespace dagmp
