#include "motionseg/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace motionseg {

std::string GradCheckReport::describe() const {
  std::ostringstream os;
  os << "max_abs=" << max_abs_error << " max_rel=" << max_rel_error;
  if (worst_input >= 0) {
    os << " at input " << worst_input << " elem " << worst_element << " (analytic=" << worst_analytic
       << ", fd=" << worst_fd << ")";
  }
  if (!deterministic) os << " NONDETERMINISTIC";
  return os.str();
}

GradCheckReport grad_check(const LossFn& fn, std::vector<Tensor> inputs, double eps,
                           double refine_rel, double refine_eps, double atol) {
  if (inputs.empty()) throw std::invalid_argument("grad_check needs at least one input");
  if (!(eps > 0 && eps <= 1e-2)) throw std::invalid_argument("grad_check eps must be in (0, 1e-2]");
  if (refine_eps != 0 && !(refine_eps > 0 && refine_eps <= 1e-2))
    throw std::invalid_argument("grad_check refine_eps must be in (0, 1e-2]");
  GradCheckReport report;

  const double f_once = fn(inputs).value();
  const double f_again = fn(inputs).value();
  report.deterministic = f_once == f_again;
  if (!report.deterministic)
    throw std::invalid_argument("grad_check: two evaluations disagreed, computation is not deterministic");

  Tape tape;
  std::vector<Tensor> tracked;
  tracked.reserve(inputs.size());
  for (const Tensor& in : inputs) tracked.push_back(tape.watch(in));
  Tensor loss = fn(tracked);
  tape.backward(loss);
  std::vector<Tensor> analytic;
  analytic.reserve(inputs.size());
  for (const Tensor& tr : tracked) analytic.push_back(tape.grad(tr));

  const auto central = [&](std::vector<Tensor>& in, size_t i, long long j, double step) {
    double* buf = in[i].data();
    const double saved = buf[j];
    buf[j] = saved + step;
    const double fp = fn(in).value();
    buf[j] = saved - step;
    const double fm = fn(in).value();
    buf[j] = saved;
    return (fp - fm) / (2.0 * step);
  };
  const auto rel_of = [](double a, double fd) {
    return std::fabs(a - fd) / std::max({std::fabs(a), std::fabs(fd), 1e-8});
  };

  for (size_t i = 0; i < inputs.size(); ++i) {
    const double* an = analytic[i].data();
    const long long n = inputs[i].size();
    for (long long j = 0; j < n; ++j) {
      double fd = central(inputs, i, j, eps);
      double rel_err = rel_of(an[j], fd);
      if (refine_eps > 0 && rel_err > refine_rel) {
        const double fd2 = central(inputs, i, j, refine_eps);
        if (rel_of(an[j], fd2) < rel_err) {
          fd = fd2;
          rel_err = rel_of(an[j], fd2);
        }
      }
      const double abs_err = std::fabs(an[j] - fd);
      report.max_abs_error = std::max(report.max_abs_error, abs_err);
      if (abs_err <= atol) rel_err = 0;
      if (rel_err > report.max_rel_error) {
        report.max_rel_error = rel_err;
        report.worst_input = static_cast<int>(i);
        report.worst_element = j;
        report.worst_analytic = an[j];
        report.worst_fd = fd;
      }
    }
  }
  return report;
}

Tensor uniform_tensor(Rng& rng, std::vector<int> shape, double lo, double hi) {
  Tensor t(std::move(shape));
  double* d = t.data();
  const long long n = t.size();
  for (long long i = 0; i < n; ++i) d[i] = rng.uniform(lo, hi);
  return t;
}

Tensor normal_tensor(Rng& rng, std::vector<int> shape, double mean, double stddev) {
  Tensor t(std::move(shape));
  double* d = t.data();
  const long long n = t.size();
  for (long long i = 0; i < n; ++i) d[i] = rng.normal(mean, stddev);
  return t;
}

}  // namespace motionseg
