#pragma once

#include "igc/types.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

namespace igc {

/// Group soft-thresholding, the proximal operator of t * ||.||_2.
/// Shrinks `u` in place by max(0, 1 - t / ||u||); groups with ||u|| <= t are
/// set to exact zeros. Returns true when the group was zeroed.
template <typename Derived>
bool soft_threshold_group_inplace(Eigen::MatrixBase<Derived>& u,
                                  typename Derived::Scalar t) {
  using Scalar = typename Derived::Scalar;
  const Scalar norm = u.norm();
  if (norm <= t) {
    u.setZero();
    return true;
  }
  u *= Scalar(1) - t / norm;
  return false;
}

template <typename Derived>
VectorX<typename Derived::Scalar> soft_threshold_group(const Eigen::MatrixBase<Derived>& u,
                                                       typename Derived::Scalar t) {
  VectorX<typename Derived::Scalar> z = u;
  soft_threshold_group_inplace(z, t);
  return z;
}

/// One (cause, effect) pair's penalty groups: groups[0] is the shared causal
/// block, groups[1..n] the per-environment intervention blocks. All groups
/// have the same length.
template <typename Scalar>
struct GroupFamily {
  std::vector<VectorX<Scalar>> groups;

  Index size() const { return static_cast<Index>(groups.size()); }
  Index group_length() const { return groups.empty() ? 0 : groups.front().size(); }
  VectorX<Scalar> concatenated() const {
    VectorX<Scalar> out(size() * group_length());
    for (Index k = 0; k < size(); ++k)
      out.segment(k * group_length(), group_length()) = groups[static_cast<size_t>(k)];
    return out;
  }
};

/// Proximal operator of
///   (1 - alpha) * lambda * ||(u_0, ..., u_n)||_2 + alpha * lambda * sum_{k>=1} ||u_k||_2
/// applied in place: every environment group is soft-thresholded at
/// alpha * lambda first, then the concatenation (including u_0, which is
/// never shrunk alone) at (1 - alpha) * lambda. The groups are nested, so this
/// order yields the exact prox.
template <typename Scalar, typename GroupRef>
void hierarchical_prox_inplace(std::vector<GroupRef>& groups, Scalar alpha, Scalar lambda) {
  const Scalar per_env = alpha * lambda;
  const Scalar joint = (Scalar(1) - alpha) * lambda;
  Scalar sq = groups.empty() ? Scalar(0) : groups.front().squaredNorm();
  for (size_t k = 1; k < groups.size(); ++k) {
    soft_threshold_group_inplace(groups[k], per_env);
    sq += groups[k].squaredNorm();
  }
  using std::sqrt;
  const Scalar norm = sqrt(sq);
  if (norm <= joint) {
    for (auto& g : groups) g.setZero();
    return;
  }
  const Scalar scale = Scalar(1) - joint / norm;
  for (auto& g : groups) g *= scale;
}

template <typename Scalar>
GroupFamily<Scalar> hierarchical_prox(GroupFamily<Scalar> fam, Scalar alpha, Scalar lambda) {
  const Index len = fam.group_length();
  for (const auto& g : fam.groups)
    if (g.size() != len) throw DataError("group family vectors differ in length");
  std::vector<Eigen::Ref<VectorX<Scalar>>> refs;
  refs.reserve(fam.groups.size());
  for (auto& g : fam.groups) refs.emplace_back(g);
  hierarchical_prox_inplace(refs, alpha, lambda);
  return fam;
}

// ---------------------------------------------------------------------------
// Proximal gradient descent with backtracking on the smooth part.

struct ProxGradientOptions {
  double step_size = 1e-2;
  double step_growth = 1.0;
  double backtrack = 0.5;
  double min_step = 1e-14;
  double tol = 1e-6;
  int max_iters = 1000;
};

struct ProxGradientResult {
  Vector x;
  std::vector<double> trace;  // composite objective, one entry per iterate
  bool converged = false;
  int iterations = 0;
  double final_step = 0.0;
};

/// Minimizes smooth(x) + penalty(x).
///   smooth(x, grad*)  -> value; fills *grad when non-null
///   prox(x, step)     -> in-place prox of step * penalty
///   penalty(x)        -> value
/// Each step is accepted when the smooth part satisfies the quadratic upper
/// bound, which makes the composite objective non-increasing.
template <typename Smooth, typename Prox, typename Penalty>
ProxGradientResult prox_gradient_loop(Smooth&& smooth, Prox&& prox, Penalty&& penalty,
                                      Vector x0, const ProxGradientOptions& opt) {
  auto check = [](double v, const char* what, int it) {
    if (!std::isfinite(v)) {
      std::ostringstream os;
      os << "non-finite " << what << " at iteration " << it;
      throw NumericalError(os.str());
    }
  };

  ProxGradientResult res;
  res.x = std::move(x0);
  Vector grad(res.x.size());
  double f = smooth(res.x, &grad);
  check(f, "smooth objective", 0);
  if (!grad.allFinite()) throw NumericalError("non-finite gradient at iteration 0");
  double objective = f + penalty(res.x);
  res.trace.push_back(objective);

  double step = opt.step_size;
  Vector trial(res.x.size());
  Vector trial_grad(res.x.size());
  for (int it = 1; it <= opt.max_iters; ++it) {
    double f_trial = 0.0;
    for (;;) {
      trial = res.x - step * grad;
      prox(trial, step);
      // The gradient is evaluated along with the value so an accepted trial
      // needs no second pass.
      f_trial = smooth(trial, &trial_grad);
      check(f_trial, "smooth objective", it);
      const Vector diff = trial - res.x;
      const double bound = f + grad.dot(diff) + diff.squaredNorm() / (2.0 * step);
      if (f_trial <= bound + 1e-12 * std::abs(f)) break;
      if (step * opt.backtrack < opt.min_step) {
        // Once the objective is resolved to working precision (measured
        // against its starting magnitude) the bound test is lost in rounding.
        // That is convergence; an increase above the rounding level is not.
        const double noise = 1e-12 * std::max(std::abs(res.trace.front()), std::abs(objective));
        if (f_trial + penalty(trial) <= objective + noise) {
          res.converged = true;
          res.final_step = step;
          return res;
        }
        std::ostringstream os;
        os << "objective increases even at minimum step " << opt.min_step
           << " (iteration " << it << ")";
        throw NumericalError(os.str());
      }
      step *= opt.backtrack;
    }
    if (!trial_grad.allFinite()) throw NumericalError("non-finite gradient");
    const bool stalled = (trial.array() == res.x.array()).all();
    res.x.swap(trial);
    grad.swap(trial_grad);
    f = f_trial;
    const double next = f + penalty(res.x);
    res.trace.push_back(next);
    res.iterations = it;
    const double change = std::abs(objective - next);
    objective = next;
    if (stalled || change <= opt.tol * std::max(std::abs(objective), 1e-300)) {
      res.converged = true;
      break;
    }
    step *= opt.step_growth;
  }
  res.final_step = step;
  return res;
}

}  // namespace igc
