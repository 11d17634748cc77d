#include "dssync/problems.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "dssync/errors.hpp"

namespace dssync {

namespace {

// Small dense helpers; matrices are row-major d x d in a flat vector.

double dot(const ParamVector& x, const ParamVector& y) {
  double acc = 0.0;
  for (size_t i = 0; i < x.size(); ++i) acc += x[i] * y[i];
  return acc;
}

ParamVector matvec(const std::vector<double>& a, const ParamVector& x) {
  const size_t d = x.size();
  ParamVector out(d, 0.0);
  for (size_t i = 0; i < d; ++i) {
    double acc = 0.0;
    for (size_t j = 0; j < d; ++j) acc += a[i * d + j] * x[j];
    out[i] = acc;
  }
  return out;
}

// Solves a x = b for symmetric positive definite a via Cholesky, in place
// scratch.  Throws if a is not positive definite.
ParamVector spd_solve(std::vector<double> a, ParamVector b) {
  const size_t d = b.size();
  for (size_t j = 0; j < d; ++j) {
    double diag = a[j * d + j];
    for (size_t k = 0; k < j; ++k) diag -= a[j * d + k] * a[j * d + k];
    if (diag <= 0.0) throw std::runtime_error("spd_solve: matrix not positive definite");
    const double root = std::sqrt(diag);
    a[j * d + j] = root;
    for (size_t i = j + 1; i < d; ++i) {
      double v = a[i * d + j];
      for (size_t k = 0; k < j; ++k) v -= a[i * d + k] * a[j * d + k];
      a[i * d + j] = v / root;
    }
  }
  for (size_t i = 0; i < d; ++i) {  // forward: L y = b
    double v = b[i];
    for (size_t k = 0; k < i; ++k) v -= a[i * d + k] * b[k];
    b[i] = v / a[i * d + i];
  }
  for (size_t ii = d; ii > 0; --ii) {  // backward: L^T x = y
    const size_t i = ii - 1;
    double v = b[i];
    for (size_t k = i + 1; k < d; ++k) v -= a[k * d + i] * b[k];
    b[i] = v / a[i * d + i];
  }
  return b;
}

// Largest eigenvalue of a symmetric positive semidefinite matrix by power
// iteration from a deterministic start.
double max_eigenvalue(const std::vector<double>& a, size_t d) {
  ParamVector v(d, 1.0 / std::sqrt(static_cast<double>(d)));
  double lambda = 0.0;
  for (int it = 0; it < 1000; ++it) {
    ParamVector av = matvec(a, v);
    const double n = norm(av);
    if (n == 0.0) return 0.0;
    for (size_t i = 0; i < d; ++i) av[i] /= n;
    const double next = dot(av, matvec(a, av));
    const bool converged = std::abs(next - lambda) <= 1e-13 * std::max(1.0, std::abs(next));
    lambda = next;
    v = std::move(av);
    if (converged && it > 2) break;
  }
  return lambda;
}

// Random orthogonal matrix: modified Gram-Schmidt on a seeded gaussian
// matrix, with one re-orthogonalization pass for accuracy.
std::vector<double> random_orthogonal(size_t d, Rng& rng) {
  std::vector<double> q(d * d);
  for (double& x : q) x = rng.gaussian();
  for (size_t j = 0; j < d; ++j) {
    for (int pass = 0; pass < 2; ++pass) {
      for (size_t k = 0; k < j; ++k) {
        double proj = 0.0;
        for (size_t i = 0; i < d; ++i) proj += q[i * d + j] * q[i * d + k];
        for (size_t i = 0; i < d; ++i) q[i * d + j] -= proj * q[i * d + k];
      }
    }
    double n = 0.0;
    for (size_t i = 0; i < d; ++i) n += q[i * d + j] * q[i * d + j];
    n = std::sqrt(n);
    if (n < 1e-12) throw std::runtime_error("random_orthogonal: degenerate column");
    for (size_t i = 0; i < d; ++i) q[i * d + j] /= n;
  }
  return q;
}

ParamVector seeded_unit_vector(size_t d, Rng& rng) {
  ParamVector u(d);
  for (double& x : u) x = rng.gaussian();
  const double n = norm(u);
  if (n < 1e-12) throw std::runtime_error("seeded_unit_vector: degenerate draw");
  for (double& x : u) x /= n;
  return u;
}

void check_common(const DatasetSpec& s) {
  if (s.d < 1) throw ConfigError("problem.d must be >= 1 (got " + std::to_string(s.d) + ")");
  if (!(s.mu >= 0.0)) throw ConfigError("problem.mu must be >= 0");
}

class QuadraticProblem final : public Problem {
 public:
  explicit QuadraticProblem(const DatasetSpec& s) : spec_(s) {
    check_common(s);
    if (s.mu <= 0.0) throw ConfigError("quadratic requires problem.mu > 0");
    if (!(s.L >= s.mu)) throw ConfigError("problem.L must be >= problem.mu");
    if (s.sigma < 0.0) throw ConfigError("problem.sigma must be >= 0");
    if (s.delta0 <= 0.0) throw ConfigError("problem.delta0 must be > 0");
    const size_t d = static_cast<size_t>(s.d);
    if (d == 1 && s.L != s.mu) {
      throw ConfigError("quadratic with d=1 requires problem.L == problem.mu");
    }

    a_.assign(d * d, 0.0);
    if (s.L == s.mu) {
      // Exactly mu * I; keeps gradients bit-exact for identity-like cases.
      for (size_t i = 0; i < d; ++i) a_[i * d + i] = s.mu;
    } else {
      // Eigenvalues log-uniformly spaced across [mu, L], conjugated by a
      // seeded orthogonal basis.
      std::vector<double> lambda(d);
      for (size_t j = 0; j < d; ++j) {
        const double frac = static_cast<double>(j) / static_cast<double>(d - 1);
        lambda[j] = s.mu * std::pow(s.L / s.mu, frac);
      }
      Rng rng = Rng::for_stream(s.seed, streams::kDataGen, 0, 0);
      std::vector<double> q = random_orthogonal(d, rng);
      for (size_t i = 0; i < d; ++i) {
        for (size_t j = i; j < d; ++j) {
          double v = 0.0;
          for (size_t k = 0; k < d; ++k) v += q[i * d + k] * lambda[k] * q[j * d + k];
          a_[i * d + j] = v;
          a_[j * d + i] = v;
        }
      }
    }

    Rng center = Rng::for_stream(s.seed, streams::kDataGen, 1, 0);
    w_star_.resize(d);
    for (double& x : w_star_) x = center.gaussian();

    Rng init = Rng::for_stream(s.seed, streams::kInitParams, 0, 0);
    ParamVector u = seeded_unit_vector(d, init);
    w0_ = w_star_;
    const double r = std::sqrt(s.delta0);
    for (size_t i = 0; i < d; ++i) w0_[i] += r * u[i];
  }

  const DatasetSpec& spec() const override { return spec_; }
  int dim() const override { return spec_.d; }
  int dataset_size() const override { return 0; }
  ParamVector initial_params() const override { return w0_; }

  GradSample stochastic_gradient(const ParamVector& w, std::span<const int>,
                                 Rng& rng) const override {
    check_dim(w);
    ParamVector diff = w;
    for (size_t i = 0; i < diff.size(); ++i) diff[i] -= w_star_[i];
    GradSample out;
    out.grad = matvec(a_, diff);
    out.loss = 0.5 * dot(diff, out.grad);
    if (spec_.sigma > 0.0) {
      // Per-coordinate variance sigma^2 / d, so E|noise|^2 = sigma^2.  The
      // reported loss carries the matching linear term, keeping the gradient
      // exact for the perturbed objective.
      const double scale = spec_.sigma / std::sqrt(static_cast<double>(diff.size()));
      for (size_t i = 0; i < diff.size(); ++i) {
        const double n = scale * rng.gaussian();
        out.grad[i] += n;
        out.loss += n * diff[i];
      }
    }
    return out;
  }

  double full_loss(const ParamVector& w) const override {
    check_dim(w);
    ParamVector diff = w;
    for (size_t i = 0; i < diff.size(); ++i) diff[i] -= w_star_[i];
    return 0.5 * dot(diff, matvec(a_, diff));
  }

  ParamVector full_gradient(const ParamVector& w) const override {
    check_dim(w);
    ParamVector diff = w;
    for (size_t i = 0; i < diff.size(); ++i) diff[i] -= w_star_[i];
    return matvec(a_, diff);
  }

  bool has_optimum() const override { return true; }
  const ParamVector& optimum() const override { return w_star_; }
  double true_suboptimality(const ParamVector& w) const override { return full_loss(w); }
  double smoothness() const override { return spec_.L; }
  double strong_convexity() const override { return spec_.mu; }

 private:
  void check_dim(const ParamVector& w) const {
    if (w.size() != w_star_.size()) throw std::invalid_argument("quadratic: wrong param length");
  }

  DatasetSpec spec_;
  std::vector<double> a_;
  ParamVector w_star_;
  ParamVector w0_;
};

class LogisticProblem final : public Problem {
 public:
  // Synthetic: features are standard gaussian, labels drawn from a logistic
  // model around a seeded ground-truth direction.
  explicit LogisticProblem(const DatasetSpec& s) : spec_(s), l2_(s.mu) {
    check_common(s);
    if (s.M < 1) throw ConfigError("logistic requires problem.M >= 1");
    const size_t d = static_cast<size_t>(s.d);
    Rng rng = Rng::for_stream(s.seed, streams::kDataGen, 0, 0);
    ParamVector w_true = seeded_unit_vector(d, rng);
    for (double& x : w_true) x *= 3.0;
    x_.assign(static_cast<size_t>(s.M) * d, 0.0);
    y_.assign(static_cast<size_t>(s.M), 1.0);
    for (int i = 0; i < s.M; ++i) {
      double margin = 0.0;
      for (size_t j = 0; j < d; ++j) {
        const double v = rng.gaussian();
        x_[static_cast<size_t>(i) * d + j] = v;
        margin += v * w_true[j];
      }
      const double p = 1.0 / (1.0 + std::exp(-margin));
      y_[static_cast<size_t>(i)] = rng.uniform01() < p ? 1.0 : -1.0;
    }
    finish_setup();
  }

  // From preloaded examples (CSV path).
  LogisticProblem(DatasetSpec s, std::vector<double> x, std::vector<double> y)
      : spec_(std::move(s)), l2_(spec_.mu), x_(std::move(x)), y_(std::move(y)) {
    finish_setup();
  }

  const DatasetSpec& spec() const override { return spec_; }
  int dim() const override { return spec_.d; }
  int dataset_size() const override { return spec_.M; }
  ParamVector initial_params() const override {
    return ParamVector(static_cast<size_t>(spec_.d), 0.0);
  }

  GradSample stochastic_gradient(const ParamVector& w, std::span<const int> batch,
                                 Rng&) const override {
    check_dim(w);
    if (batch.empty()) throw std::invalid_argument("logistic: batch must be non-empty");
    const size_t d = w.size();
    GradSample out;
    out.grad.assign(d, 0.0);
    for (int idx : batch) {
      check_index(idx);
      const double* x = &x_[static_cast<size_t>(idx) * d];
      const double y = y_[static_cast<size_t>(idx)];
      double z = 0.0;
      for (size_t j = 0; j < d; ++j) z += x[j] * w[j];
      out.loss += softplus(-y * z);
      const double s = sigmoid(-y * z);
      for (size_t j = 0; j < d; ++j) out.grad[j] += -y * s * x[j];
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    out.loss *= inv;
    for (double& g : out.grad) g *= inv;
    if (l2_ > 0.0) {
      out.loss += 0.5 * l2_ * dot(w, w);
      for (size_t j = 0; j < d; ++j) out.grad[j] += l2_ * w[j];
    }
    return out;
  }

  double full_loss(const ParamVector& w) const override {
    check_dim(w);
    const size_t d = w.size();
    double acc = 0.0;
    for (int i = 0; i < spec_.M; ++i) {
      const double* x = &x_[static_cast<size_t>(i) * d];
      double z = 0.0;
      for (size_t j = 0; j < d; ++j) z += x[j] * w[j];
      acc += softplus(-y_[static_cast<size_t>(i)] * z);
    }
    acc /= static_cast<double>(spec_.M);
    if (l2_ > 0.0) acc += 0.5 * l2_ * dot(w, w);
    return acc;
  }

  ParamVector full_gradient(const ParamVector& w) const override {
    check_dim(w);
    const size_t d = w.size();
    ParamVector g(d, 0.0);
    for (int i = 0; i < spec_.M; ++i) {
      const double* x = &x_[static_cast<size_t>(i) * d];
      const double y = y_[static_cast<size_t>(i)];
      double z = 0.0;
      for (size_t j = 0; j < d; ++j) z += x[j] * w[j];
      const double s = sigmoid(-y * z);
      for (size_t j = 0; j < d; ++j) g[j] += -y * s * x[j];
    }
    const double inv = 1.0 / static_cast<double>(spec_.M);
    for (size_t j = 0; j < d; ++j) g[j] = g[j] * inv + l2_ * w[j];
    return g;
  }

  bool has_optimum() const override { return l2_ > 0.0; }
  const ParamVector& optimum() const override {
    if (!has_optimum()) throw std::runtime_error("logistic without l2 has no cached optimum");
    return w_opt_;
  }
  double true_suboptimality(const ParamVector& w) const override {
    optimum();
    return full_loss(w) - f_star_;
  }
  double smoothness() const override { return smoothness_; }
  double strong_convexity() const override { return l2_; }

 private:
  static double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }
  static double softplus(double z) {
    // log(1 + e^z) without overflow for large |z|.
    return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
  }

  void check_dim(const ParamVector& w) const {
    if (w.size() != static_cast<size_t>(spec_.d)) {
      throw std::invalid_argument("logistic: wrong param length");
    }
  }
  void check_index(int idx) const {
    if (idx < 0 || idx >= spec_.M) {
      throw std::invalid_argument("logistic: example index out of range: " + std::to_string(idx));
    }
  }

  void finish_setup() {
    const size_t d = static_cast<size_t>(spec_.d);
    // Hessian of the data term is bounded by X^T X / (4M).
    std::vector<double> gram(d * d, 0.0);
    for (int i = 0; i < spec_.M; ++i) {
      const double* x = &x_[static_cast<size_t>(i) * d];
      for (size_t a = 0; a < d; ++a) {
        for (size_t b = a; b < d; ++b) gram[a * d + b] += x[a] * x[b];
      }
    }
    for (size_t a = 0; a < d; ++a) {
      for (size_t b = 0; b < a; ++b) gram[a * d + b] = gram[b * d + a];
    }
    smoothness_ = max_eigenvalue(gram, d) / (4.0 * static_cast<double>(spec_.M)) + l2_;
    if (l2_ > 0.0) solve_optimum();
  }

  // Damped Newton to gradient norm <= 1e-12; the l2 term makes the problem
  // strongly convex, so this converges in a handful of iterations.
  void solve_optimum() {
    const size_t d = static_cast<size_t>(spec_.d);
    ParamVector w(d, 0.0);
    for (int it = 0; it < 200; ++it) {
      ParamVector g(d, 0.0);
      std::vector<double> h(d * d, 0.0);
      for (int i = 0; i < spec_.M; ++i) {
        const double* x = &x_[static_cast<size_t>(i) * d];
        const double y = y_[static_cast<size_t>(i)];
        double z = 0.0;
        for (size_t j = 0; j < d; ++j) z += x[j] * w[j];
        const double s = sigmoid(-y * z);
        const double curv = s * (1.0 - s);
        for (size_t j = 0; j < d; ++j) {
          g[j] += -y * s * x[j];
          for (size_t k = j; k < d; ++k) h[j * d + k] += curv * x[j] * x[k];
        }
      }
      const double inv_m = 1.0 / static_cast<double>(spec_.M);
      for (size_t j = 0; j < d; ++j) {
        g[j] = g[j] * inv_m + l2_ * w[j];
        for (size_t k = 0; k < j; ++k) h[j * d + k] = h[k * d + j];
        for (size_t k = j; k < d; ++k) h[j * d + k] *= inv_m;
        h[j * d + j] += l2_;
      }
      if (norm(g) <= 1e-12) {
        w_opt_ = w;
        f_star_ = full_loss(w);
        return;
      }
      ParamVector dir = spd_solve(h, g);
      const double f0 = full_loss(w);
      // Near the optimum the true decrease of a Newton step underflows the
      // rounding of the loss evaluation, so allow the step a rounding margin
      // instead of demanding a strict decrease.
      const double allowance = 64.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(f0));
      double step = 1.0;
      for (int half = 0; half < 60; ++half) {
        ParamVector trial = w;
        for (size_t j = 0; j < d; ++j) trial[j] -= step * dir[j];
        if (full_loss(trial) <= f0 + allowance) {
          w = std::move(trial);
          break;
        }
        step *= 0.5;
      }
    }
    throw std::runtime_error("logistic optimum solve did not reach tolerance 1e-12");
  }

  DatasetSpec spec_;
  double l2_ = 0.0;
  std::vector<double> x_;  // M x d row-major
  std::vector<double> y_;  // labels in {-1, +1}
  double smoothness_ = 0.0;
  ParamVector w_opt_;
  double f_star_ = 0.0;
};

// One hidden layer, tanh activation, scalar output, squared loss.  Parameter
// layout: [W1 (hidden x d, row-major) | b1 (hidden) | w2 (hidden) | b2].
// Running statistics track an exponential moving average of the hidden
// pre-activations, as a stand-in for batch-norm style state.
class TinyMlpProblem final : public Problem {
 public:
  explicit TinyMlpProblem(const DatasetSpec& s) : spec_(s) {
    check_common(s);
    if (s.M < 1) throw ConfigError("tiny-mlp requires problem.M >= 1");
    if (s.hidden < 1 || s.hidden > 32) {
      throw ConfigError("problem.hidden must be in [1, 32] (got " + std::to_string(s.hidden) +
                        ")");
    }
    const size_t d = static_cast<size_t>(s.d);
    Rng rng = Rng::for_stream(s.seed, streams::kDataGen, 0, 0);
    ParamVector teacher = seeded_unit_vector(d, rng);
    for (double& x : teacher) x *= 2.0;
    x_.assign(static_cast<size_t>(s.M) * d, 0.0);
    y_.assign(static_cast<size_t>(s.M), 0.0);
    for (int i = 0; i < s.M; ++i) {
      double z = 0.0;
      for (size_t j = 0; j < d; ++j) {
        const double v = rng.gaussian();
        x_[static_cast<size_t>(i) * d + j] = v;
        z += v * teacher[j];
      }
      y_[static_cast<size_t>(i)] = std::sin(z);
    }
  }

  const DatasetSpec& spec() const override { return spec_; }
  int dim() const override { return spec_.hidden * spec_.d + 2 * spec_.hidden + 1; }
  int dataset_size() const override { return spec_.M; }
  int stats_dim() const override { return spec_.hidden; }

  ParamVector initial_params() const override {
    const size_t d = static_cast<size_t>(spec_.d);
    const size_t h = static_cast<size_t>(spec_.hidden);
    Rng rng = Rng::for_stream(spec_.seed, streams::kInitParams, 0, 0);
    ParamVector w(static_cast<size_t>(dim()), 0.0);
    const double s1 = 1.0 / std::sqrt(static_cast<double>(d));
    for (size_t i = 0; i < h * d; ++i) w[i] = s1 * rng.gaussian();
    const double s2 = 1.0 / std::sqrt(static_cast<double>(h));
    for (size_t i = 0; i < h; ++i) w[h * d + h + i] = s2 * rng.gaussian();
    return w;
  }

  GradSample stochastic_gradient(const ParamVector& w, std::span<const int> batch,
                                 Rng&) const override {
    check_dim(w);
    if (batch.empty()) throw std::invalid_argument("tiny-mlp: batch must be non-empty");
    const size_t d = static_cast<size_t>(spec_.d);
    const size_t h = static_cast<size_t>(spec_.hidden);
    GradSample out;
    out.grad.assign(w.size(), 0.0);
    out.stats_observation.assign(h, 0.0);
    ParamVector z(h), a(h);
    for (int idx : batch) {
      check_index(idx);
      const double* x = &x_[static_cast<size_t>(idx) * d];
      const double err = forward(w, x, z, a) - y_[static_cast<size_t>(idx)];
      out.loss += 0.5 * err * err;
      for (size_t i = 0; i < h; ++i) {
        out.stats_observation[i] += z[i];
        const double dz = err * w[h * d + h + i] * (1.0 - a[i] * a[i]);
        for (size_t j = 0; j < d; ++j) out.grad[i * d + j] += dz * x[j];
        out.grad[h * d + i] += dz;              // b1
        out.grad[h * d + h + i] += err * a[i];  // w2
      }
      out.grad[h * d + 2 * h] += err;  // b2
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    out.loss *= inv;
    for (double& g : out.grad) g *= inv;
    for (double& v : out.stats_observation) v *= inv;
    return out;
  }

  double full_loss(const ParamVector& w) const override {
    check_dim(w);
    const size_t d = static_cast<size_t>(spec_.d);
    const size_t h = static_cast<size_t>(spec_.hidden);
    ParamVector z(h), a(h);
    double acc = 0.0;
    for (int i = 0; i < spec_.M; ++i) {
      const double err = forward(w, &x_[static_cast<size_t>(i) * d], z, a) -
                         y_[static_cast<size_t>(i)];
      acc += 0.5 * err * err;
    }
    return acc / static_cast<double>(spec_.M);
  }

  ParamVector full_gradient(const ParamVector& w) const override {
    std::vector<int> all(static_cast<size_t>(spec_.M));
    for (int i = 0; i < spec_.M; ++i) all[static_cast<size_t>(i)] = i;
    Rng unused(0);
    return stochastic_gradient(w, all, unused).grad;
  }

  bool has_optimum() const override { return false; }
  const ParamVector& optimum() const override {
    throw std::runtime_error("tiny-mlp is non-convex, no optimum is available");
  }
  double true_suboptimality(const ParamVector&) const override {
    throw std::runtime_error("tiny-mlp is non-convex, no optimum is available");
  }
  double smoothness() const override { return std::nan(""); }
  double strong_convexity() const override { return 0.0; }

 private:
  double forward(const ParamVector& w, const double* x, ParamVector& z, ParamVector& a) const {
    const size_t d = static_cast<size_t>(spec_.d);
    const size_t h = static_cast<size_t>(spec_.hidden);
    double out = w[h * d + 2 * h];
    for (size_t i = 0; i < h; ++i) {
      double zi = w[h * d + i];
      for (size_t j = 0; j < d; ++j) zi += w[i * d + j] * x[j];
      z[i] = zi;
      a[i] = std::tanh(zi);
      out += w[h * d + h + i] * a[i];
    }
    return out;
  }

  void check_dim(const ParamVector& w) const {
    if (w.size() != static_cast<size_t>(dim())) {
      throw std::invalid_argument("tiny-mlp: wrong param length");
    }
  }
  void check_index(int idx) const {
    if (idx < 0 || idx >= spec_.M) {
      throw std::invalid_argument("tiny-mlp: example index out of range: " + std::to_string(idx));
    }
  }

  DatasetSpec spec_;
  std::vector<double> x_;
  std::vector<double> y_;
};

}  // namespace

std::unique_ptr<Problem> make_problem(const DatasetSpec& spec) {
  if (spec.kind == "quadratic") return std::make_unique<QuadraticProblem>(spec);
  if (spec.kind == "logistic") {
    if (!spec.csv.empty()) return load_logistic_csv(spec.csv, spec.mu);
    return std::make_unique<LogisticProblem>(spec);
  }
  if (spec.kind == "tiny-mlp") return std::make_unique<TinyMlpProblem>(spec);
  throw ConfigError("unknown problem.kind: " + spec.kind);
}

std::unique_ptr<Problem> load_logistic_csv(const std::string& path, double l2) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open csv file: " + path);
  std::vector<double> x;
  std::vector<double> y;
  int d = -1;
  std::string line;
  int row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::vector<double> fields;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(cell, &used);
      } catch (const std::exception&) {
        throw ConfigError("csv row " + std::to_string(row) + ": not a number: '" + cell + "'");
      }
      if (used != cell.size() && cell.find_first_not_of(" \t\r", used) != std::string::npos) {
        throw ConfigError("csv row " + std::to_string(row) + ": not a number: '" + cell + "'");
      }
      fields.push_back(v);
    }
    if (fields.size() < 2) {
      throw ConfigError("csv row " + std::to_string(row) + ": need features plus a label");
    }
    const int row_d = static_cast<int>(fields.size()) - 1;
    if (d == -1) {
      d = row_d;
    } else if (row_d != d) {
      throw ConfigError("csv row " + std::to_string(row) + ": expected " + std::to_string(d + 1) +
                        " columns, got " + std::to_string(fields.size()));
    }
    const double label = fields.back();
    if (label != 1.0 && label != -1.0 && label != 0.0) {
      throw ConfigError("csv row " + std::to_string(row) + ": label must be -1, 0 or 1");
    }
    y.push_back(label == 0.0 ? -1.0 : label);
    x.insert(x.end(), fields.begin(), fields.end() - 1);
  }
  if (d == -1) throw ConfigError("csv file has no data rows: " + path);
  if (l2 < 0.0) throw ConfigError("logistic l2 must be >= 0");

  DatasetSpec spec;
  spec.kind = "logistic";
  spec.csv = path;
  spec.d = d;
  spec.M = static_cast<int>(y.size());
  spec.mu = l2;
  spec.L = 0.0;  // recomputed from the data below
  std::unique_ptr<Problem> p(new LogisticProblem(spec, std::move(x), std::move(y)));
  return p;
}

std::vector<Shard> make_shards(int dataset_size, int workers, uint64_t seed) {
  if (workers < 1) throw std::invalid_argument("make_shards: workers must be >= 1");
  if (dataset_size < workers) {
    throw std::invalid_argument("make_shards: dataset smaller than worker count (" +
                                std::to_string(dataset_size) + " < " + std::to_string(workers) +
                                ")");
  }
  std::vector<int> perm(static_cast<size_t>(dataset_size));
  for (int i = 0; i < dataset_size; ++i) perm[static_cast<size_t>(i)] = i;
  Rng rng = Rng::for_stream(seed, streams::kShard, 0, 0);
  for (size_t i = perm.size() - 1; i > 0; --i) {
    const size_t j = static_cast<size_t>(rng.uniform_below(i + 1));
    std::swap(perm[i], perm[j]);
  }
  std::vector<Shard> shards(static_cast<size_t>(workers));
  for (int w = 0; w < workers; ++w) shards[static_cast<size_t>(w)].owner = w;
  for (size_t i = 0; i < perm.size(); ++i) {
    shards[i % static_cast<size_t>(workers)].indices.push_back(perm[i]);
  }
  return shards;
}

std::vector<int> epoch_order(const Shard& shard, uint64_t seed, int rank, long epoch) {
  std::vector<int> order = shard.indices;
  if (order.empty()) return order;
  Rng rng = Rng::for_stream(seed, streams::kEpochOrder, static_cast<uint64_t>(rank),
                            static_cast<uint64_t>(epoch));
  for (size_t i = order.size() - 1; i > 0; --i) {
    const size_t j = static_cast<size_t>(rng.uniform_below(i + 1));
    std::swap(order[i], order[j]);
  }
  return order;
}

}  // namespace dssync
