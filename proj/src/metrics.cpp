#include "revlab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

namespace revlab::eval {

using corpus::Label;

ConfusionCounts confusion(std::span<const Label> preds, std::span<const Label> golds) {
  if (preds.size() != golds.size())
    throw EvaluationError(fmt::format("length mismatch: {} predictions for {} gold labels", preds.size(), golds.size()));
  ConfusionCounts c;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const bool p = preds[i] == Label::Desirable;
    const bool g = golds[i] == Label::Desirable;
    if (p && g)
      ++c.tp;
    else if (p)
      ++c.fp;
    else if (g)
      ++c.fn;
    else
      ++c.tn;
  }
  return c;
}

double f1_unweighted(const ConfusionCounts& c) {
  auto class_f1 = [](std::size_t hit, std::size_t wrong_pred, std::size_t missed, const char* name) {
    const std::size_t denom = 2 * hit + wrong_pred + missed;
    if (denom == 0) {
      warn(fmt::format("class {} absent from predictions and gold labels; its F1 counts as 0", name));
      return 0.0;
    }
    return 2.0 * static_cast<double>(hit) / static_cast<double>(denom);
  };
  const double desirable = class_f1(c.tp, c.fp, c.fn, "Desirable");
  const double undesirable = class_f1(c.tn, c.fn, c.fp, "Undesirable");
  return (desirable + undesirable) / 2.0;
}

double f1_unweighted(std::span<const Label> preds, std::span<const Label> golds) {
  if (preds.empty()) throw EvaluationError("F1 needs at least one example");
  return f1_unweighted(confusion(preds, golds));
}

namespace {

// Lentz's method for the continued fraction of I_x(a, b).
double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIterations = 10000;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIterations; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kEps) return h;
  }
  throw EvaluationError(fmt::format("incomplete beta did not converge (a={}, b={}, x={})", a, b, x));
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) throw EvaluationError("incomplete beta needs a, b > 0");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  // The fraction converges fast for x < (a+1)/(a+b+2); use the symmetry otherwise.
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_two_tailed(double t, double df) {
  if (!(df > 0.0)) throw EvaluationError("t distribution needs positive degrees of freedom");
  if (std::isinf(t)) return 0.0;
  return incomplete_beta(df / 2.0, 0.5, df / (df + t * t));
}

CorrelationResult pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size())
    throw EvaluationError(fmt::format("pearson: length mismatch ({} vs {})", x.size(), y.size()));
  const std::size_t n = x.size();
  if (n < 3) throw EvaluationError(fmt::format("pearson needs at least 3 points, got {}", n));
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw UndefinedCorrelation("undefined correlation: zero variance");
  const double r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  const double df = static_cast<double>(n - 2);
  const double one_minus = 1.0 - r * r;
  const double t = one_minus <= 0.0 ? std::copysign(std::numeric_limits<double>::infinity(), r)
                                    : r * std::sqrt(df / one_minus);
  return {r, student_t_two_tailed(t, df), n};
}

}  // namespace revlab::eval
