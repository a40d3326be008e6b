#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>

#include "revlab/corpus.hpp"
#include "revlab/error.hpp"

namespace revlab::eval {

/// Binary confusion counts with Desirable as the positive class.
struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;

  std::size_t total() const { return tp + fp + tn + fn; }
  bool operator==(const ConfusionCounts&) const = default;
};

ConfusionCounts confusion(std::span<const corpus::Label> preds, std::span<const corpus::Label> golds);

/// Unweighted mean of the Desirable and Undesirable F1 scores. A class absent from both
/// predictions and gold labels contributes 0 and raises a warning.
double f1_unweighted(std::span<const corpus::Label> preds, std::span<const corpus::Label> golds);
double f1_unweighted(const ConfusionCounts& counts);

struct CorrelationResult {
  double r = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;
};

/// Raised when either series has zero variance; reports show these cells as "n/a".
class UndefinedCorrelation : public EvaluationError {
 public:
  using EvaluationError::EvaluationError;
};

/// Product-moment correlation with a two-tailed p-value from Student's t on n-2 degrees of
/// freedom, t = r * sqrt((n-2) / (1-r^2)).
CorrelationResult pearson(std::span<const double> x, std::span<const double> y);

/// Regularized incomplete beta I_x(a, b) by continued fraction.
double incomplete_beta(double a, double b, double x);

/// P(|T| >= |t|) for Student's t with `df` degrees of freedom.
double student_t_two_tailed(double t, double df);

inline constexpr double kSignificanceLevel = 0.05;
inline bool significant(double p) { return p < kSignificanceLevel; }

}  // namespace revlab::eval
