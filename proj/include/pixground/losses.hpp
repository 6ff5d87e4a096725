#pragma once

// Training objective: masked language-modelling loss plus a weighted
// segmentation term (soft Dice + pixel cross-entropy), with analytic
// gradients with respect to the predicted probabilities.

#include <vector>

#include "pixground/raster.hpp"

namespace pixground {

inline constexpr double kProbEpsilon = 1e-7;
inline constexpr double kDiceSmoothing = 1.0;
inline constexpr double kDefaultLambdaSeg = 0.5;

struct ProbMask {
  int width = 0;
  int height = 0;
  std::vector<double> probs;  // row-major, each in [eps, 1 - eps]

  /// Clamps every value into [eps, 1 - eps]. Throws on a size mismatch or
  /// non-finite input.
  static ProbMask clamped(int width, int height, std::vector<double> probs);
  /// 1 - eps on foreground, eps elsewhere.
  static ProbMask from_mask(const BinaryMask& mask);
};

struct LossValue {
  double loss = 0.0;
  std::vector<double> grad;  // d loss / d probs, same layout as the prediction
};

/// 1 - (2 sum p g + s) / (sum p + sum g + s) with smoothing s.
LossValue dice_loss(const ProbMask& pred, const BinaryMask& gt, double smoothing = kDiceSmoothing);
/// Mean over pixels of -[g ln p + (1 - g) ln(1 - p)].
LossValue pixel_ce(const ProbMask& pred, const BinaryMask& gt);

/// Segmentation term averaged over masks: mean over pairs of (dice + ce).
double segmentation_loss(const std::vector<ProbMask>& preds, const std::vector<BinaryMask>& gts);

/// Mean softmax cross-entropy over positions whose `exclude` flag is false.
/// `logits` is positions x vocab, row-major. Throws Error{invalid_argument}
/// when every position is excluded or shapes disagree.
double lm_loss(const std::vector<double>& logits, int vocab, const std::vector<int>& targets,
               const std::vector<bool>& exclude);

struct LossBreakdown {
  double lm = 0.0;
  double dice = 0.0;
  double ce = 0.0;
  double total = 0.0;
  double lambda_seg = kDefaultLambdaSeg;
};

/// total = lm + lambda_seg * (dice + ce). Throws Error{invalid_argument} for
/// a negative component or weight.
LossBreakdown total_loss(double lm, double dice, double ce, double lambda_seg = kDefaultLambdaSeg);

}  // namespace pixground
