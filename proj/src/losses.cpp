#include "pixground/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pixground/error.hpp"

namespace pixground {

namespace {

void require_same_shape(const ProbMask& pred, const BinaryMask& gt) {
  if (pred.width != gt.width() || pred.height != gt.height() || pred.probs.size() != gt.size()) {
    throw Error(ErrorCode::dimension_mismatch, "prediction is " + std::to_string(pred.width) + "x" +
                                                   std::to_string(pred.height) + ", gt is " +
                                                   std::to_string(gt.width()) + "x" + std::to_string(gt.height()));
  }
}

}  // namespace

ProbMask ProbMask::clamped(int width, int height, std::vector<double> probs) {
  if (width < 1 || height < 1 || probs.size() != std::size_t(width) * std::size_t(height)) {
    throw Error(ErrorCode::invalid_argument, "probability plane does not match its dimensions");
  }
  for (auto& p : probs) {
    if (!std::isfinite(p)) throw Error(ErrorCode::invalid_argument, "non-finite probability");
    p = std::clamp(p, kProbEpsilon, 1.0 - kProbEpsilon);
  }
  return {width, height, std::move(probs)};
}

ProbMask ProbMask::from_mask(const BinaryMask& mask) {
  std::vector<double> probs(mask.size());
  const auto bits = mask.bits();
  for (std::size_t i = 0; i < probs.size(); ++i) probs[i] = bits[i] ? 1.0 - kProbEpsilon : kProbEpsilon;
  return {mask.width(), mask.height(), std::move(probs)};
}

LossValue dice_loss(const ProbMask& pred, const BinaryMask& gt, double smoothing) {
  require_same_shape(pred, gt);
  const auto g = gt.bits();
  double inter = 0.0, sum_p = 0.0, sum_g = 0.0;
  for (std::size_t i = 0; i < pred.probs.size(); ++i) {
    inter += pred.probs[i] * g[i];
    sum_p += pred.probs[i];
    sum_g += g[i];
  }
  const double num = 2.0 * inter + smoothing;
  const double den = sum_p + sum_g + smoothing;
  LossValue out;
  out.loss = 1.0 - num / den;
  out.grad.resize(pred.probs.size());
  // d/dp_i of -num/den = -(2 g_i den - num) / den^2
  for (std::size_t i = 0; i < out.grad.size(); ++i) out.grad[i] = -(2.0 * g[i] * den - num) / (den * den);
  return out;
}

LossValue pixel_ce(const ProbMask& pred, const BinaryMask& gt) {
  require_same_shape(pred, gt);
  const auto g = gt.bits();
  const double n = static_cast<double>(pred.probs.size());
  LossValue out;
  out.grad.resize(pred.probs.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < out.grad.size(); ++i) {
    const double p = pred.probs[i];
    if (g[i]) {
      sum -= std::log(p);
      out.grad[i] = -1.0 / (p * n);
    } else {
      sum -= std::log1p(-p);
      out.grad[i] = 1.0 / ((1.0 - p) * n);
    }
  }
  out.loss = sum / n;
  return out;
}

double segmentation_loss(const std::vector<ProbMask>& preds, const std::vector<BinaryMask>& gts) {
  if (preds.size() != gts.size()) throw Error(ErrorCode::invalid_argument, "one gt mask per prediction required");
  if (preds.empty()) throw Error(ErrorCode::empty_input, "no masks");
  double sum = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) sum += dice_loss(preds[i], gts[i]).loss + pixel_ce(preds[i], gts[i]).loss;
  return sum / static_cast<double>(preds.size());
}

double lm_loss(const std::vector<double>& logits, int vocab, const std::vector<int>& targets,
               const std::vector<bool>& exclude) {
  if (vocab < 1) throw Error(ErrorCode::invalid_argument, "vocabulary must be nonempty");
  if (logits.size() != targets.size() * std::size_t(vocab) || exclude.size() != targets.size()) {
    throw Error(ErrorCode::invalid_argument, "logits, targets and exclusion flags disagree in length");
  }
  double sum = 0.0;
  int counted = 0;
  for (std::size_t t = 0; t < targets.size(); ++t) {
    if (exclude[t]) continue;
    if (targets[t] < 0 || targets[t] >= vocab) {
      throw Error(ErrorCode::out_of_range, "target " + std::to_string(targets[t]) + " outside the vocabulary");
    }
    const double* row = logits.data() + t * std::size_t(vocab);
    const double mx = *std::max_element(row, row + vocab);
    double z = 0.0;
    for (int v = 0; v < vocab; ++v) z += std::exp(row[v] - mx);
    sum += std::log(z) + mx - row[targets[t]];
    ++counted;
  }
  if (counted == 0) throw Error(ErrorCode::invalid_argument, "every position is excluded");
  return sum / counted;
}

LossBreakdown total_loss(double lm, double dice, double ce, double lambda_seg) {
  if (lm < 0.0 || dice < 0.0 || ce < 0.0 || lambda_seg < 0.0) {
    throw Error(ErrorCode::invalid_argument, "loss components and weight must be nonnegative");
  }
  return {lm, dice, ce, lm + lambda_seg * (dice + ce), lambda_seg};
}

}  // namespace pixground
