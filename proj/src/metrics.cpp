#include "slotlifter/metrics.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

namespace sl::metrics {

double psnr(const std::vector<double>& pred, const std::vector<double>& gt) {
  if (pred.size() != gt.size() || pred.empty())
    throw std::invalid_argument("psnr: shape mismatch");
  double mse = 0;
  for (size_t i = 0; i < pred.size(); ++i) {
    double d = pred[i] - gt[i];
    mse += d * d;
  }
  mse /= double(pred.size());
  if (mse < 1e-10) return 99.0;
  return 10.0 * std::log10(1.0 / mse);
}

double ssim(const std::vector<double>& pred_rgb, const std::vector<double>& gt_rgb,
            long height, long width) {
  constexpr long kWin = 11, kHalf = 5;
  constexpr double kSigma = 1.5, kC1 = 0.01 * 0.01, kC2 = 0.03 * 0.03;
  if (height < kWin || width < kWin)
    throw std::invalid_argument("ssim: image smaller than the 11x11 window");
  if (pred_rgb.size() != size_t(height * width * 3) || gt_rgb.size() != pred_rgb.size())
    throw std::invalid_argument("ssim: shape mismatch");

  std::vector<double> x(height * width), y(height * width);
  for (long i = 0; i < height * width; ++i) {
    x[i] = (pred_rgb[i * 3] + pred_rgb[i * 3 + 1] + pred_rgb[i * 3 + 2]) / 3.0;
    y[i] = (gt_rgb[i * 3] + gt_rgb[i * 3 + 1] + gt_rgb[i * 3 + 2]) / 3.0;
  }

  double kernel[kWin][kWin];
  double ksum = 0;
  for (long r = 0; r < kWin; ++r)
    for (long c = 0; c < kWin; ++c) {
      double dr = r - kHalf, dc = c - kHalf;
      kernel[r][c] = std::exp(-(dr * dr + dc * dc) / (2 * kSigma * kSigma));
      ksum += kernel[r][c];
    }
  for (auto& row : kernel)
    for (auto& k : row) k /= ksum;

  double total = 0;
  long count = 0;
  for (long r = kHalf; r < height - kHalf; ++r)
    for (long c = kHalf; c < width - kHalf; ++c) {
      double mx = 0, my = 0, mxx = 0, myy = 0, mxy = 0;
      for (long wr = 0; wr < kWin; ++wr)
        for (long wc = 0; wc < kWin; ++wc) {
          double k = kernel[wr][wc];
          double xv = x[(r + wr - kHalf) * width + c + wc - kHalf];
          double yv = y[(r + wr - kHalf) * width + c + wc - kHalf];
          mx += k * xv;
          my += k * yv;
          mxx += k * xv * xv;
          myy += k * yv * yv;
          mxy += k * xv * yv;
        }
      double vx = mxx - mx * mx, vy = myy - my * my, cov = mxy - mx * my;
      double s = ((2 * mx * my + kC1) * (2 * cov + kC2)) /
                 ((mx * mx + my * my + kC1) * (vx + vy + kC2));
      total += s;
      ++count;
    }
  return total / count;
}

double ari(const std::vector<int>& pred, const std::vector<int>& gt, bool foreground_only) {
  if (pred.size() != gt.size()) throw std::invalid_argument("ari: label count mismatch");
  std::vector<std::pair<int, int>> pairs;
  for (size_t i = 0; i < gt.size(); ++i) {
    if (pred[i] < 0 || gt[i] < 0) throw std::invalid_argument("ari: negative label");
    if (foreground_only && gt[i] == 0) continue;
    pairs.emplace_back(pred[i], gt[i]);
  }
  if (pairs.empty()) throw std::runtime_error("ari: no pixels left after foreground filtering");

  std::map<std::pair<int, int>, long> cell;
  std::map<int, long> row, col;
  for (auto& [p, g] : pairs) {
    ++cell[{p, g}];
    ++row[p];
    ++col[g];
  }
  auto comb2 = [](long n) { return 0.5 * n * (n - 1); };
  double idx = 0, rows = 0, cols = 0;
  for (auto& [_, n] : cell) idx += comb2(n);
  for (auto& [_, n] : row) rows += comb2(n);
  for (auto& [_, n] : col) cols += comb2(n);
  double total = comb2(static_cast<long>(pairs.size()));
  double expected = rows * cols / total;
  double max_index = 0.5 * (rows + cols);
  if (max_index == expected) return 1.0;  // degenerate partitions agree trivially
  return (idx - expected) / (max_index - expected);
}

}  // namespace sl::metrics
