#pragma once

#include <vector>

namespace sl::metrics {

// 10*log10(1/MSE) on [0,1] images, capped at 99 dB for MSE < 1e-10.
double psnr(const std::vector<double>& pred, const std::vector<double>& gt);

// Mean local SSIM over 11x11 Gaussian (sigma 1.5) windows fully inside the
// image; RGB reduced to grayscale by channel mean. C1=0.01^2, C2=0.03^2.
double ssim(const std::vector<double>& pred_rgb, const std::vector<double>& gt_rgb,
            long height, long width);

// Adjusted Rand index; foreground_only drops pixels whose gt label is 0
// before scoring and throws if nothing remains.
double ari(const std::vector<int>& pred, const std::vector<int>& gt, bool foreground_only);

}  // namespace sl::metrics
